use num_complex::Complex64;
use rustfft::FftPlanner;

use super::response::one_sided_bins;
use crate::error::{Error, Result};

/// Magnitudes below this fraction of the maximum are clamped before taking logarithms.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

/// Minimum-phase FIR of length `M` whose DFT magnitude matches `magnitude`, given on the
/// one-sided bins `0..=M/2`, computed by folding the real cepstrum.
pub fn min_phase_fir(magnitude: &[f64], dft_size: usize) -> Result<Vec<f64>> {
    if dft_size < 2 || !dft_size.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "DFT size {dft_size} must be even and at least 2"
        )));
    }
    let bins = one_sided_bins(dft_size);
    if magnitude.len() != bins {
        return Err(Error::Shape(format!(
            "expected {bins} one-sided magnitudes, got {}",
            magnitude.len()
        )));
    }
    if magnitude.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::Domain("magnitudes must be finite and non-negative".into()));
    }
    let peak = magnitude.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::Domain("all magnitudes are zero".into()));
    }
    let floor = peak * MAGNITUDE_FLOOR;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(dft_size);
    let inv = planner.plan_fft_inverse(dft_size);
    let scale = 1.0 / dft_size as f64;

    // Hermitian-extended log magnitude
    let mut buf: Vec<Complex64> = (0..dft_size)
        .map(|m| {
            let k = if m < bins { m } else { dft_size - m };
            Complex64::new(magnitude[k].max(floor).ln(), 0.0)
        })
        .collect();
    inv.process(&mut buf);
    let half = dft_size / 2;
    for (n, c) in buf.iter_mut().enumerate() {
        let re = c.re * scale;
        *c = Complex64::new(
            match n {
                0 => re,
                n if n < half => 2.0 * re,
                n if n == half => re,
                _ => 0.0,
            },
            0.0,
        );
    }
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = c.exp();
    }
    inv.process(&mut buf);
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_magnitude_gives_impulse() {
        let h = min_phase_fir(&vec![1.0; 33], 64).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12);
        assert!(h[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn wrong_length_or_negative_rejected() {
        assert!(min_phase_fir(&[1.0; 10], 64).is_err());
        let mut m = vec![1.0; 33];
        m[3] = -1.0;
        assert!(min_phase_fir(&m, 64).is_err());
        assert!(min_phase_fir(&vec![0.0; 33], 64).is_err());
    }
}
