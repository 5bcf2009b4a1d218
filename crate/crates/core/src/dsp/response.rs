use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{BiquadSection, CascadeParams};
use crate::error::{Error, Result};

/// `20 / ln(10)`: dB per neper of magnitude.
pub const DB_PER_NEPER: f64 = 20.0 / LN_10;

/// Floor applied to measured magnitudes before conversion to dB.
pub const TARGET_MAGNITUDE_FLOOR: f64 = 1e-8;

/// Number of one-sided bins `m = 0..=M/2` for a DFT of size `M`.
pub fn one_sided_bins(dft_size: usize) -> usize {
    dft_size / 2 + 1
}

fn check_dft_size(m: usize) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Domain(format!("DFT size {m} must be even and at least 2")));
    }
    Ok(())
}

/// Transfer function sampled at `z_m = exp(2 pi j m / M)`, `m = 0..M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledResponse {
    values: Vec<Complex64>,
}

impl SampledResponse {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|h| h.norm()).collect()
    }

    /// `20 log10 |H[m]|` for the one-sided bins `0..=M/2`.
    pub fn one_sided_db(&self) -> Vec<f64> {
        self.values[..one_sided_bins(self.values.len())]
            .iter()
            .map(|h| DB_PER_NEPER * h.norm().ln())
            .collect()
    }
}

/// Product of the section responses at all `M` bins.
pub fn sections_response(sections: &[BiquadSection], dft_size: usize) -> Result<SampledResponse> {
    check_dft_size(dft_size)?;
    let values = (0..dft_size)
        .map(|m| {
            let zinv = Complex64::from_polar(1.0, -2.0 * PI * m as f64 / dft_size as f64);
            sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
                let (n, d) = s.num_den(zinv);
                acc * n / d
            })
        })
        .collect();
    Ok(SampledResponse { values })
}

/// Frequency-sampled response of a full cascade.
pub fn cascade_response(c: &CascadeParams, fs: f64, dft_size: usize) -> Result<SampledResponse> {
    check_dft_size(dft_size)?;
    sections_response(&c.sections(fs)?, dft_size)
}

/// Precomputed `z_m^-1` on the one-sided bins of an `M`-point grid; evaluates section dB
/// responses and their coefficient gradients.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    dft_size: usize,
    zinv: Vec<Complex64>,
}

impl FrequencyGrid {
    pub fn new(dft_size: usize) -> Result<Self> {
        check_dft_size(dft_size)?;
        let zinv = (0..one_sided_bins(dft_size))
            .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 / dft_size as f64))
            .collect();
        Ok(Self { dft_size, zinv })
    }

    pub fn dft_size(&self) -> usize {
        self.dft_size
    }

    pub fn bins(&self) -> usize {
        self.zinv.len()
    }

    /// Adds `20 log10 |H(z_m)|` of `section` into `db`.
    pub fn accumulate_db(&self, section: &BiquadSection, db: &mut [f64]) {
        for (out, &zinv) in db.iter_mut().zip(&self.zinv) {
            let (n, d) = section.num_den(zinv);
            *out += DB_PER_NEPER * 0.5 * (n.norm_sqr().ln() - d.norm_sqr().ln());
        }
    }

    /// Gradient of `sum_m upstream[m] * 20 log10 |H(z_m)|` with respect to
    /// `[b0, b1, b2, a1, a2]`.
    ///
    /// Uses `d ln|N| / d b_n = Re(z^-n / N)` and `d ln|D| / d a_n = Re(z^-n / D)`.
    pub fn coefficient_gradient(&self, section: &BiquadSection, upstream: &[f64]) -> [f64; 5] {
        let mut g = [0.0; 5];
        for (&u, &zinv) in upstream.iter().zip(&self.zinv) {
            if u == 0.0 {
                continue;
            }
            let (n, d) = section.num_den(zinv);
            let ninv = n.inv();
            let dinv = d.inv();
            let zinv2 = zinv * zinv;
            let s = DB_PER_NEPER * u;
            g[0] += s * ninv.re;
            g[1] += s * (zinv * ninv).re;
            g[2] += s * (zinv2 * ninv).re;
            g[3] -= s * (zinv * dinv).re;
            g[4] -= s * (zinv2 * dinv).re;
        }
        g
    }
}

/// One-sided dB magnitude of the `M`-point DFT of an impulse response, floored at
/// [`TARGET_MAGNITUDE_FLOOR`]. Responses longer than `M` are truncated.
pub fn ir_magnitude_db(ir: &[f32], dft_size: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..dft_size)
        .map(|n| Complex64::new(ir.get(n).copied().unwrap_or(0.0) as f64, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(dft_size).process(&mut buf);
    buf[..one_sided_bins(dft_size)]
        .iter()
        .map(|h| DB_PER_NEPER * h.norm().max(TARGET_MAGNITUDE_FLOOR).ln())
        .collect()
}
