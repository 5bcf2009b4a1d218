use crate::error::{Error, Result};

/// Default LSD band in Hz.
pub const LSD_BAND: [f64; 2] = [20.0, 20_000.0];

/// Which one-sided bins lie in `band`: bin `m` is included iff `lo <= m fs / M <= hi`.
pub fn band_mask(band: [f64; 2], fs: f64, dft_size: usize) -> Result<Vec<bool>> {
    let [lo, hi] = band;
    if !(lo <= hi && lo >= 0.0 && hi <= fs / 2.0) {
        return Err(Error::Config(format!(
            "LSD band [{lo}, {hi}] Hz must lie within [0, {}]",
            fs / 2.0
        )));
    }
    let mask: Vec<bool> = (0..=dft_size / 2)
        .map(|m| {
            let f = m as f64 * fs / dft_size as f64;
            lo <= f && f <= hi
        })
        .collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::Config(format!("no DFT bin lies in [{lo}, {hi}] Hz")));
    }
    Ok(mask)
}

/// Log-spectral distortion in dB between two dB spectra.
///
/// Inputs hold one or more ears of `M/2 + 1` one-sided bins each, concatenated. The result
/// is the root mean square difference over the in-band bins of all ears.
pub fn lsd(estimate: &[f64], target: &[f64], band: [f64; 2], fs: f64, dft_size: usize) -> Result<f64> {
    let mask = band_mask(band, fs, dft_size)?;
    lsd_masked(estimate, target, &mask)
}

pub(crate) fn lsd_masked(estimate: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    if estimate.len() != target.len() || !estimate.len().is_multiple_of(mask.len()) || estimate.is_empty() {
        return Err(Error::Shape(format!(
            "LSD inputs of length {} and {} do not match {} bins per ear",
            estimate.len(),
            target.len(),
            mask.len()
        )));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, (e, t)) in estimate.iter().zip(target).enumerate() {
        if mask[i % mask.len()] {
            sum += (e - t) * (e - t);
            n += 1;
        }
    }
    let v = (sum / n as f64).sqrt();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("LSD is not finite".into()))
    }
}
