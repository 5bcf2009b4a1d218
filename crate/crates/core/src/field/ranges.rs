//! Frequency ranges constraining each peaking filter's center frequency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum prominence (dB) of a spectral peak or notch to count as an extremum.
pub const EXTREMUM_PROMINENCE_DB: f64 = 1.0;

/// Fixed ranges that do not depend on the training data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeConfig {
    pub low_shelf: [f64; 2],
    pub high_shelf: [f64; 2],
    pub bandwidth: [f64; 2],
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self {
            low_shelf: [20.0, 1_000.0],
            high_shelf: [4_000.0, 20_000.0],
            bandwidth: [50.0, 4_000.0],
        }
    }
}

/// Per-section `[min, max]` frequency ranges in Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqRangeTable {
    /// Center-frequency range of each peaking filter, sorted by center.
    pub peaks: Vec<[f64; 2]>,
    /// Bandwidth range shared by all peaking filters.
    pub bandwidth: [f64; 2],
    pub low_shelf: [f64; 2],
    pub high_shelf: [f64; 2],
}

impl FreqRangeTable {
    /// Checks `0 < min < max < fs/2` for every range.
    pub fn validate(&self, fs: f64) -> Result<()> {
        let named = [
            ("bandwidth".to_string(), self.bandwidth),
            ("low shelf".to_string(), self.low_shelf),
            ("high shelf".to_string(), self.high_shelf),
        ];
        let peaks = self
            .peaks
            .iter()
            .enumerate()
            .map(|(k, r)| (format!("peak {k}"), *r));
        for (name, [lo, hi]) in named.into_iter().chain(peaks) {
            if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
                return Err(Error::Config(format!(
                    "{name} range [{lo}, {hi}] Hz must satisfy 0 < min < max < {}",
                    fs / 2.0
                )));
            }
        }
        Ok(())
    }

    /// Log-spaced ranges over `[20 Hz, min(20 kHz, 0.45 fs)]` with 50% overlap.
    pub fn log_spaced(k: usize, fs: f64, fixed: &RangeConfig) -> Self {
        let lo = 20f64.ln();
        let hi = 20_000f64.min(0.45 * fs).ln();
        let edge = |j: usize| (lo + (hi - lo) * j as f64 / (k + 1) as f64).exp();
        Self {
            peaks: (0..k).map(|i| [edge(i), edge(i + 2)]).collect(),
            bandwidth: fixed.bandwidth,
            low_shelf: fixed.low_shelf,
            high_shelf: fixed.high_shelf,
        }
    }
}

/// Indices of strict local maxima of `x` whose prominence is at least `min_prominence`.
///
/// Prominence follows the usual definition: the peak height minus the higher of the two
/// minima found walking outwards until a strictly higher sample or the signal edge.
fn prominent_maxima(x: &[f64], min_prominence: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if !(x[i] > x[i - 1] && x[i] > x[i + 1]) {
            continue;
        }
        let mut left_min = x[i];
        for j in (0..i).rev() {
            if x[j] > x[i] {
                break;
            }
            left_min = left_min.min(x[j]);
        }
        let mut right_min = x[i];
        for &v in &x[i + 1..] {
            if v > x[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        if x[i] - left_min.max(right_min) >= min_prominence {
            out.push(i);
        }
    }
    out
}

/// Frequencies (Hz) of the prominent peaks and notches of one one-sided dB spectrum.
pub fn spectral_extrema(db: &[f64], fs: f64, dft_size: usize) -> Vec<f64> {
    let neg: Vec<f64> = db.iter().map(|v| -v).collect();
    let hz = fs / dft_size as f64;
    prominent_maxima(db, EXTREMUM_PROMINENCE_DB)
        .into_iter()
        .chain(prominent_maxima(&neg, EXTREMUM_PROMINENCE_DB))
        .map(|m| m as f64 * hz)
        .collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Builds the peak ranges from the extrema of the training spectra.
///
/// All extrema frequencies are pooled and sorted; range `k` spans the quantiles
/// `k/(K+1)` to `(k+2)/(K+1)`, so neighbors overlap by half a range in quantile space and
/// together they cover every extremum. With fewer than `K + 1` extrema the table falls back
/// to [`FreqRangeTable::log_spaced`]. A range whose quantiles coincide is widened to one
/// DFT bin around that frequency.
pub fn build_freq_ranges<'a>(
    spectra_db: impl IntoIterator<Item = &'a [f64]>,
    k: usize,
    fs: f64,
    dft_size: usize,
    fixed: &RangeConfig,
) -> Result<FreqRangeTable> {
    if k == 0 {
        return Err(Error::Config("at least one peaking filter is required".into()));
    }
    let mut extrema = Vec::new();
    let mut n_spectra = 0;
    for db in spectra_db {
        n_spectra += 1;
        extrema.extend(spectral_extrema(db, fs, dft_size));
    }
    if n_spectra == 0 {
        return Err(Error::Config("no training spectra to derive ranges from".into()));
    }
    let table = if extrema.len() < k + 1 {
        FreqRangeTable::log_spaced(k, fs, fixed)
    } else {
        extrema.sort_by(f64::total_cmp);
        let bin = fs / dft_size as f64;
        let peaks = (0..k)
            .map(|i| {
                let lo = quantile(&extrema, i as f64 / (k + 1) as f64);
                let hi = quantile(&extrema, (i + 2) as f64 / (k + 1) as f64);
                if hi > lo {
                    [lo, hi]
                } else {
                    [
                        (lo - bin / 2.0).max(bin / 4.0),
                        (lo + bin / 2.0).min(fs / 2.0 - bin / 4.0),
                    ]
                }
            })
            .collect();
        FreqRangeTable {
            peaks,
            bandwidth: fixed.bandwidth,
            low_shelf: fixed.low_shelf,
            high_shelf: fixed.high_shelf,
        }
    };
    table.validate(fs)?;
    Ok(table)
}
