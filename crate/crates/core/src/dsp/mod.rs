//! Parametric shelf/peaking sections, frequency-sampled cascade evaluation, time-domain
//! filtering and minimum-phase reconstruction.

mod coeffs;
mod minphase;
mod response;
mod time;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use coeffs::{
    peak_coeffs, peak_coeffs_with_jacobian, shelf_coeffs, shelf_coeffs_with_jacobian, PeakJacobian,
    ShelfJacobian,
};
pub use minphase::{min_phase_fir, MAGNITUDE_FLOOR};
pub use response::{
    cascade_response, ir_magnitude_db, one_sided_bins, sections_response, FrequencyGrid, SampledResponse,
    DB_PER_NEPER, TARGET_MAGNITUDE_FLOOR,
};
pub use time::{align_by_xcorr, apply_cascade_time, filter_sections};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShelfKind {
    Low,
    High,
}

/// First-order shelf: cut frequency `fc` (Hz) and gain (dB).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShelfParams {
    pub kind: ShelfKind,
    pub fc: f64,
    pub gain_db: f64,
}

/// Second-order peaking filter: center `fc` (Hz), bandwidth `fb` (Hz), gain (dB).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub fc: f64,
    pub fb: f64,
    pub gain_db: f64,
}

/// One cascade stage `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
///
/// First-order sections keep `b2 = a2 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiquadSection {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadSection {
    pub const IDENTITY: Self = Self {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    pub fn coefficients(&self) -> [f64; 5] {
        [self.b0, self.b1, self.b2, self.a1, self.a2]
    }

    /// Numerator and denominator evaluated at `z^-1 = zinv`.
    #[inline]
    pub fn num_den(&self, zinv: Complex64) -> (Complex64, Complex64) {
        let zinv2 = zinv * zinv;
        let num = self.b0 + zinv * self.b1 + zinv2 * self.b2;
        let den = 1.0 + zinv * self.a1 + zinv2 * self.a2;
        (num, den)
    }

    /// Transfer function at the point `z` of the complex plane.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let (n, d) = self.num_den(z.inv());
        n / d
    }

    /// Largest pole modulus.
    pub fn max_pole_radius(&self) -> f64 {
        // z^2 + a1 z + a2 = 0
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((-self.a1 + s) / 2.0).abs().max(((-self.a1 - s) / 2.0).abs())
        } else {
            self.a2.abs().sqrt()
        }
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }
}

/// Parameters of one ear's cascade: low shelf, `K` peaking filters, high shelf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub low_shelf: ShelfParams,
    pub peaks: Vec<PeakParams>,
    pub high_shelf: ShelfParams,
}

impl CascadeParams {
    /// Sections in cascade order (low shelf, peaks, high shelf).
    pub fn sections(&self, fs: f64) -> Result<Vec<BiquadSection>> {
        let mut out = Vec::with_capacity(self.peaks.len() + 2);
        out.push(shelf_coeffs(&self.low_shelf, fs)?);
        for p in &self.peaks {
            out.push(peak_coeffs(p, fs)?);
        }
        out.push(shelf_coeffs(&self.high_shelf, fs)?);
        Ok(out)
    }

    pub fn num_sections(&self) -> usize {
        self.peaks.len() + 2
    }
}
