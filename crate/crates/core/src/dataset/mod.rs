//! HRTF measurement sets, the on-disk container, and train/validation/evaluation splits.

mod container;
mod split;
pub mod synthetic;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use container::{load_container, read_container, write_container, write_container_file, CONTAINER_MAGIC};
pub use split::{
    make_splits, subsample_train, MultiSubjectPreset, MultiSubjectSplits, SplitMix64, SplitSpec, Splits,
};

/// Angular tolerance (radians) under which two directions are considered equal.
pub const DIRECTION_TOLERANCE: f64 = 1e-9;

/// A sound-source direction.
///
/// Azimuth lies in `[0, 2π)` with 0 in front of the listener, elevation in `[-π/2, π/2]`
/// with 0 on the horizontal plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping the azimuth into `[0, 2π)`.
    ///
    /// An elevation outside `[-π/2, π/2]` or a non-finite angle is rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::Direction(format!(
                "non-finite angles ({azimuth}, {elevation})"
            )));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::Direction(format!(
                "elevation {elevation} rad outside [-pi/2, pi/2]"
            )));
        }
        let mut azimuth = azimuth.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if azimuth >= TAU {
            azimuth = 0.0;
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Result<Self> {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// Cartesian unit vector: x to the front, y to the left, z up.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [ce * ca, ce * sa, se]
    }

    /// Great-circle angle to `other` in radians.
    pub fn great_circle_distance(&self, other: &Direction) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        cn.atan2(dot)
    }

    /// True if both angles agree within [`DIRECTION_TOLERANCE`], azimuth compared circularly.
    pub fn coincides(&self, other: &Direction) -> bool {
        let mut da = (self.azimuth - other.azimuth).abs();
        if da > PI {
            da = TAU - da;
        }
        da <= DIRECTION_TOLERANCE && (self.elevation - other.elevation).abs() <= DIRECTION_TOLERANCE
    }
}

/// One measured left/right head-related impulse response pair.
#[derive(Clone, Debug, PartialEq)]
pub struct HrtfMeasurement {
    pub direction: Direction,
    pub left: Vec<f32>,
    pub right: Vec<f32>,
}

impl HrtfMeasurement {
    pub fn ir_len(&self) -> usize {
        self.left.len()
    }
}

/// All measurements of one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct HrtfSet {
    subject_id: String,
    sample_rate: f64,
    measurements: Vec<HrtfMeasurement>,
    provenance: Option<String>,
}

impl HrtfSet {
    /// Validates and builds a set: equal non-empty IR lengths, positive sample rate and no
    /// duplicated direction.
    pub fn new(
        subject_id: impl Into<String>,
        sample_rate: f64,
        measurements: Vec<HrtfMeasurement>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Format(format!(
                "subject {subject_id}: sample rate {sample_rate} must be positive"
            )));
        }
        let ir_len = measurements.first().map(|m| m.left.len());
        for (index, m) in measurements.iter().enumerate() {
            let bad = |reason: String| Error::Measurement {
                subject: subject_id.clone(),
                index,
                reason,
            };
            if m.left.is_empty() || m.left.len() != m.right.len() {
                return Err(bad(format!(
                    "IR length mismatch (left {}, right {})",
                    m.left.len(),
                    m.right.len()
                )));
            }
            if Some(m.left.len()) != ir_len {
                return Err(bad(format!(
                    "IR length {} differs from first measurement ({})",
                    m.left.len(),
                    ir_len.unwrap_or(0)
                )));
            }
        }
        for i in 0..measurements.len() {
            for j in 0..i {
                if measurements[i].direction.coincides(&measurements[j].direction) {
                    return Err(Error::Measurement {
                        subject: subject_id,
                        index: i,
                        reason: format!("duplicate direction of measurement {j}"),
                    });
                }
            }
        }
        Ok(Self {
            subject_id,
            sample_rate,
            measurements,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn measurements(&self) -> &[HrtfMeasurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn ir_len(&self) -> usize {
        self.measurements.first().map_or(0, |m| m.ir_len())
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.measurements.iter().map(|m| m.direction).collect()
    }

    /// One-sided dB magnitude spectra (`dft_size/2 + 1` bins per ear) of the selected
    /// measurements, left bins followed by right bins in each row.
    pub fn target_db(&self, indices: &[usize], dft_size: usize) -> ndarray::Array2<f64> {
        let bins = dft_size / 2 + 1;
        let mut out = ndarray::Array2::zeros((indices.len(), 2 * bins));
        for (row, &i) in indices.iter().enumerate() {
            let m = &self.measurements[i];
            let l = crate::dsp::ir_magnitude_db(&m.left, dft_size);
            let r = crate::dsp::ir_magnitude_db(&m.right, dft_size);
            let mut dst = out.row_mut(row);
            for k in 0..bins {
                dst[k] = l[k];
                dst[bins + k] = r[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meas(az: f64, el: f64, n: usize) -> HrtfMeasurement {
        HrtfMeasurement {
            direction: Direction::new(az, el).unwrap(),
            left: vec![0.5; n],
            right: vec![0.25; n],
        }
    }

    #[test]
    fn azimuth_wraps() {
        let d = Direction::new(-FRAC_PI_2, 0.0).unwrap();
        assert!((d.azimuth() - 1.5 * PI).abs() < 1e-15);
        let d = Direction::new(TAU + 0.25, 0.1).unwrap();
        assert!((d.azimuth() - 0.25).abs() < 1e-12);
        let d = Direction::new(-1e-18, 0.0).unwrap();
        assert!(d.azimuth() < TAU);
    }

    #[test]
    fn elevation_out_of_range_is_error() {
        assert!(Direction::new(0.0, 1.6).is_err());
        assert!(Direction::new(0.0, -1.6).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
        assert!(Direction::new(0.0, FRAC_PI_2).is_ok());
    }

    #[test]
    fn great_circle_distance_of_orthogonal_directions() {
        let a = Direction::new(0.0, 0.0).unwrap();
        let b = Direction::new(FRAC_PI_2, 0.0).unwrap();
        let c = Direction::new(0.3, FRAC_PI_2).unwrap();
        assert!((a.great_circle_distance(&b) - FRAC_PI_2).abs() < 1e-15);
        assert!((a.great_circle_distance(&c) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(a.great_circle_distance(&a), 0.0);
    }

    #[test]
    fn duplicate_directions_rejected() {
        let err = HrtfSet::new("s1", 44100.0, vec![meas(0.1, 0.0, 8), meas(0.1 + TAU, 0.0, 8)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s1") && msg.contains("measurement 1"), "{msg}");
    }

    #[test]
    fn ir_length_mismatch_rejected() {
        let mut bad = meas(0.2, 0.0, 8);
        bad.right.pop();
        let err = HrtfSet::new("s2", 44100.0, vec![meas(0.1, 0.0, 8), bad]).unwrap_err();
        assert!(matches!(err, Error::Measurement { index: 1, .. }));
        let err = HrtfSet::new("s2", 44100.0, vec![meas(0.1, 0.0, 8), meas(0.2, 0.0, 9)]);
        assert!(err.is_err());
        assert!(HrtfSet::new("s3", 0.0, vec![]).is_err());
    }
}
