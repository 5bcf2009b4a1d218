use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Direction;

/// Random Fourier feature encoding of a direction.
///
/// With `d = (azimuth - pi, elevation)` and projection rows `p_c`, the feature vector is
/// `[cos(p_0 . d), sin(p_0 . d), ..., cos(p_{C-1} . d), sin(p_{C-1} . d)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffEncoder {
    projection: Array2<f64>,
}

impl RffEncoder {
    /// Draws a `C x 2` projection from an isotropic Gaussian with standard deviation `scale`.
    pub fn sample<R: Rng>(channels: usize, scale: f64, rng: &mut R) -> Self {
        let projection =
            Array2::from_shape_simple_fn((channels, 2), || scale * rng.sample::<f64, _>(StandardNormal));
        Self { projection }
    }

    pub fn from_projection(projection: Array2<f64>) -> Self {
        assert_eq!(projection.ncols(), 2);
        Self { projection }
    }

    pub fn projection(&self) -> ArrayView2<'_, f64> {
        self.projection.view()
    }

    pub fn channels(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.channels()
    }

    pub fn encode(&self, dir: &Direction) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.encode_into(dir, &mut out);
        out
    }

    pub fn encode_into(&self, dir: &Direction, out: &mut [f64]) {
        let d0 = dir.azimuth() - std::f64::consts::PI;
        let d1 = dir.elevation();
        for (c, p) in self.projection.outer_iter().enumerate() {
            let (s, co) = (p[0] * d0 + p[1] * d1).sin_cos();
            out[2 * c] = co;
            out[2 * c + 1] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn front_back_origin_encodes_to_ones_and_zeros() {
        let enc = RffEncoder::sample(16, 3.0, &mut ChaCha8Rng::seed_from_u64(1));
        let e = enc.encode(&Direction::new(std::f64::consts::PI, 0.0).unwrap());
        for c in 0..16 {
            assert_eq!(e[2 * c], 1.0);
            assert_eq!(e[2 * c + 1], 0.0);
        }
    }

    #[test]
    fn channels_lie_on_unit_circle() {
        let enc = RffEncoder::sample(32, 5.0, &mut ChaCha8Rng::seed_from_u64(2));
        let e = enc.encode(&Direction::new(1.1, -0.4).unwrap());
        for c in 0..32 {
            assert!((e[2 * c].powi(2) + e[2 * c + 1].powi(2) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_scalar_evaluation() {
        let proj = ndarray::array![[0.5, -1.25], [2.0, 0.75], [-0.3, 0.0]];
        let enc = RffEncoder::from_projection(proj.clone());
        let (az, el) = (std::f64::consts::FRAC_PI_2, 0.3);
        let e = enc.encode(&Direction::new(az, el).unwrap());
        let d = [az - std::f64::consts::PI, el];
        for c in 0..3 {
            let arg = proj[[c, 0]] * d[0] + proj[[c, 1]] * d[1];
            assert_eq!(e[2 * c], arg.cos());
            assert_eq!(e[2 * c + 1], arg.sin());
        }
    }

    #[test]
    fn azimuth_wrap_gives_identical_features() {
        let enc = RffEncoder::sample(8, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let a = enc.encode(&Direction::new(0.7, 0.2).unwrap());
        let b = enc.encode(&Direction::new(0.7 - std::f64::consts::TAU, 0.2).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
