//! Smooth synthetic HRTF sets for tests, demos and benchmarks.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{Direction, HrtfMeasurement, HrtfSet};
use crate::dsp::{apply_cascade_time, CascadeParams, PeakParams, ShelfKind, ShelfParams};

/// `n` directions spread over the sphere on a Fibonacci lattice.
pub fn fibonacci_directions(n: usize) -> Vec<Direction> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let el = (1.0 - 2.0 * (i as f64 + 0.5) / n as f64).asin();
            Direction::new(golden * i as f64, el).expect("lattice point in domain")
        })
        .collect()
}

/// Cascade of the synthetic subject at one direction and ear (0 left, 1 right).
pub fn synthetic_cascade(dir: &Direction, ear: usize, shift: f64) -> CascadeParams {
    let side = if ear == 0 { 1.0 } else { -1.0 };
    let (az, el) = (dir.azimuth(), dir.elevation());
    let lateral = side * az.sin() * el.cos();
    CascadeParams {
        low_shelf: ShelfParams {
            kind: ShelfKind::Low,
            fc: 300.0,
            gain_db: 2.0 * lateral + shift,
        },
        peaks: vec![
            PeakParams {
                fc: 3_000.0 * (1.0 + 0.2 * el.sin()),
                fb: 1_200.0,
                gain_db: 6.0 + 3.0 * lateral,
            },
            PeakParams {
                fc: 7_000.0 + 1_500.0 * (el / FRAC_PI_2),
                fb: 1_500.0,
                gain_db: -9.0 * (1.0 + 0.3 * az.cos()) - shift,
            },
            PeakParams {
                fc: 11_000.0,
                fb: 2_500.0,
                gain_db: 4.0 * el.cos() * az.cos(),
            },
        ],
        high_shelf: ShelfParams {
            kind: ShelfKind::High,
            fc: 14_000.0,
            gain_db: -3.0 + 2.0 * lateral,
        },
    }
}

/// A subject whose IRs are the impulse responses of [`synthetic_cascade`] on a Fibonacci
/// lattice. `shift` moves some gains to make subjects differ.
pub fn synthetic_set(subject: &str, n_dirs: usize, fs: f64, ir_len: usize, shift: f64) -> HrtfSet {
    let mut impulse = vec![0.0; ir_len];
    impulse[0] = 1.0;
    let measurements = fibonacci_directions(n_dirs)
        .into_iter()
        .map(|d| {
            let ir = |ear| -> Vec<f32> {
                apply_cascade_time(&synthetic_cascade(&d, ear, shift), fs, &impulse)
                    .expect("synthetic parameters are valid")
                    .into_iter()
                    .map(|v| v as f32)
                    .collect()
            };
            HrtfMeasurement {
                direction: d,
                left: ir(0),
                right: ir(1),
            }
        })
        .collect();
    HrtfSet::new(subject, fs, measurements)
        .expect("lattice directions are distinct")
        .with_provenance("synthetic")
}
