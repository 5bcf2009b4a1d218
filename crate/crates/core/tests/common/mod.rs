//! Reference implementations shared by the integration tests. Written directly from the
//! coefficient tables, without going through the library's DSP code.
#![allow(dead_code)]

use std::path::Path;

use niirf::dataset::{synthetic::synthetic_set, write_container_file, HrtfSet};
use num_complex::Complex64;

pub const FS: f64 = 44_100.0;

/// `(b, a)` of a first-order shelf, padded to second order.
pub fn shelf_reference(high: bool, fc: f64, g: f64, fs: f64) -> ([f64; 3], [f64; 3]) {
    let rho = 10f64.powf(g / 20.0);
    let eta = (rho - 1.0) / 2.0;
    let t = (std::f64::consts::PI * fc / fs).tan();
    let alpha = match (high, g >= 0.0) {
        (_, true) => (t - 1.0) / (t + 1.0),
        (false, false) => (t - rho) / (t + rho),
        (true, false) => (rho * t - 1.0) / (rho * t + 1.0),
    };
    let (b0, b1) = if high {
        (1.0 + eta * (1.0 - alpha), alpha + eta * (alpha - 1.0))
    } else {
        (1.0 + eta * (1.0 + alpha), alpha + eta * (alpha + 1.0))
    };
    ([b0, b1, 0.0], [1.0, alpha, 0.0])
}

pub fn peak_reference(fc: f64, fb: f64, g: f64, fs: f64) -> ([f64; 3], [f64; 3]) {
    let rho = 10f64.powf(g / 20.0);
    let eta = (rho - 1.0) / 2.0;
    let t = (std::f64::consts::PI * fb / fs).tan();
    let beta = if g >= 0.0 {
        (t - 1.0) / (t + 1.0)
    } else {
        (t - rho) / (t + rho)
    };
    let gamma = -(2.0 * std::f64::consts::PI * fc / fs).cos();
    (
        [
            1.0 + eta * (1.0 + beta),
            gamma * (1.0 - beta),
            -beta - eta * (1.0 + beta),
        ],
        [1.0, gamma * (1.0 - beta), -beta],
    )
}

/// `H(z)` of one section at `z = exp(j w)`.
pub fn section_at(b: &[f64; 3], a: &[f64; 3], w: f64) -> Complex64 {
    let zi = Complex64::from_polar(1.0, -w);
    let zi2 = zi * zi;
    (b[0] + zi * b[1] + zi2 * b[2]) / (a[0] + zi * a[1] + zi2 * a[2])
}

/// dB magnitude of a cascade at `w`.
pub fn cascade_db(sections: &[([f64; 3], [f64; 3])], w: f64) -> f64 {
    let h: Complex64 = sections.iter().map(|(b, a)| section_at(b, a, w)).product();
    20.0 * h.norm().log10()
}

pub fn bin_omega(m: usize, dft_size: usize) -> f64 {
    2.0 * std::f64::consts::PI * m as f64 / dft_size as f64
}

/// Synthetic subjects `S1..=Sn` on a shared direction lattice.
pub fn synthetic_subjects(n: usize, n_dirs: usize, ir_len: usize) -> Vec<HrtfSet> {
    (1..=n)
        .map(|i| synthetic_set(&format!("S{i}"), n_dirs, FS, ir_len, 0.3 * i as f64))
        .collect()
}

pub fn write_synthetic(path: &Path, n: usize, n_dirs: usize, ir_len: usize) {
    let sets = synthetic_subjects(n, n_dirs, ir_len);
    write_container_file(path, &sets).unwrap();
}
