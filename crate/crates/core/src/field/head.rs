//! Output heads: raw network outputs to dB magnitude spectra, and the reverse mapping of
//! gradients.

use std::f64::consts::PI;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use super::{FieldModel, FreqRangeTable, HeadSpec};
use crate::dsp::{
    peak_coeffs_with_jacobian, shelf_coeffs_with_jacobian, CascadeParams, PeakParams, ShelfKind, ShelfParams,
    DB_PER_NEPER, TARGET_MAGNITUDE_FLOOR,
};
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `min + (max - min) * sigmoid(x)` and its derivative in `x`.
#[inline]
fn squash(x: f64, [lo, hi]: [f64; 2]) -> (f64, f64) {
    let s = sigmoid(x);
    (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s))
}

/// Raw values per ear: low shelf `(fc, g)`, `K` peaks `(fc, fb, g)`, high shelf `(fc, g)`.
fn ear_len(peaks: usize) -> usize {
    3 * peaks + 4
}

/// Maps one raw output row of an IIR head to left and right cascade parameters.
///
/// Center and cut frequencies pass through a sigmoid scaled into their ranges, bandwidths
/// into the shared bandwidth range, and gains are taken as-is in dB.
pub fn head_to_params(raw: &[f64], ranges: &FreqRangeTable, peaks: usize) -> [CascadeParams; 2] {
    let ear = |e: usize| {
        let r = &raw[e * ear_len(peaks)..(e + 1) * ear_len(peaks)];
        CascadeParams {
            low_shelf: ShelfParams {
                kind: ShelfKind::Low,
                fc: squash(r[0], ranges.low_shelf).0,
                gain_db: r[1],
            },
            peaks: (0..peaks)
                .map(|k| PeakParams {
                    fc: squash(r[2 + 3 * k], ranges.peaks[k]).0,
                    fb: squash(r[3 + 3 * k], ranges.bandwidth).0,
                    gain_db: r[4 + 3 * k],
                })
                .collect(),
            high_shelf: ShelfParams {
                kind: ShelfKind::High,
                fc: squash(r[2 + 3 * peaks], ranges.high_shelf).0,
                gain_db: r[3 + 3 * peaks],
            },
        }
    };
    [ear(0), ear(1)]
}

/// DFT basis of an FIR head: `cos(2 pi m n / M)` and `sin(2 pi m n / M)` for taps `n` and
/// one-sided bins `m`.
#[derive(Clone, Debug)]
pub struct FirBasis {
    cos: Array2<f64>,
    sin: Array2<f64>,
}

impl FirBasis {
    pub fn new(taps: usize, dft_size: usize) -> Self {
        let bins = dft_size / 2 + 1;
        let angle = |n: usize, m: usize| 2.0 * PI * ((n * m) % dft_size) as f64 / dft_size as f64;
        Self {
            cos: Array2::from_shape_fn((taps, bins), |(n, m)| angle(n, m).cos()),
            sin: Array2::from_shape_fn((taps, bins), |(n, m)| angle(n, m).sin()),
        }
    }

    pub fn taps(&self) -> usize {
        self.cos.nrows()
    }

    /// Real and imaginary DFT parts for a batch of tap rows.
    fn spectrum(&self, taps: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let re = taps.dot(&self.cos);
        let im = -taps.dot(&self.sin);
        (re, im)
    }
}

const FIR_POWER_FLOOR: f64 = TARGET_MAGNITUDE_FLOOR * TARGET_MAGNITUDE_FLOOR;

impl FieldModel {
    fn iir_row_db(&self, raw: &[f64], peaks: usize) -> Result<Vec<f64>> {
        let ranges = self.ranges.as_ref().expect("IIR model has ranges");
        let fs = self.config.sample_rate;
        let bins = self.grid.bins();
        let mut out = vec![0.0; 2 * bins];
        for (e, cascade) in head_to_params(raw, ranges, peaks).iter().enumerate() {
            let db = &mut out[e * bins..(e + 1) * bins];
            for s in cascade.sections(fs).map_err(non_finite)? {
                self.grid.accumulate_db(&s, db);
            }
        }
        Ok(out)
    }

    fn iir_row_backward(&self, raw: &[f64], d_db: &[f64], peaks: usize) -> Result<Vec<f64>> {
        let ranges = self.ranges.as_ref().expect("IIR model has ranges");
        let fs = self.config.sample_rate;
        let bins = self.grid.bins();
        let n = ear_len(peaks);
        let mut out = vec![0.0; 2 * n];
        for e in 0..2 {
            let r = &raw[e * n..(e + 1) * n];
            let up = &d_db[e * bins..(e + 1) * bins];
            let g = &mut out[e * n..(e + 1) * n];

            let shelf = |kind, x_fc: f64, gain: f64, range| -> Result<(f64, f64)> {
                let (fc, dfc) = squash(x_fc, range);
                let (sec, jac) = shelf_coeffs_with_jacobian(
                    &ShelfParams {
                        kind,
                        fc,
                        gain_db: gain,
                    },
                    fs,
                )
                .map_err(non_finite)?;
                let gc = self.grid.coefficient_gradient(&sec, up);
                let (mut d_fc, mut d_g) = (0.0, 0.0);
                for c in 0..5 {
                    d_fc += gc[c] * jac[c][0];
                    d_g += gc[c] * jac[c][1];
                }
                Ok((d_fc * dfc, d_g))
            };
            (g[0], g[1]) = shelf(ShelfKind::Low, r[0], r[1], ranges.low_shelf)?;
            let hs = 2 + 3 * peaks;
            (g[hs], g[hs + 1]) = shelf(ShelfKind::High, r[hs], r[hs + 1], ranges.high_shelf)?;

            for k in 0..peaks {
                let o = 2 + 3 * k;
                let (fc, dfc) = squash(r[o], ranges.peaks[k]);
                let (fb, dfb) = squash(r[o + 1], ranges.bandwidth);
                let (sec, jac) = peak_coeffs_with_jacobian(
                    &PeakParams {
                        fc,
                        fb,
                        gain_db: r[o + 2],
                    },
                    fs,
                )
                .map_err(non_finite)?;
                let gc = self.grid.coefficient_gradient(&sec, up);
                let mut d = [0.0; 3];
                for c in 0..5 {
                    for v in 0..3 {
                        d[v] += gc[c] * jac[c][v];
                    }
                }
                g[o] = d[0] * dfc;
                g[o + 1] = d[1] * dfb;
                g[o + 2] = d[2];
            }
        }
        Ok(out)
    }

    /// dB spectra from raw head outputs.
    pub fn head_db(&self, raw: &Array2<f64>) -> Result<Array2<f64>> {
        let bins = self.grid.bins();
        match self.config.head {
            HeadSpec::Magnitude => Ok(raw.clone()),
            HeadSpec::Iir { peaks } => {
                let rows: Vec<Vec<f64>> = (0..raw.nrows())
                    .into_par_iter()
                    .map(|i| self.iir_row_db(raw.row(i).as_slice().expect("contiguous"), peaks))
                    .collect::<Result<_>>()?;
                Ok(stack(rows, 2 * bins))
            }
            HeadSpec::Fir { taps } => {
                let basis = self.fir_basis().expect("FIR model has basis");
                let mut out = Array2::zeros((raw.nrows(), 2 * bins));
                for e in 0..2 {
                    let (re, im) = basis.spectrum(raw.slice(s![.., e * taps..(e + 1) * taps]));
                    let db = ndarray::Zip::from(&re)
                        .and(&im)
                        .map_collect(|r, i| 0.5 * DB_PER_NEPER * (r * r + i * i + FIR_POWER_FLOOR).ln());
                    out.slice_mut(s![.., e * bins..(e + 1) * bins]).assign(&db);
                }
                Ok(out)
            }
        }
    }

    /// Maps `dL/d(dB spectra)` back to `dL/d(raw head outputs)`.
    pub fn head_backward(&self, raw: &Array2<f64>, d_db: &Array2<f64>) -> Result<Array2<f64>> {
        let bins = self.grid.bins();
        match self.config.head {
            HeadSpec::Magnitude => Ok(d_db.clone()),
            HeadSpec::Iir { peaks } => {
                let rows: Vec<Vec<f64>> = (0..raw.nrows())
                    .into_par_iter()
                    .map(|i| {
                        self.iir_row_backward(
                            raw.row(i).as_slice().expect("contiguous"),
                            d_db.row(i).as_slice().expect("contiguous"),
                            peaks,
                        )
                    })
                    .collect::<Result<_>>()?;
                Ok(stack(rows, raw.ncols()))
            }
            HeadSpec::Fir { taps } => {
                let basis = self.fir_basis().expect("FIR model has basis");
                let mut out = Array2::zeros(raw.dim());
                for e in 0..2 {
                    let (re, im) = basis.spectrum(raw.slice(s![.., e * taps..(e + 1) * taps]));
                    let up = d_db.slice(s![.., e * bins..(e + 1) * bins]);
                    let mut wre = Array2::zeros(re.dim());
                    let mut wim = Array2::zeros(re.dim());
                    ndarray::Zip::from(&mut wre)
                        .and(&mut wim)
                        .and(&re)
                        .and(&im)
                        .and(&up)
                        .for_each(|a, b, &r, &i, &u| {
                            let k = DB_PER_NEPER * u / (r * r + i * i + FIR_POWER_FLOOR);
                            *a = k * r;
                            *b = -k * i;
                        });
                    // d re / d h = cos, d im / d h = -sin
                    let g = wre.dot(&basis.cos.t()) + wim.dot(&basis.sin.t());
                    out.slice_mut(s![.., e * taps..(e + 1) * taps]).assign(&g);
                }
                Ok(out)
            }
        }
    }
}

fn stack(rows: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect()).expect("row widths")
}

fn non_finite(e: Error) -> Error {
    Error::NonFinite(format!("network produced invalid filter parameters ({e})"))
}
