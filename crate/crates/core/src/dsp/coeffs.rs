use std::f64::consts::{LN_10, PI};

use super::{BiquadSection, PeakParams, ShelfKind, ShelfParams};
use crate::error::{Error, Result};

/// Partial derivatives of `[b0, b1, b2, a1, a2]` with respect to `(fc, g)`.
pub type ShelfJacobian = [[f64; 2]; 5];
/// Partial derivatives of `[b0, b1, b2, a1, a2]` with respect to `(fc, fb, g)`.
pub type PeakJacobian = [[f64; 3]; 5];

fn check_frequency(name: &str, f: f64, fs: f64) -> Result<()> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Domain(format!("sample rate {fs} must be positive")));
    }
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(Error::Domain(format!(
            "{name} = {f} Hz outside (0, {}) Hz",
            fs / 2.0
        )));
    }
    Ok(())
}

fn check_gain(g: f64) -> Result<()> {
    if g.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("gain {g} dB is not finite")))
    }
}

/// `tan(pi f / fs)` and its derivative in `f`.
#[inline]
fn warped(f: f64, fs: f64) -> (f64, f64) {
    let t = (PI * f / fs).tan();
    (t, PI / fs * (1.0 + t * t))
}

/// Linear gain `rho = 10^(g/20)` and `d rho / d g`.
#[inline]
fn linear_gain(g: f64) -> (f64, f64) {
    let rho = 10f64.powf(g / 20.0);
    (rho, rho * LN_10 / 20.0)
}

/// Allpass coefficient `(t - 1)/(t + 1)` for boosts and `(t - rho)/(t + rho)` for cuts,
/// returned with its partials in `t` and `rho`.
#[inline]
fn allpass_coefficient(t: f64, rho: f64, boost: bool) -> (f64, f64, f64) {
    if boost {
        let s = t + 1.0;
        ((t - 1.0) / s, 2.0 / (s * s), 0.0)
    } else {
        let s = t + rho;
        ((t - rho) / s, 2.0 * rho / (s * s), -2.0 * t / (s * s))
    }
}

/// First-order low/high shelf section.
pub fn shelf_coeffs(p: &ShelfParams, fs: f64) -> Result<BiquadSection> {
    shelf_coeffs_with_jacobian(p, fs).map(|(s, _)| s)
}

/// Shelf section together with its Jacobian in `(fc, g)`.
///
/// At `g = 0` the boost branch is used; both branches agree there in value.
pub fn shelf_coeffs_with_jacobian(p: &ShelfParams, fs: f64) -> Result<(BiquadSection, ShelfJacobian)> {
    check_frequency("shelf cut frequency", p.fc, fs)?;
    check_gain(p.gain_db)?;
    let (t, dt_dfc) = warped(p.fc, fs);
    let (rho, drho_dg) = linear_gain(p.gain_db);
    let boost = p.gain_db >= 0.0;
    let (alpha, da_dt, da_drho) = match p.kind {
        ShelfKind::Low => allpass_coefficient(t, rho, boost),
        ShelfKind::High if boost => allpass_coefficient(t, rho, true),
        ShelfKind::High => {
            let u = rho * t;
            let s = u + 1.0;
            let d = 2.0 / (s * s);
            ((u - 1.0) / s, d * rho, d * t)
        }
    };
    let eta = (rho - 1.0) / 2.0;
    let deta = [0.0, drho_dg / 2.0];
    let dalpha = [da_dt * dt_dfc, da_drho * drho_dg];

    let mut jac = [[0.0; 2]; 5];
    let section = match p.kind {
        ShelfKind::Low => {
            for v in 0..2 {
                jac[0][v] = deta[v] * (1.0 + alpha) + eta * dalpha[v];
                jac[1][v] = dalpha[v] + deta[v] * (1.0 + alpha) + eta * dalpha[v];
                jac[3][v] = dalpha[v];
            }
            BiquadSection {
                b0: 1.0 + eta * (1.0 + alpha),
                b1: alpha + eta * (alpha + 1.0),
                b2: 0.0,
                a1: alpha,
                a2: 0.0,
            }
        }
        ShelfKind::High => {
            for v in 0..2 {
                jac[0][v] = deta[v] * (1.0 - alpha) - eta * dalpha[v];
                jac[1][v] = dalpha[v] + deta[v] * (alpha - 1.0) + eta * dalpha[v];
                jac[3][v] = dalpha[v];
            }
            BiquadSection {
                b0: 1.0 + eta * (1.0 - alpha),
                b1: alpha + eta * (alpha - 1.0),
                b2: 0.0,
                a1: alpha,
                a2: 0.0,
            }
        }
    };
    Ok((section, jac))
}

/// Second-order peaking section.
pub fn peak_coeffs(p: &PeakParams, fs: f64) -> Result<BiquadSection> {
    peak_coeffs_with_jacobian(p, fs).map(|(s, _)| s)
}

/// Peaking section together with its Jacobian in `(fc, fb, g)`.
pub fn peak_coeffs_with_jacobian(p: &PeakParams, fs: f64) -> Result<(BiquadSection, PeakJacobian)> {
    check_frequency("peak center frequency", p.fc, fs)?;
    check_frequency("peak bandwidth", p.fb, fs)?;
    check_gain(p.gain_db)?;
    let (t, dt_dfb) = warped(p.fb, fs);
    let (rho, drho_dg) = linear_gain(p.gain_db);
    let (beta, db_dt, db_drho) = allpass_coefficient(t, rho, p.gain_db >= 0.0);
    let w = 2.0 * PI * p.fc / fs;
    let gamma = -w.cos();
    let dgamma_dfc = w.sin() * 2.0 * PI / fs;
    let eta = (rho - 1.0) / 2.0;

    // variables: 0 = fc, 1 = fb, 2 = g
    let dbeta = [0.0, db_dt * dt_dfb, db_drho * drho_dg];
    let dgamma = [dgamma_dfc, 0.0, 0.0];
    let deta = [0.0, 0.0, drho_dg / 2.0];

    let mut jac = [[0.0; 3]; 5];
    for v in 0..3 {
        jac[0][v] = deta[v] * (1.0 + beta) + eta * dbeta[v];
        let d_feedback = dgamma[v] * (1.0 - beta) - gamma * dbeta[v];
        jac[1][v] = d_feedback;
        jac[2][v] = -dbeta[v] - deta[v] * (1.0 + beta) - eta * dbeta[v];
        jac[3][v] = d_feedback;
        jac[4][v] = -dbeta[v];
    }
    let section = BiquadSection {
        b0: 1.0 + eta * (1.0 + beta),
        b1: gamma * (1.0 - beta),
        b2: -beta - eta * (1.0 + beta),
        a1: gamma * (1.0 - beta),
        a2: -beta,
    };
    Ok((section, jac))
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;

    const FS: f64 = 44100.0;

    fn unit(f: f64) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * f / FS)
    }

    #[test]
    fn zero_gain_sections_are_identity() {
        for kind in [ShelfKind::Low, ShelfKind::High] {
            let s = shelf_coeffs(
                &ShelfParams {
                    kind,
                    fc: 700.0,
                    gain_db: 0.0,
                },
                FS,
            )
            .unwrap();
            assert_eq!(s.b0, 1.0);
            assert_eq!(s.b1, s.a1);
        }
        let s = peak_coeffs(
            &PeakParams {
                fc: 3000.0,
                fb: 400.0,
                gain_db: 0.0,
            },
            FS,
        )
        .unwrap();
        assert_eq!((s.b0, s.b1, s.b2), (1.0, s.a1, s.a2));
    }

    #[test]
    fn low_shelf_dc_gain() {
        // (b0 + b1) / (1 + a1) = 1 + 2 eta = rho
        let s = shelf_coeffs(
            &ShelfParams {
                kind: ShelfKind::Low,
                fc: 500.0,
                gain_db: 6.0,
            },
            FS,
        )
        .unwrap();
        let dc = (s.b0 + s.b1) / (1.0 + s.a1);
        assert!((dc - 10f64.powf(6.0 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn high_shelf_nyquist_gain() {
        let s = shelf_coeffs(
            &ShelfParams {
                kind: ShelfKind::High,
                fc: 8000.0,
                gain_db: -6.0,
            },
            FS,
        )
        .unwrap();
        let ny = (s.b0 - s.b1) / (1.0 - s.a1);
        assert!((ny - 10f64.powf(-6.0 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn peak_center_gain_both_branches() {
        for g in [6.0, -6.0] {
            let s = peak_coeffs(
                &PeakParams {
                    fc: 1000.0,
                    fb: 500.0,
                    gain_db: g,
                },
                FS,
            )
            .unwrap();
            let h = s.eval(unit(1000.0)).norm();
            assert!((h - 10f64.powf(g / 20.0)).abs() < 1e-9, "g={g}: {h}");
        }
    }

    #[test]
    fn out_of_range_frequencies_fail() {
        let bad = [0.0, -1.0, FS / 2.0, f64::NAN];
        for fc in bad {
            assert!(shelf_coeffs(
                &ShelfParams {
                    kind: ShelfKind::Low,
                    fc,
                    gain_db: 1.0
                },
                FS
            )
            .is_err());
            assert!(peak_coeffs(
                &PeakParams {
                    fc,
                    fb: 100.0,
                    gain_db: 1.0
                },
                FS
            )
            .is_err());
            assert!(peak_coeffs(
                &PeakParams {
                    fc: 1000.0,
                    fb: fc,
                    gain_db: 1.0
                },
                FS
            )
            .is_err());
        }
        assert!(peak_coeffs(
            &PeakParams {
                fc: 1000.0,
                fb: 100.0,
                gain_db: f64::INFINITY
            },
            FS
        )
        .is_err());
    }

    #[test]
    fn branch_continuity_at_zero_gain() {
        let t = 0.37;
        let (boost, _, _) = allpass_coefficient(t, 1.0, true);
        let (cut, _, _) = allpass_coefficient(t, 1.0, false);
        assert_eq!(boost, cut);
        let hs_cut = (1.0 * t - 1.0) / (1.0 * t + 1.0);
        assert_eq!(boost, hs_cut);
    }

    fn fd_check(f: impl Fn([f64; 3]) -> [f64; 5], x: [f64; 3], jac: &[[f64; 3]; 5], vars: usize) {
        for v in 0..vars {
            let h = 1e-6 * x[v].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[v] += h;
            xm[v] -= h;
            let (fp, fm) = (f(xp), f(xm));
            for c in 0..5 {
                let fd = (fp[c] - fm[c]) / (2.0 * h);
                let err = (fd - jac[c][v]).abs();
                assert!(
                    err <= 1e-6 * (1.0 + fd.abs()),
                    "coef {c} var {v}: fd {fd} analytic {}",
                    jac[c][v]
                );
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for g in [7.5, -4.0] {
            for kind in [ShelfKind::Low, ShelfKind::High] {
                let x = [900.0, g, 0.0];
                let (_, j) = shelf_coeffs_with_jacobian(
                    &ShelfParams {
                        kind,
                        fc: x[0],
                        gain_db: x[1],
                    },
                    FS,
                )
                .unwrap();
                let j3 = j.map(|r| [r[0], r[1], 0.0]);
                fd_check(
                    |x| {
                        shelf_coeffs(
                            &ShelfParams {
                                kind,
                                fc: x[0],
                                gain_db: x[1],
                            },
                            FS,
                        )
                        .unwrap()
                        .coefficients()
                    },
                    x,
                    &j3,
                    2,
                );
            }
            let x = [2500.0, 300.0, g];
            let p = |x: [f64; 3]| PeakParams {
                fc: x[0],
                fb: x[1],
                gain_db: x[2],
            };
            let (_, j) = peak_coeffs_with_jacobian(&p(x), FS).unwrap();
            fd_check(|x| peak_coeffs(&p(x), FS).unwrap().coefficients(), x, &j, 3);
        }
    }
}
