mod common;

use common::*;
use niirf::dsp::{
    cascade_response, peak_coeffs, shelf_coeffs, CascadeParams, PeakParams, ShelfKind, ShelfParams,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn shelf_matches_reference(high in any::<bool>(), fc in 20.0..20_000.0f64, g in -30.0..30.0f64) {
        let kind = if high { ShelfKind::High } else { ShelfKind::Low };
        let s = shelf_coeffs(&ShelfParams { kind, fc, gain_db: g }, FS).unwrap();
        let (b, a) = shelf_reference(high, fc, g, FS);
        for (x, y) in [s.b0, s.b1, s.b2, 1.0, s.a1, s.a2].iter().zip(b.iter().chain(&a)) {
            prop_assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
        prop_assert!(s.is_stable());
    }

    #[test]
    fn peak_matches_reference(fc in 20.0..21_000.0f64, fb in 5.0..8_000.0f64, g in -30.0..30.0f64) {
        let s = peak_coeffs(&PeakParams { fc, fb, gain_db: g }, FS).unwrap();
        let (b, a) = peak_reference(fc, fb, g, FS);
        for (x, y) in [s.b0, s.b1, s.b2, 1.0, s.a1, s.a2].iter().zip(b.iter().chain(&a)) {
            prop_assert!(close(*x, *y, 1e-12), "{x} vs {y}");
        }
        prop_assert!(s.is_stable());
    }

    #[test]
    fn sampled_cascade_matches_direct_evaluation(
        gains in proptest::collection::vec(-12.0..12.0f64, 6),
        centers in proptest::collection::vec(100.0..18_000.0f64, 4),
        bandwidths in proptest::collection::vec(30.0..4_000.0f64, 4),
    ) {
        let c = CascadeParams {
            low_shelf: ShelfParams { kind: ShelfKind::Low, fc: 300.0, gain_db: gains[0] },
            peaks: (0..4)
                .map(|k| PeakParams { fc: centers[k], fb: bandwidths[k], gain_db: gains[k + 1] })
                .collect(),
            high_shelf: ShelfParams { kind: ShelfKind::High, fc: 9_000.0, gain_db: gains[5] },
        };
        let mut sections = vec![shelf_reference(false, 300.0, gains[0], FS)];
        for k in 0..4 {
            sections.push(peak_reference(centers[k], bandwidths[k], gains[k + 1], FS));
        }
        sections.push(shelf_reference(true, 9_000.0, gains[5], FS));
        let r = cascade_response(&c, FS, 256).unwrap();
        prop_assert_eq!(r.len(), 256);
        for (m, db) in r.one_sided_db().iter().enumerate() {
            let want = cascade_db(&sections, bin_omega(m, 256));
            prop_assert!((db - want).abs() < 1e-9, "bin {}: {} vs {}", m, db, want);
        }
    }
}

#[test]
fn coefficient_worked_values() {
    // fs/4 makes tan(pi fc / fs) = 1, so alpha = 0 and the shelf is b = (1 + eta, eta)
    let fs = 44_100.0;
    let s = shelf_coeffs(
        &ShelfParams {
            kind: ShelfKind::Low,
            fc: fs / 4.0,
            gain_db: 6.0,
        },
        fs,
    )
    .unwrap();
    let eta = (10f64.powf(0.3) - 1.0) / 2.0;
    assert!((s.b0 - (1.0 + eta)).abs() < 1e-12);
    assert!((s.b1 - eta).abs() < 1e-12);
    assert!(s.a1.abs() < 1e-12);
    // a peak centred at fs/4 has gamma = 0, so b1 = a1 = 0
    let p = peak_coeffs(
        &PeakParams {
            fc: fs / 4.0,
            fb: 1_000.0,
            gain_db: -6.0,
        },
        fs,
    )
    .unwrap();
    assert!(p.b1.abs() < 1e-12 && p.a1.abs() < 1e-12);
}

#[test]
fn out_of_range_frequencies_are_rejected() {
    let bad = [0.0, -5.0, FS / 2.0, FS, f64::NAN];
    for fc in bad {
        assert!(shelf_coeffs(
            &ShelfParams {
                kind: ShelfKind::Low,
                fc,
                gain_db: 0.0
            },
            FS
        )
        .is_err());
        assert!(peak_coeffs(
            &PeakParams {
                fc,
                fb: 100.0,
                gain_db: 0.0
            },
            FS
        )
        .is_err());
        assert!(peak_coeffs(
            &PeakParams {
                fc: 1_000.0,
                fb: fc,
                gain_db: 0.0
            },
            FS
        )
        .is_err());
    }
}
