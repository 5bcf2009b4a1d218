//! Acceptance suite. Prints one status line per criterion and exits non-zero if any
//! criterion fails. Criteria that need external datasets report BLOCKED unless the
//! converted container is supplied through an environment variable:
//!
//! - `NIIRF_CIPIC`: CIPIC container (single-subject trend criterion). `NIIRF_CIPIC_SUBJECTS`
//!   optionally limits the run to a comma-separated list of subject ids.
//! - `NIIRF_HUTUBS`: HUTUBS container (adaptation trend criterion). `NIIRF_HUTUBS_PRETRAIN`
//!   sets the number of pre-training subjects (default 20).
//!
//! `NIIRF_ACCEPTANCE_ONLY=<substring>` runs only the criteria whose name contains it.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::*;
use niirf::dataset::synthetic::synthetic_set;
use niirf::dataset::{load_container, HrtfSet, MultiSubjectPreset};
use niirf::dataset::{Direction, SplitSpec};
use niirf::dsp::{
    apply_cascade_time, cascade_response, peak_coeffs, sections_response, shelf_coeffs, CascadeParams,
    PeakParams, ShelfKind, ShelfParams,
};
use niirf::field::{Conditioning, FieldConfig, FieldModel, FreqRangeTable, HeadSpec, SubjectAdapter};
use niirf::grad::{loss, loss_and_grad, AdamHyper, Trainable};
use niirf::train::{
    adapt_subject, evaluate_model, fit, pretrain_multi, ranges_from_batches, run_baseline, train_single,
    BaselineKind, Batch, ExperimentConfig, Schedule,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

enum Status {
    Pass,
    Fail,
    Blocked,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn judge(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("filter identities", filter_identities),
        ("frequency sampling vs time domain", frequency_vs_time),
        ("gradient suite", gradient_suite),
        ("architecture bookkeeping", architecture_bookkeeping),
        ("overfit sanity", overfit_sanity),
        ("single-subject trend (CIPIC)", cipic_trend),
        ("adaptation trend (HUTUBS)", hutubs_trend),
        ("determinism", determinism),
    ];
    let only = std::env::var("NIIRF_ACCEPTANCE_ONLY").ok();
    let mut failed = 0;
    for (name, run) in criteria {
        if only.as_ref().is_some_and(|o| !name.contains(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Blocked => "BLOCKED",
        };
        println!(
            "[{tag}] {name}: {} ({:.1} s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn random_peak(rng: &mut ChaCha8Rng, g: f64) -> PeakParams {
    PeakParams {
        fc: rng.random_range(50.0..20_000.0),
        fb: rng.random_range(20.0..4_000.0),
        gain_db: g,
    }
}

fn random_shelf(rng: &mut ChaCha8Rng, kind: ShelfKind, g: f64) -> ShelfParams {
    ShelfParams {
        kind,
        fc: rng.random_range(20.0..20_000.0),
        gain_db: g,
    }
}

fn filter_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut unity = 0.0f64;
    let mut gain_err = 0.0f64;
    for _ in 0..1000 {
        // zero gain: every section must be exactly transparent
        let flat = [
            shelf_coeffs(&random_shelf(&mut rng, ShelfKind::Low, 0.0), FS).unwrap(),
            peak_coeffs(&random_peak(&mut rng, 0.0), FS).unwrap(),
            shelf_coeffs(&random_shelf(&mut rng, ShelfKind::High, 0.0), FS).unwrap(),
        ];
        for s in &flat {
            let r = sections_response(std::slice::from_ref(s), 512).unwrap();
            for h in r.values() {
                unity = unity.max((h.norm() - 1.0).abs());
            }
        }

        let g = rng.random_range(-24.0..24.0);
        let rho = 10f64.powf(g / 20.0);
        let low = sections_response(
            &[shelf_coeffs(&random_shelf(&mut rng, ShelfKind::Low, g), FS).unwrap()],
            512,
        )
        .unwrap();
        let high = sections_response(
            &[shelf_coeffs(&random_shelf(&mut rng, ShelfKind::High, g), FS).unwrap()],
            512,
        )
        .unwrap();
        let (lv, hv) = (low.values(), high.values());
        for (got, want) in [
            (lv[0].norm(), rho),
            (lv[256].norm(), 1.0),
            (hv[0].norm(), 1.0),
            (hv[256].norm(), rho),
        ] {
            gain_err = gain_err.max((got - want).abs());
        }
        let p = random_peak(&mut rng, g);
        let s = peak_coeffs(&p, FS).unwrap();
        let at_fc = section_at(
            &[s.b0, s.b1, s.b2],
            &[1.0, s.a1, s.a2],
            2.0 * std::f64::consts::PI * p.fc / FS,
        );
        gain_err = gain_err.max((at_fc.norm() - rho).abs());
    }
    judge(
        unity < 1e-12 && gain_err < 1e-9,
        format!("max | |H|-1 | at g=0 = {unity:.2e} (< 1e-12), max gain error = {gain_err:.2e} (< 1e-9), 1000 draws"),
    )
}

fn random_cascade(rng: &mut ChaCha8Rng, k: usize) -> CascadeParams {
    let mut g = || rng.random_range(-12.0..12.0);
    let gains: Vec<f64> = (0..k + 2).map(|_| g()).collect();
    CascadeParams {
        low_shelf: ShelfParams {
            kind: ShelfKind::Low,
            fc: rng.random_range(20.0..1_000.0),
            gain_db: gains[0],
        },
        peaks: (0..k)
            .map(|i| PeakParams {
                fc: rng.random_range(100.0..18_000.0),
                fb: rng.random_range(50.0..4_000.0),
                gain_db: gains[i + 1],
            })
            .collect(),
        high_shelf: ShelfParams {
            kind: ShelfKind::High,
            fc: rng.random_range(4_000.0..20_000.0),
            gain_db: gains[k + 1],
        },
    }
}

const ROUNDOFF: f64 = 1e-12;

fn frequency_vs_time() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut planner = FftPlanner::<f64>::new();
    let mut ok = true;
    let mut last = Vec::new();
    for _ in 0..5 {
        let c = random_cascade(&mut rng, 8);
        let mut errors = Vec::new();
        for m in [512, 1024, 2048, 4096, 8192] {
            let mut impulse = vec![0.0; m];
            impulse[0] = 1.0;
            let h = apply_cascade_time(&c, FS, &impulse).unwrap();
            let mut spec: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            planner.plan_fft_forward(m).process(&mut spec);
            let sampled = cascade_response(&c, FS, m).unwrap();
            let err = spec
                .iter()
                .zip(sampled.values())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
            errors.push(err);
        }
        // once the tail is below double precision the error only wanders at roundoff level
        ok &= errors.windows(2).all(|w| w[1] <= w[0] + ROUNDOFF) && errors[4] < 1e-4;
        last = errors;
    }
    let shown: Vec<String> = last.iter().map(|e| format!("{e:.1e}")).collect();
    judge(
        ok,
        format!("5 random K=8 cascades, max-abs error non-increasing (to 1e-12 roundoff) over M=512..8192 with final < 1e-4 (last: {})", shown.join(" ")),
    )
}

fn grad_model(head: HeadSpec, conditioning: Conditioning, gain_bias: f64) -> FieldModel {
    let cfg = FieldConfig {
        rff_channels: 4,
        hidden_width: 16,
        head,
        conditioning,
        ..FieldConfig::default()
    };
    let ranges = match head {
        HeadSpec::Iir { peaks } => Some(FreqRangeTable::log_spaced(peaks, cfg.sample_rate, &cfg.ranges)),
        _ => None,
    };
    let mut m = FieldModel::new(cfg, ranges, 21).unwrap();
    let last = m
        .params()
        .find(&format!("layers.{}.bias", m.config().hidden_layers))
        .unwrap();
    let b = m.params_mut().slice_mut(last);
    match head {
        HeadSpec::Iir { peaks } => {
            let n = 3 * peaks + 4;
            for e in 0..2 {
                b[e * n + 1] += gain_bias;
                b[e * n + 3 + 3 * peaks] += gain_bias;
                for k in 0..peaks {
                    b[e * n + 4 + 3 * k] += gain_bias;
                }
            }
        }
        HeadSpec::Fir { taps } => {
            // keeps the spectrum away from nulls, where finite differences break down
            b[0] += 1.0;
            b[taps] += 1.0;
        }
        HeadSpec::Magnitude => {
            for v in b.iter_mut() {
                *v += gain_bias;
            }
        }
    }
    m
}

/// Worst relative error over `probes` entries, drawn round-robin over tensors so every
/// parameter class is covered.
fn fd_check(
    model: &FieldModel,
    adapter: Option<&SubjectAdapter>,
    on_adapter: bool,
    probes: usize,
    seed: u64,
) -> f64 {
    let dirs: Vec<Direction> = [(10.0, 0.0), (100.0, 20.0), (250.0, -30.0)]
        .iter()
        .map(|&(a, e)| Direction::from_degrees(a, e).unwrap())
        .collect();
    let targets =
        ndarray::Array2::from_shape_fn((3, 514), |(i, j)| 3.0 * ((i * 514 + j) as f64 * 0.013).sin());
    let trainable = if on_adapter {
        Trainable::Adapter
    } else {
        Trainable::Shared
    };
    let (_, g) = loss_and_grad(model, adapter, &dirs, &targets, trainable).unwrap();
    let g = if on_adapter {
        g.adapter.unwrap()
    } else {
        g.shared.unwrap()
    };
    let store = if on_adapter {
        adapter.unwrap().params()
    } else {
        model.params()
    };
    let tensors = store.tensors().to_vec();
    let floor = 1e-6 * g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for p in 0..probes {
        let t = &tensors[p % tensors.len()];
        let i = t.offset + rng.random_range(0..t.len());
        let base = store.values()[i];
        let eval = |delta: f64| {
            let mut m = model.clone();
            let mut a = adapter.cloned();
            let store = if on_adapter {
                a.as_mut().unwrap().params_mut()
            } else {
                m.params_mut()
            };
            store.values_mut()[i] = base + delta;
            loss(&m, a.as_ref(), &dirs, &targets).unwrap()
        };
        let h = 1e-3 * base.abs().max(1.0);
        let fd = (8.0 * (eval(h) - eval(-h)) - (eval(2.0 * h) - eval(-2.0 * h))) / (12.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(floor));
    }
    worst
}

fn gradient_suite() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut seed = 0;
    for sign in [1.0, -1.0] {
        for head in [
            HeadSpec::Iir { peaks: 2 },
            HeadSpec::Magnitude,
            HeadSpec::Fir { taps: 8 },
        ] {
            let m = grad_model(head, Conditioning::None, 4.0 * sign);
            seed += 1;
            worst = worst.max(fd_check(&m, None, false, 100, seed));
            cases += 1;
        }
        for c in [
            Conditioning::Cbc { dim: 3 },
            Conditioning::Film { dim: 3 },
            Conditioning::BitFit,
            Conditioning::Lora { rank: 1 },
        ] {
            let m = grad_model(HeadSpec::Iir { peaks: 2 }, c, 3.0 * sign);
            let mut a = m.fresh_adapter(2);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            for v in a.params_mut().values_mut() {
                *v += r.random_range(-0.2..0.2);
            }
            seed += 1;
            worst = worst.max(fd_check(&m, Some(&a), true, 100, seed));
            worst = worst.max(fd_check(&m, Some(&a), false, 100, seed));
            cases += 2;
        }
    }
    judge(
        worst < 1e-4,
        format!("{cases} cases x 100 probes (trunk, heads, CbC/FiLM/BitFit/LoRA; both gain signs), max relative error {worst:.2e} (< 1e-4)"),
    )
}

fn architecture_bookkeeping() -> Outcome {
    let d = FieldConfig::default();
    let mut ok = d.rff_channels == 256 && d.hidden_width == 512 && d.hidden_layers == 4;
    let mut found = Vec::new();
    for (head, expected) in [
        (HeadSpec::Magnitude, [32, 32, 2562, 5122]),
        (HeadSpec::Iir { peaks: 32 }, [32, 32, 2248, 4808]),
    ] {
        let ranges = match head {
            HeadSpec::Iir { peaks } => Some(FreqRangeTable::log_spaced(peaks, d.sample_rate, &d.ranges)),
            _ => None,
        };
        let counts: Vec<usize> = [
            Conditioning::Cbc { dim: 32 },
            Conditioning::Film { dim: 32 },
            Conditioning::BitFit,
            Conditioning::Lora { rank: 1 },
        ]
        .into_iter()
        .map(|c| {
            let cfg = FieldConfig {
                head,
                conditioning: c,
                ..FieldConfig::default()
            };
            FieldModel::new(cfg, ranges.clone(), 0)
                .unwrap()
                .adapter_param_count()
        })
        .collect();
        ok &= counts == expected;
        found.push(format!("{} {counts:?}", head.name()));
    }
    judge(
        ok,
        format!("Q counts (CbC, FiLM, BitFit, LoRA): {}", found.join("; ")),
    )
}

fn overfit_sanity() -> Outcome {
    let set = synthetic_set("s1", 60, FS, 256, 0.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (head, lr) in [
        (HeadSpec::Iir { peaks: 32 }, 1e-3),
        (HeadSpec::Magnitude, 1e-3),
        (HeadSpec::Fir { taps: 256 }, 1e-4),
    ] {
        let t = Instant::now();
        let cfg = ExperimentConfig {
            head,
            hidden_width: 64,
            rff_channels: 16,
            optimizer: AdamHyper {
                lr,
                ..AdamHyper::radam()
            },
            ..ExperimentConfig::default()
        };
        let batch = Batch::new(&set, &[5], cfg.dft_size);
        let ranges = match head {
            HeadSpec::Iir { peaks } => Some(ranges_from_batches([&batch], peaks, FS, &cfg).unwrap()),
            _ => None,
        };
        let mut model = FieldModel::new(cfg.field_config(FS), ranges, 1).unwrap();
        let schedule = Schedule {
            max_epochs: 5000,
            patience: 5000,
        };
        fit(&mut model, &batch, None, cfg.optimizer, schedule).unwrap();
        let l = evaluate_model(&model, None, &set, &[5], &cfg).unwrap()[0].lsd;
        let secs = t.elapsed().as_secs_f64();
        ok &= l < 0.5 && secs < 120.0;
        parts.push(format!("{} {l:.3} dB in {secs:.1} s", head.name()));
    }
    judge(
        ok,
        format!(
            "single direction, 5000 steps: {} (each < 0.5 dB, < 120 s)",
            parts.join(", ")
        ),
    )
}

fn cipic_trend() -> Outcome {
    let Some(path) = std::env::var_os("NIIRF_CIPIC") else {
        return Outcome {
            status: Status::Blocked,
            detail: "needs a converted CIPIC container in NIIRF_CIPIC".into(),
        };
    };
    let sets = match load_container(Path::new(&path)) {
        Ok(s) => s,
        Err(e) => return judge(false, format!("cannot load CIPIC container: {e}")),
    };
    let wanted: Option<Vec<String>> = std::env::var("NIIRF_CIPIC_SUBJECTS")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let subjects: Vec<&HrtfSet> = sets
        .values()
        .filter(|s| {
            wanted
                .as_ref()
                .is_none_or(|w| w.iter().any(|x| x == s.subject_id()))
        })
        .collect();
    let counts = [25, 50, 100, 150];
    // mean LSD per method and count, averaged over subjects
    let mean = |head: Option<HeadSpec>, n: usize| -> niirf::Result<f64> {
        let mut total = 0.0;
        for set in &subjects {
            let cfg = ExperimentConfig {
                data: path.to_string_lossy().into_owned(),
                subject: Some(set.subject_id().into()),
                head: head.unwrap_or(HeadSpec::Magnitude),
                split: SplitSpec::Counts {
                    seed: 0,
                    eval: 1000,
                    val: 100,
                    train: 150,
                },
                train_count: Some(n),
                ..ExperimentConfig::default()
            };
            total += match head {
                Some(HeadSpec::Fir { .. }) => {
                    let cfg = ExperimentConfig {
                        head: HeadSpec::Fir { taps: set.ir_len() },
                        ..cfg
                    };
                    train_single(&cfg, set)?.report.mean_lsd
                }
                Some(_) => train_single(&cfg, set)?.report.mean_lsd,
                None => {
                    let (splits, train) = niirf::train::single_subject_indices(&cfg, set)?;
                    run_baseline(&cfg, set, BaselineKind::Vbap, &train, &splits.eval, "eval")?.mean_lsd
                }
            };
        }
        Ok(total / subjects.len() as f64)
    };
    let run = || -> niirf::Result<Outcome> {
        let k8 = mean(Some(HeadSpec::Iir { peaks: 8 }), 150)?;
        let vbap = mean(None, 150)?;
        let k32 = mean(Some(HeadSpec::Iir { peaks: 32 }), 25)?;
        let mut mag = Vec::new();
        let mut fir = Vec::new();
        for n in counts {
            mag.push(mean(Some(HeadSpec::Magnitude), n)?);
            fir.push(mean(Some(HeadSpec::Fir { taps: 0 }), n)?);
        }
        let ok = (k8 - vbap).abs() <= 0.75 && k32 <= mag[0] && fir.iter().zip(&mag).all(|(f, m)| f > m);
        Ok(judge(
            ok,
            format!(
                "{} subjects: K=8@150 {k8:.2} vs VBAP {vbap:.2}; K=32@25 {k32:.2} vs Mag {:.2}; FIR {fir:.2?} vs Mag {mag:.2?}",
                subjects.len(),
                mag[0]
            ),
        ))
    };
    run().unwrap_or_else(|e| judge(false, format!("run failed: {e}")))
}

fn hutubs_trend() -> Outcome {
    let Some(path) = std::env::var_os("NIIRF_HUTUBS") else {
        return Outcome {
            status: Status::Blocked,
            detail: "needs a converted HUTUBS container in NIIRF_HUTUBS".into(),
        };
    };
    let sets = match load_container(Path::new(&path)) {
        Ok(s) => s,
        Err(e) => return judge(false, format!("cannot load HUTUBS container: {e}")),
    };
    let n_pretrain: usize = std::env::var("NIIRF_HUTUBS_PRETRAIN")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(20);
    let preset = MultiSubjectPreset {
        n_pretrain,
        n_val_subjects: (n_pretrain / 8).max(1),
        ..MultiSubjectPreset::hutubs_protocol(0)
    };
    let counts = [10, 20, 30, 50, 100];
    let run = || -> niirf::Result<Outcome> {
        let mut results = Vec::new();
        for c in [
            Conditioning::Lora { rank: 1 },
            Conditioning::BitFit,
            Conditioning::Cbc { dim: 32 },
        ] {
            let base = ExperimentConfig {
                data: path.to_string_lossy().into_owned(),
                head: HeadSpec::Iir { peaks: 32 },
                conditioning: c,
                preset: preset.clone(),
                ..ExperimentConfig::default()
            };
            let pre = pretrain_multi(&base, &sets)?;
            let mut t1 = Vec::new();
            let mut t2 = Vec::new();
            for n in counts {
                let cfg = ExperimentConfig {
                    adapt_count: n,
                    ..base.clone()
                };
                let mut d1 = Vec::new();
                let mut d2 = Vec::new();
                for s in &pre.splits.adapt_subjects {
                    let o = adapt_subject(&cfg, &pre.model, &sets[s], &pre.splits)?;
                    d1.extend(o.test1.directions);
                    d2.extend(o.test2.directions);
                }
                let m =
                    |d: &[niirf::train::DirectionLsd]| d.iter().map(|x| x.lsd).sum::<f64>() / d.len() as f64;
                t1.push(m(&d1));
                t2.push(m(&d2));
            }
            results.push((c.name(), t1, t2));
        }
        let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
        let (lora, bitfit, cbc) = (&results[0], &results[1], &results[2]);
        let gap = cbc.2[4] - lora.2[4];
        let ok = monotone(&lora.1) && monotone(&bitfit.1) && gap >= 0.3;
        Ok(judge(
            ok,
            format!(
                "{n_pretrain} pre-training subjects: Test1 LoRA {:.2?}, BitFit {:.2?}; Test2@100 LoRA {:.2} vs CbC {:.2} (gap {gap:.2}, >= 0.3)",
                lora.1, bitfit.1, lora.2[4], cbc.2[4]
            ),
        ))
    };
    run().unwrap_or_else(|e| judge(false, format!("run failed: {e}")))
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    write_synthetic(Path::new(&p("one.bin")), 1, 60, 64);
    write_synthetic(Path::new(&p("many.bin")), 6, 40, 64);
    std::fs::write(p("dirs.txt"), "0 0\n45 10\n180 -20\n").unwrap();
    let model = [
        "--width",
        "16",
        "--layers",
        "2",
        "--rff-channels",
        "8",
        "--K",
        "4",
        "--deterministic",
    ];
    let run = |args: Vec<String>| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_niirf"))
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
        Ok(out.stdout)
    };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let with_model = |v: &[&str]| {
        let mut a = s(v);
        a.extend(s(&model));
        a
    };
    let compare = |tag: &str, files: &[&str]| -> Result<(), String> {
        for f in files {
            let a = std::fs::read(dir.path().join(format!("{tag}-a")).join(f)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dir.path().join(format!("{tag}-b")).join(f)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{tag}/{f} differs"));
            }
        }
        Ok(())
    };
    let check = || -> Result<usize, String> {
        let mut compared = 0;
        for r in ["a", "b"] {
            run(with_model(&[
                "train",
                "--data",
                &p("one.bin"),
                "--subject",
                "S1",
                "--out",
                &p(&format!("train-{r}")),
                "--eval-count",
                "20",
                "--val-count",
                "10",
                "--train-pool",
                "30",
                "--max-epochs",
                "30",
            ]))?;
            run(with_model(&[
                "pretrain",
                "--data",
                &p("many.bin"),
                "--variant",
                "lora",
                "--out",
                &p(&format!("pre-{r}")),
                "--n-pretrain",
                "4",
                "--n-adapt",
                "2",
                "--n-unseen",
                "10",
                "--n-seen",
                "10",
                "--n-val-subjects",
                "1",
                "--max-epochs",
                "5",
            ]))?;
            run(s(&[
                "adapt",
                "--checkpoint",
                &p("pre-a/model.ckpt"),
                "--n",
                "8",
                "--steps",
                "10",
                "--out",
                &p(&format!("adapt-{r}")),
                "--deterministic",
            ]))?;
            run(s(&[
                "eval",
                "--checkpoint",
                &p("train-a/model.ckpt"),
                "--baseline",
                "vbap",
                "--out",
                &p(&format!("eval-{r}")),
            ]))?;
            let filters = run(s(&[
                "interpolate",
                "--checkpoint",
                &p("train-a/model.ckpt"),
                "--directions",
                &p("dirs.txt"),
            ]))?;
            std::fs::create_dir_all(p(&format!("interp-{r}"))).unwrap();
            std::fs::write(p(&format!("interp-{r}/filters.json")), filters).unwrap();
        }
        for (tag, files) in [
            (
                "train",
                &["report.jsonl", "report.csv", "config.json", "model.ckpt"][..],
            ),
            ("pre", &["report.jsonl", "report.csv", "model.ckpt"][..]),
            (
                "adapt",
                &[
                    "test1.jsonl",
                    "test1.csv",
                    "test2.jsonl",
                    "test2.csv",
                    "model.ckpt",
                ][..],
            ),
            ("eval", &["report.jsonl", "report.csv"][..]),
            ("interp", &["filters.json"][..]),
        ] {
            compare(tag, files)?;
            compared += files.len();
        }
        Ok(compared)
    };
    match check() {
        Ok(n) => judge(
            true,
            format!("train, pretrain, adapt, eval and interpolate re-runs: {n} output files byte-identical"),
        ),
        Err(e) => judge(false, e),
    }
}
