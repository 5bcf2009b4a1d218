//! Training loops and the experiment drivers built on them.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::baseline::{baseline_nearest, baseline_vbap, Triangulation};
use super::config::ExperimentConfig;
use super::metrics::{band_mask, lsd_masked};
use super::report::{DirectionLsd, EvalReport};
use crate::dataset::{make_splits, subsample_train, Direction, HrtfSet, MultiSubjectSplits, Splits};
use crate::error::{Error, Result};
use crate::field::{build_freq_ranges, Conditioning, FieldModel, FreqRangeTable, HeadSpec, SubjectAdapter};
use crate::grad::{loss, loss_and_grad, AdamHyper, OptimizerKind, OptimizerState, Trainable};

/// Directions and their dB target spectra.
#[derive(Clone, Debug)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub dirs: Vec<Direction>,
    pub targets: Array2<f64>,
}

impl Batch {
    pub fn new(set: &HrtfSet, indices: &[usize], dft_size: usize) -> Self {
        Self {
            indices: indices.to_vec(),
            dirs: indices.iter().map(|&i| set.measurements()[i].direction).collect(),
            targets: set.target_db(indices, dft_size),
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// One subject's batch during multi-subject training.
#[derive(Clone, Debug)]
pub struct SubjectBatch {
    pub subject: String,
    pub batch: Batch,
}

/// Outcome of a training loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    /// Selection loss of the returned parameters.
    pub best_loss: f64,
    /// `"validation"` or `"train"`.
    pub selected_on: String,
    pub final_train_loss: f64,
}

/// Stopping rule of the training loops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best selection loss.
    pub patience: usize,
}

fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("training diverged at epoch {epoch}: {msg}")),
        other => other,
    }
}

/// Frequency ranges from the per-ear training spectra.
pub fn ranges_from_batches<'a>(
    batches: impl IntoIterator<Item = &'a Batch>,
    peaks: usize,
    fs: f64,
    cfg: &ExperimentConfig,
) -> Result<FreqRangeTable> {
    let bins = cfg.dft_size / 2 + 1;
    let mut spectra: Vec<&[f64]> = Vec::new();
    for b in batches {
        for row in b.targets.outer_iter() {
            let row = row.to_slice().expect("contiguous row");
            spectra.push(&row[..bins]);
            spectra.push(&row[bins..]);
        }
    }
    build_freq_ranges(spectra, peaks, fs, cfg.dft_size, &cfg.ranges)
}

/// Full-batch RAdam on the shared parameters of an unconditioned model. Keeps the
/// parameters with the lowest validation loss, or training loss without validation data.
pub fn fit(
    model: &mut FieldModel,
    train: &Batch,
    val: Option<&Batch>,
    hyper: AdamHyper,
    schedule: Schedule,
) -> Result<FitSummary> {
    let select = val.filter(|v| !v.is_empty()).unwrap_or(train);
    let criterion = |m: &FieldModel| loss(m, None, &select.dirs, &select.targets);
    let mut state = OptimizerState::new(OptimizerKind::RAdam, hyper, model.params().len());
    let mut best = (criterion(model)?, 0, model.params().clone());
    let mut last_train = f64::NAN;
    let mut epochs = 0;
    for epoch in 1..=schedule.max_epochs {
        let (l, g) = loss_and_grad(model, None, &train.dirs, &train.targets, Trainable::Shared)
            .map_err(|e| diverged(e, epoch))?;
        last_train = l;
        state.step(
            model.params_mut().values_mut(),
            &g.shared.expect("shared gradient"),
        );
        epochs = epoch;
        let c = criterion(model).map_err(|e| diverged(e, epoch))?;
        if c < best.0 {
            best = (c, epoch, model.params().clone());
        } else if epoch - best.1 >= schedule.patience {
            break;
        }
    }
    *model.params_mut() = best.2;
    Ok(FitSummary {
        epochs,
        best_epoch: best.1,
        best_loss: best.0,
        selected_on: if std::ptr::eq(select, train) {
            "train"
        } else {
            "validation"
        }
        .into(),
        final_train_loss: last_train,
    })
}

fn subject_losses(model: &FieldModel, batches: &[SubjectBatch]) -> Result<f64> {
    let mut total = 0.0;
    for s in batches {
        let a = model
            .adapter(&s.subject)
            .ok_or_else(|| Error::Config(format!("no adapter for subject {}", s.subject)))?;
        total += loss(model, Some(a), &s.batch.dirs, &s.batch.targets)?;
    }
    Ok(total / batches.len() as f64)
}

/// Joint training of the shared parameters and one adapter per subject (auto-decoding).
///
/// Each epoch visits the subjects in order and takes one RAdam step on the shared
/// parameters and on that subject's adapter. Selection uses the mean validation loss of the
/// `val` batches (whose subjects must also be in `train`), or the mean training loss.
/// With BitFit, the shared biases are set to the mean of the subject biases afterwards, so
/// fresh adapters for new subjects start from the population average.
pub fn pretrain(
    model: &mut FieldModel,
    train: &[SubjectBatch],
    val: &[SubjectBatch],
    hyper: AdamHyper,
    schedule: Schedule,
    seed: u64,
) -> Result<FitSummary> {
    if model.config().conditioning == Conditioning::None {
        return Err(Error::Config(
            "pre-training needs a subject conditioning scheme".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::Split("no pre-training subjects".into()));
    }
    for (k, s) in train.iter().enumerate() {
        if model.adapter(&s.subject).is_none() {
            let a = model.fresh_adapter(seed.wrapping_add(k as u64 + 1));
            model.insert_adapter(s.subject.clone(), a)?;
        }
    }
    let select = if val.is_empty() { train } else { val };
    let mut shared = OptimizerState::new(OptimizerKind::RAdam, hyper, model.params().len());
    let mut per_subject: BTreeMap<String, OptimizerState> = train
        .iter()
        .map(|s| {
            let n = model.adapter(&s.subject).expect("inserted").param_count();
            (
                s.subject.clone(),
                OptimizerState::new(OptimizerKind::RAdam, hyper, n),
            )
        })
        .collect();

    let mut best = (subject_losses(model, select)?, 0, model.clone());
    let (mut epochs, mut last_train) = (0, f64::NAN);
    for epoch in 1..=schedule.max_epochs {
        let mut total = 0.0;
        for s in train {
            let a = model.adapter(&s.subject).expect("inserted");
            let (l, g) = loss_and_grad(model, Some(a), &s.batch.dirs, &s.batch.targets, Trainable::All)
                .map_err(|e| diverged(e, epoch))?;
            total += l;
            shared.step(
                model.params_mut().values_mut(),
                &g.shared.expect("shared gradient"),
            );
            let a = model.adapter_mut(&s.subject).expect("inserted");
            per_subject
                .get_mut(&s.subject)
                .expect("state")
                .step(a.params_mut().values_mut(), &g.adapter.expect("adapter gradient"));
        }
        last_train = total / train.len() as f64;
        epochs = epoch;
        let c = subject_losses(model, select).map_err(|e| diverged(e, epoch))?;
        if c < best.0 {
            best = (c, epoch, model.clone());
        } else if epoch - best.1 >= schedule.patience {
            break;
        }
    }
    *model = best.2;
    if model.config().conditioning == Conditioning::BitFit {
        average_bitfit_biases(model);
    }
    Ok(FitSummary {
        epochs,
        best_epoch: best.1,
        best_loss: best.0,
        selected_on: if val.is_empty() { "train" } else { "validation" }.into(),
        final_train_loss: last_train,
    })
}

fn average_bitfit_biases(model: &mut FieldModel) {
    let n = model.adapters().len() as f64;
    if n == 0.0 {
        return;
    }
    let mut mean = vec![0.0; model.fresh_adapter(0).param_count()];
    for a in model.adapters().values() {
        for (m, v) in mean.iter_mut().zip(a.params().values()) {
            *m += v / n;
        }
    }
    // adapter tensors are the biases of each layer, in layer order
    let layers = model.config().hidden_layers + 1;
    let mut offset = 0;
    for l in 0..layers {
        let id = model
            .params()
            .find(&format!("layers.{l}.bias"))
            .expect("bias tensor");
        let dst = model.params_mut().slice_mut(id);
        dst.copy_from_slice(&mean[offset..offset + dst.len()]);
        offset += dst.len();
    }
}

/// Adapter-only AdamW for a fixed number of steps on a frozen shared model.
pub fn adapt(
    model: &FieldModel,
    batch: &Batch,
    hyper: AdamHyper,
    steps: usize,
    seed: u64,
) -> Result<(SubjectAdapter, f64)> {
    if model.config().conditioning == Conditioning::None {
        return Err(Error::Config("model has no subject conditioning to adapt".into()));
    }
    let mut adapter = model.fresh_adapter(seed);
    let mask = adapter.params().decay_mask();
    let mut state =
        OptimizerState::new(OptimizerKind::AdamW, hyper, adapter.param_count()).with_decay_mask(mask);
    for step in 1..=steps {
        let (_, g) = loss_and_grad(
            model,
            Some(&adapter),
            &batch.dirs,
            &batch.targets,
            Trainable::Adapter,
        )
        .map_err(|e| diverged(e, step))?;
        state.step(
            adapter.params_mut().values_mut(),
            &g.adapter.expect("adapter gradient"),
        );
    }
    let final_loss = loss(model, Some(&adapter), &batch.dirs, &batch.targets)?;
    Ok((adapter, final_loss))
}

/// Per-direction LSD of predicted spectra against the measured ones.
pub fn score_spectra(
    set: &HrtfSet,
    indices: &[usize],
    predicted: &Array2<f64>,
    fallback: &[bool],
    cfg: &ExperimentConfig,
) -> Result<Vec<DirectionLsd>> {
    let mask = band_mask(cfg.band, set.sample_rate(), cfg.dft_size)?;
    let targets = set.target_db(indices, cfg.dft_size);
    indices
        .iter()
        .enumerate()
        .map(|(row, &i)| {
            let d = set.measurements()[i].direction;
            Ok(DirectionLsd {
                subject: set.subject_id().to_string(),
                index: i,
                azimuth_deg: d.azimuth().to_degrees(),
                elevation_deg: d.elevation().to_degrees(),
                lsd: lsd_masked(
                    predicted.row(row).as_slice().expect("contiguous"),
                    targets.row(row).as_slice().expect("contiguous"),
                    &mask,
                )?,
                fallback: fallback.get(row).copied().unwrap_or(false),
            })
        })
        .collect()
}

/// Per-direction LSD of a model (with optional adapter) on `indices`.
pub fn evaluate_model(
    model: &FieldModel,
    adapter: Option<&SubjectAdapter>,
    set: &HrtfSet,
    indices: &[usize],
    cfg: &ExperimentConfig,
) -> Result<Vec<DirectionLsd>> {
    let dirs: Vec<Direction> = indices.iter().map(|&i| set.measurements()[i].direction).collect();
    let pred = model.predict_db(&dirs, adapter)?;
    score_spectra(set, indices, &pred, &[], cfg)
}

/// Report name of a neural-field method.
pub fn method_name(head: HeadSpec, conditioning: Conditioning) -> String {
    let base = match head {
        HeadSpec::Iir { peaks } => format!("niirf-k{peaks}"),
        HeadSpec::Magnitude => "mag-nf".into(),
        HeadSpec::Fir { taps } => format!("fir-nf-{taps}"),
    };
    match conditioning {
        Conditioning::None => base,
        c => format!("{base}+{}", c.name()),
    }
}

/// Splits and training indices of a single-subject experiment.
pub fn single_subject_indices(cfg: &ExperimentConfig, set: &HrtfSet) -> Result<(Splits, Vec<usize>)> {
    let splits = make_splits(set.len(), &cfg.split)?;
    let train = match cfg.train_count {
        Some(n) => subsample_train(&splits.train, n, cfg.seed)?,
        None => splits.train.clone(),
    };
    if train.is_empty() {
        return Err(Error::Split("training set is empty".into()));
    }
    Ok((splits, train))
}

/// Result of [`train_single`].
#[derive(Clone, Debug)]
pub struct SingleOutcome {
    pub model: FieldModel,
    pub splits: Splits,
    pub train_indices: Vec<usize>,
    pub summary: FitSummary,
    /// Evaluation split report of the model as it will be stored (`f32` parameters).
    pub report: EvalReport,
}

/// Trains one subject's field on its training split and evaluates it on the eval split.
pub fn train_single(cfg: &ExperimentConfig, set: &HrtfSet) -> Result<SingleOutcome> {
    if cfg.conditioning != Conditioning::None {
        return Err(Error::Config(
            "single-subject training takes no conditioning".into(),
        ));
    }
    let (splits, train_indices) = single_subject_indices(cfg, set)?;
    let fs = set.sample_rate();
    let train = Batch::new(set, &train_indices, cfg.dft_size);
    let val = Batch::new(set, &splits.val, cfg.dft_size);
    let ranges = match cfg.head {
        HeadSpec::Iir { peaks } => Some(ranges_from_batches([&train], peaks, fs, cfg)?),
        _ => None,
    };
    let mut model = FieldModel::new(cfg.field_config(fs), ranges, cfg.seed)?;
    let schedule = Schedule {
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
    };
    let summary = fit(&mut model, &train, Some(&val), cfg.optimizer, schedule)?;
    model.round_to_f32();
    let dirs = evaluate_model(&model, None, set, &splits.eval, cfg)?;
    let report = EvalReport::new(method_name(cfg.head, cfg.conditioning), "eval", cfg.hash(), dirs);
    Ok(SingleOutcome {
        model,
        splits,
        train_indices,
        summary,
        report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Nearest,
    Vbap,
}

/// Interpolates the eval split from the training measurements of `indices`.
pub fn run_baseline(
    cfg: &ExperimentConfig,
    set: &HrtfSet,
    kind: BaselineKind,
    train_indices: &[usize],
    eval_indices: &[usize],
    split_name: &str,
) -> Result<EvalReport> {
    let train_dirs: Vec<Direction> = train_indices
        .iter()
        .map(|&i| set.measurements()[i].direction)
        .collect();
    let targets = set.target_db(train_indices, cfg.dft_size);
    let spectra: Vec<Vec<f64>> = targets.outer_iter().map(|r| r.to_vec()).collect();
    let tri = match kind {
        BaselineKind::Vbap => Some(Triangulation::new(&train_dirs)?),
        BaselineKind::Nearest => None,
    };
    let width = targets.ncols();
    let mut pred = Array2::zeros((eval_indices.len(), width));
    let mut fallback = Vec::with_capacity(eval_indices.len());
    for (row, &i) in eval_indices.iter().enumerate() {
        let q = set.measurements()[i].direction;
        let (spec, fb) = match &tri {
            Some(t) => {
                let e = baseline_vbap(t, &train_dirs, &spectra, &q)?;
                (e.spectrum, e.fallback)
            }
            None => (baseline_nearest(&train_dirs, &spectra, &q)?, false),
        };
        pred.row_mut(row).assign(&ndarray::ArrayView1::from(&spec));
        fallback.push(fb);
    }
    let dirs = score_spectra(set, eval_indices, &pred, &fallback, cfg)?;
    let method = match kind {
        BaselineKind::Nearest => "nearest",
        BaselineKind::Vbap => "mag-vbap",
    };
    Ok(EvalReport::new(method, split_name, cfg.hash(), dirs))
}

/// Result of [`pretrain_multi`].
#[derive(Clone, Debug)]
pub struct PretrainOutcome {
    pub model: FieldModel,
    pub splits: MultiSubjectSplits,
    pub summary: FitSummary,
}

fn common_sample_rate<'a>(sets: impl IntoIterator<Item = &'a HrtfSet>) -> Result<f64> {
    let mut fs = None;
    for s in sets {
        match fs {
            None => fs = Some(s.sample_rate()),
            Some(f) if f != s.sample_rate() => {
                return Err(Error::Split(format!(
                    "subject {} has sample rate {} Hz, expected {f} Hz",
                    s.subject_id(),
                    s.sample_rate()
                )))
            }
            _ => {}
        }
    }
    fs.ok_or_else(|| Error::Split("no subjects".into()))
}

/// Multi-subject pre-training under the configured split preset.
pub fn pretrain_multi(cfg: &ExperimentConfig, sets: &BTreeMap<String, HrtfSet>) -> Result<PretrainOutcome> {
    let splits = cfg.preset.split(sets)?;
    let fs = common_sample_rate(sets.values())?;
    let train: Vec<SubjectBatch> = splits
        .pretrain_subjects
        .iter()
        .map(|s| SubjectBatch {
            subject: s.clone(),
            batch: Batch::new(&sets[s], &splits.pretrain_indices(s), cfg.dft_size),
        })
        .collect();
    let val: Vec<SubjectBatch> = splits
        .val_subjects
        .iter()
        .map(|s| SubjectBatch {
            subject: s.clone(),
            batch: Batch::new(&sets[s], &splits.seen, cfg.dft_size),
        })
        .filter(|b| !b.batch.is_empty())
        .collect();
    let ranges = match cfg.head {
        HeadSpec::Iir { peaks } => Some(ranges_from_batches(
            train.iter().map(|s| &s.batch),
            peaks,
            fs,
            cfg,
        )?),
        _ => None,
    };
    let mut model = FieldModel::new(cfg.field_config(fs), ranges, cfg.seed)?;
    let schedule = Schedule {
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
    };
    let summary = pretrain(&mut model, &train, &val, cfg.optimizer, schedule, cfg.seed)?;
    model.round_to_f32();
    Ok(PretrainOutcome {
        model,
        splits,
        summary,
    })
}

/// Result of [`adapt_subject`].
#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub adapter: SubjectAdapter,
    pub train_indices: Vec<usize>,
    pub final_loss: f64,
    /// Held-out directions seen in pre-training.
    pub test1: EvalReport,
    /// Directions unseen by every subject.
    pub test2: EvalReport,
}

/// Adapts a pre-trained model to a new subject from `cfg.adapt_count` of its measurements
/// drawn from the non-held-out pool.
pub fn adapt_subject(
    cfg: &ExperimentConfig,
    model: &FieldModel,
    set: &HrtfSet,
    splits: &MultiSubjectSplits,
) -> Result<AdaptOutcome> {
    if cfg.conditioning != model.config().conditioning {
        return Err(Error::Config(format!(
            "requested {} adaptation but the checkpoint was pre-trained with {}",
            cfg.conditioning.name(),
            model.config().conditioning.name()
        )));
    }
    let train_indices = subsample_train(&splits.pool, cfg.adapt_count, cfg.seed)?;
    let batch = Batch::new(set, &train_indices, cfg.dft_size);
    let (mut adapter, final_loss) = if batch.is_empty() {
        (model.fresh_adapter(cfg.seed), f64::NAN)
    } else {
        adapt(model, &batch, cfg.adapt_optimizer, cfg.adapt_steps, cfg.seed)?
    };
    adapter.params_mut().round_to_f32();
    let method = method_name(model.config().head, model.config().conditioning);
    let t1 = evaluate_model(model, Some(&adapter), set, &splits.seen, cfg)?;
    let t2 = evaluate_model(model, Some(&adapter), set, &splits.unseen, cfg)?;
    Ok(AdaptOutcome {
        adapter,
        train_indices,
        final_loss,
        test1: EvalReport::new(method.clone(), "test1", cfg.hash(), t1),
        test2: EvalReport::new(method, "test2", cfg.hash(), t2),
    })
}
