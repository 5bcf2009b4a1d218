use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::export::{
    read_directions_file, read_filter_table, realize, write_filter_table, FilterRow, FilterTable,
};
use super::*;
use crate::dataset::{
    load_container, read_container, Direction, HrtfSet, MultiSubjectPreset, MultiSubjectSplits, SplitSpec,
    Splits, CONTAINER_MAGIC,
};
use crate::field::{Checkpoint, Conditioning, FieldModel, HeadSpec, CHECKPOINT_MAGIC};
use crate::grad::AdamHyper;
use crate::train::{
    adapt_subject, evaluate_model, method_name, pretrain_multi, run_baseline, single_subject_indices,
    train_single, BaselineKind, DirectionLsd, EvalReport, ExperimentConfig, FitSummary,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RunKind {
    Single,
    Pretrain,
    Adapt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Recorded {
    split: String,
    mean_lsd: f64,
    count: usize,
}

/// Checkpoint metadata: how the model was produced and what it scored.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct RunRecord {
    kind: RunKind,
    config: ExperimentConfig,
    config_hash: String,
    tool_version: String,
    #[serde(default)]
    summary: Option<FitSummary>,
    #[serde(default)]
    splits: Option<Splits>,
    #[serde(default)]
    train_indices: Option<Vec<usize>>,
    #[serde(default)]
    multi_splits: Option<MultiSubjectSplits>,
    /// Adaptation measurement indices per adapted subject.
    #[serde(default)]
    adapted: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    recorded: Vec<Recorded>,
}

impl RunRecord {
    fn new(kind: RunKind, config: &ExperimentConfig) -> Self {
        Self {
            kind,
            config: config.clone(),
            config_hash: config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            summary: None,
            splits: None,
            train_indices: None,
            multi_splits: None,
            adapted: BTreeMap::new(),
            recorded: Vec::new(),
        }
    }

    fn record(&mut self, r: &EvalReport) {
        self.recorded.push(Recorded {
            split: r.split.clone(),
            mean_lsd: r.mean_lsd,
            count: r.directions.len(),
        });
    }

    fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        serde_json::from_value(ck.metadata.clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint has no run record: {e}")))
    }

    fn multi(&self) -> Result<&MultiSubjectSplits> {
        self.multi_splits
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("checkpoint has no multi-subject splits".into()))
    }
}

pub(super) fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => train(a, out),
        Command::Pretrain(a) => pretrain(a, out),
        Command::Adapt(a) => adapt(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Interpolate(a) => interpolate(a, out),
        Command::ExportFilters(a) => export_filters(a, out),
        Command::MakeSplits(a) => make_splits(a, out),
        Command::Inspect(a) => inspect(a, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_reports(dir: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    write_file(&dir.join(format!("{stem}.jsonl")), report.to_jsonl().as_bytes())?;
    write_file(&dir.join(format!("{stem}.csv")), report.to_csv().as_bytes())
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let v = serde_json::json!({
        "config": cfg,
        "config_hash": cfg.hash(),
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&v).expect("config serializes") + "\n";
    write_file(&dir.join("config.json"), text.as_bytes())
}

fn summary_line(out: &mut dyn Write, report: &EvalReport) -> Result<()> {
    let first = report.to_jsonl();
    let line = first.lines().next().unwrap_or_default();
    writeln!(out, "{line}").map_err(stdout_err)
}

fn hyper(o: &OptimArgs, base: AdamHyper) -> Result<AdamHyper> {
    let betas: Vec<f64> = o
        .betas
        .split(',')
        .map(|b| b.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--betas {:?} must be two numbers", o.betas)))?;
    let [beta1, beta2] = betas[..] else {
        return Err(Error::Config(format!(
            "--betas {:?} must be two numbers",
            o.betas
        )));
    };
    if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
        return Err(Error::Config("betas must lie in [0, 1)".into()));
    }
    let h = AdamHyper {
        lr: o.lr.unwrap_or(base.lr),
        beta1,
        beta2,
        eps: o.eps,
        weight_decay: o.weight_decay.unwrap_or(base.weight_decay),
    };
    if !(h.lr > 0.0 && h.eps > 0.0 && h.weight_decay >= 0.0) {
        return Err(Error::Config(
            "learning rate and eps must be positive, weight decay nonnegative".into(),
        ));
    }
    Ok(h)
}

fn load(path: &Path) -> Result<BTreeMap<String, HrtfSet>> {
    load_container(path)
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, cmd: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("{cmd} needs {flag}")))
}

/// Exact id, or a bare number matching the trailing digits of exactly one id.
fn find_subject<'a>(sets: &'a BTreeMap<String, HrtfSet>, query: &str) -> Result<&'a HrtfSet> {
    if let Some(s) = sets.get(query) {
        return Ok(s);
    }
    if let Ok(n) = query.parse::<u64>() {
        let hits: Vec<&HrtfSet> = sets
            .iter()
            .filter(|(id, _)| {
                let digits: String = id
                    .chars()
                    .rev()
                    .take_while(char::is_ascii_digit)
                    .collect::<Vec<_>>()
                    .into_iter()
                    .rev()
                    .collect();
                digits.parse::<u64>().ok() == Some(n)
            })
            .map(|(_, s)| s)
            .collect();
        if let [one] = hits[..] {
            return Ok(one);
        }
    }
    Err(Error::Split(format!("subject {query:?} is not in the container")))
}

fn head_spec(m: &ModelArgs, ir_len: usize) -> HeadSpec {
    match m.head {
        HeadKind::Iir => HeadSpec::Iir { peaks: m.k },
        HeadKind::Magnitude => HeadSpec::Magnitude,
        HeadKind::Fir => HeadSpec::Fir {
            taps: m.taps.unwrap_or(ir_len),
        },
    }
}

fn model_config(cfg: &mut ExperimentConfig, m: &ModelArgs, ir_len: usize) {
    cfg.head = head_spec(m, ir_len);
    cfg.dft_size = m.dft_size;
    cfg.rff_channels = m.rff_channels;
    cfg.rff_scale = m.rff_scale;
    cfg.hidden_width = m.width;
    cfg.hidden_layers = m.layers;
}

fn split_spec(s: &SplitArgs) -> Result<SplitSpec> {
    match &s.splits {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Split(format!("{}: {e}", path.display())))?;
            // accept both a bare splits object and `make-splits` output
            let v = v.get("splits").cloned().unwrap_or(v);
            let sp: Splits =
                serde_json::from_value(v).map_err(|e| Error::Split(format!("{}: {e}", path.display())))?;
            Ok(SplitSpec::Explicit {
                eval: sp.eval,
                val: sp.val,
                train: sp.train,
            })
        }
        None => Ok(SplitSpec::Counts {
            seed: s.split_seed,
            eval: s.eval_count,
            val: s.val_count,
            train: s.train_pool,
        }),
    }
}

fn preset(p: &PresetArgs, seed: u64) -> Result<MultiSubjectPreset> {
    let mut preset = MultiSubjectPreset::by_name(&p.preset, seed)?;
    preset.n_pretrain = p.n_pretrain.unwrap_or(preset.n_pretrain);
    preset.n_adapt = p.n_adapt.unwrap_or(preset.n_adapt);
    preset.n_unseen = p.n_unseen.unwrap_or(preset.n_unseen);
    preset.n_seen = p.n_seen.unwrap_or(preset.n_seen);
    preset.n_val_subjects = p.n_val_subjects.unwrap_or(preset.n_val_subjects);
    Ok(preset)
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let data = require(&a.data.data, "--data", "train")?;
    let subject = require(&a.data.subject, "--subject", "train")?;
    let sets = load(data)?;
    let set = find_subject(&sets, subject)?;
    let mut cfg = ExperimentConfig {
        data: data.display().to_string(),
        subject: Some(set.subject_id().to_string()),
        split: split_spec(&a.split)?,
        train_count: a.split.train_count,
        optimizer: hyper(&a.optim, AdamHyper::radam())?,
        max_epochs: a.schedule.max_epochs,
        patience: a.schedule.patience,
        seed: a.optim.seed,
        ..ExperimentConfig::default()
    };
    model_config(&mut cfg, &a.model, set.ir_len());
    let outcome = train_single(&cfg, set)?;

    let mut record = RunRecord::new(RunKind::Single, &cfg);
    record.summary = Some(outcome.summary.clone());
    record.splits = Some(outcome.splits.clone());
    record.train_indices = Some(outcome.train_indices.clone());
    record.record(&outcome.report);
    ensure_dir(&a.out)?;
    let ck = Checkpoint::new(
        outcome.model,
        serde_json::to_value(&record).expect("record serializes"),
    );
    ck.save(a.out.join("model.ckpt"))?;
    write_reports(&a.out, "report", &outcome.report)?;
    write_config(&a.out, &cfg)?;
    summary_line(out, &outcome.report)
}

fn pretrain(a: PretrainArgs, out: &mut dyn Write) -> Result<()> {
    let sets = load(&a.data)?;
    let ir_len = sets.values().next().map(HrtfSet::ir_len).unwrap_or(0);
    let mut cfg = ExperimentConfig {
        data: a.data.display().to_string(),
        conditioning: match a.variant {
            Variant::Cbc => Conditioning::Cbc { dim: a.embed_dim },
            Variant::Film => Conditioning::Film { dim: a.embed_dim },
            Variant::Bitfit => Conditioning::BitFit,
            Variant::Lora => Conditioning::Lora { rank: a.rank },
        },
        preset: preset(&a.preset, a.split_seed)?,
        optimizer: hyper(&a.optim, AdamHyper::radam())?,
        max_epochs: a.schedule.max_epochs,
        patience: a.schedule.patience,
        seed: a.optim.seed,
        ..ExperimentConfig::default()
    };
    model_config(&mut cfg, &a.model, ir_len);
    let outcome = pretrain_multi(&cfg, &sets)?;

    let method = method_name(cfg.head, cfg.conditioning);
    let mut dirs = Vec::new();
    for s in &outcome.splits.val_subjects {
        let adapter = outcome.model.adapter(s);
        dirs.extend(evaluate_model(
            &outcome.model,
            adapter,
            &sets[s],
            &outcome.splits.seen,
            &cfg,
        )?);
    }
    let report = EvalReport::new(method, "val", cfg.hash(), dirs);

    let mut record = RunRecord::new(RunKind::Pretrain, &cfg);
    record.summary = Some(outcome.summary.clone());
    record.multi_splits = Some(outcome.splits.clone());
    if !report.directions.is_empty() {
        record.record(&report);
    }
    ensure_dir(&a.out)?;
    let ck = Checkpoint::new(
        outcome.model,
        serde_json::to_value(&record).expect("record serializes"),
    );
    ck.save(a.out.join("model.ckpt"))?;
    write_config(&a.out, &cfg)?;
    if report.directions.is_empty() {
        let s = outcome.summary;
        writeln!(out, "{}", serde_json::json!({"record": "pretrain", "epochs": s.epochs, "best_loss": s.best_loss, "config_hash": cfg.hash()}))
            .map_err(stdout_err)
    } else {
        write_reports(&a.out, "report", &report)?;
        summary_line(out, &report)
    }
}

fn adapt(a: AdaptArgs, out: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let base = RunRecord::from_checkpoint(&ck)?;
    if base.kind == RunKind::Single {
        return Err(Error::Config(
            "adapt needs a checkpoint produced by pretrain".into(),
        ));
    }
    let conditioning = ck.model.config().conditioning;
    if let Some(v) = a.variant {
        let matches = matches!(
            (v, conditioning),
            (Variant::Cbc, Conditioning::Cbc { .. })
                | (Variant::Film, Conditioning::Film { .. })
                | (Variant::Bitfit, Conditioning::BitFit)
                | (Variant::Lora, Conditioning::Lora { .. })
        );
        if !matches {
            return Err(Error::Config(format!(
                "--variant {v:?} does not match the checkpoint ({})",
                conditioning.name()
            )));
        }
    }
    let splits = base.multi()?.clone();
    let data = a.data.clone().unwrap_or_else(|| PathBuf::from(&base.config.data));
    let sets = load(&data)?;
    let mut cfg = base.config.clone();
    cfg.data = data.display().to_string();
    cfg.adapt_count = a.n;
    cfg.adapt_steps = a.steps;
    cfg.adapt_optimizer = hyper(&a.optim, AdamHyper::adamw())?;
    cfg.seed = a.optim.seed;
    let subjects: Vec<String> = if a.subject.is_empty() {
        splits.adapt_subjects.clone()
    } else {
        a.subject
            .iter()
            .map(|s| find_subject(&sets, s).map(|x| x.subject_id().to_string()))
            .collect::<Result<_>>()?
    };

    let mut model = ck.model.clone();
    let mut record = RunRecord::new(RunKind::Adapt, &cfg);
    record.multi_splits = Some(splits.clone());
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    for s in &subjects {
        let set = sets
            .get(s)
            .ok_or_else(|| Error::Split(format!("subject {s} is not in the container")))?;
        let o = adapt_subject(&cfg, &ck.model, set, &splits)?;
        t1.extend(o.test1.directions);
        t2.extend(o.test2.directions);
        record.adapted.insert(s.clone(), o.train_indices);
        model.insert_adapter(s.clone(), o.adapter)?;
    }
    let method = method_name(cfg.head, cfg.conditioning);
    let test1 = EvalReport::new(method.clone(), "test1", cfg.hash(), t1);
    let test2 = EvalReport::new(method, "test2", cfg.hash(), t2);
    record.record(&test1);
    record.record(&test2);
    ensure_dir(&a.out)?;
    Checkpoint::new(model, serde_json::to_value(&record).expect("record serializes"))
        .save(a.out.join("model.ckpt"))?;
    write_reports(&a.out, "test1", &test1)?;
    write_reports(&a.out, "test2", &test2)?;
    write_config(&a.out, &cfg)?;
    summary_line(out, &test1)?;
    summary_line(out, &test2)
}

fn baseline_kind(b: Baseline) -> BaselineKind {
    match b {
        Baseline::Nearest => BaselineKind::Nearest,
        Baseline::Vbap => BaselineKind::Vbap,
    }
}

fn split_label(s: SplitName) -> &'static str {
    match s {
        SplitName::Train => "train",
        SplitName::Val => "val",
        SplitName::Eval => "eval",
        SplitName::Test1 => "test1",
        SplitName::Test2 => "test2",
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let label = split_label(a.split);
    let report = match &a.checkpoint {
        Some(path) => eval_checkpoint(&a, path, label)?,
        None => {
            let Some(b) = a.baseline else {
                return Err(Error::Config("eval needs --checkpoint or --baseline".into()));
            };
            let data = require(&a.data.data, "--data", "eval")?;
            let subject = require(&a.data.subject, "--subject", "eval --baseline")?;
            let sets = load(data)?;
            let set = find_subject(&sets, subject)?;
            let cfg = ExperimentConfig {
                data: data.display().to_string(),
                subject: Some(set.subject_id().to_string()),
                dft_size: a.dft_size,
                split: split_spec(&a.splits)?,
                train_count: a.splits.train_count,
                seed: a.seed,
                ..ExperimentConfig::default()
            };
            let (splits, train) = single_subject_indices(&cfg, set)?;
            let indices = match a.split {
                SplitName::Train => train.clone(),
                SplitName::Val => splits.val,
                SplitName::Eval => splits.eval,
                _ => {
                    return Err(Error::Config(format!(
                        "split {label} needs a multi-subject checkpoint"
                    )))
                }
            };
            run_baseline(&cfg, set, baseline_kind(b), &train, &indices, label)?
        }
    };
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_reports(dir, "report", &report)?;
    }
    summary_line(out, &report)
}

fn eval_checkpoint(a: &EvalArgs, path: &Path, label: &str) -> Result<EvalReport> {
    let ck = Checkpoint::load(path)?;
    let record = RunRecord::from_checkpoint(&ck)?;
    let data = a
        .data
        .data
        .clone()
        .unwrap_or_else(|| PathBuf::from(&record.config.data));
    let sets = load(&data)?;
    let cfg = &record.config;
    let model = &ck.model;
    let method = method_name(cfg.head, cfg.conditioning);
    match record.kind {
        RunKind::Single => {
            let subject = cfg.subject.clone().unwrap_or_default();
            let set = find_subject(&sets, &subject)?;
            let splits = record
                .splits
                .as_ref()
                .ok_or_else(|| Error::Checkpoint("checkpoint has no splits".into()))?;
            let train = record
                .train_indices
                .clone()
                .unwrap_or_else(|| splits.train.clone());
            let indices = match a.split {
                SplitName::Train => train.clone(),
                SplitName::Val => splits.val.clone(),
                SplitName::Eval => splits.eval.clone(),
                _ => {
                    return Err(Error::Config(format!(
                        "split {label} needs a multi-subject checkpoint"
                    )))
                }
            };
            match a.baseline {
                Some(b) => run_baseline(cfg, set, baseline_kind(b), &train, &indices, label),
                None => Ok(EvalReport::new(
                    method,
                    label,
                    record.config_hash.clone(),
                    evaluate_model(model, None, set, &indices, cfg)?,
                )),
            }
        }
        RunKind::Pretrain | RunKind::Adapt => {
            let splits = record.multi()?;
            let subjects: Vec<String> = match (&a.data.subject, a.split) {
                (Some(s), _) => vec![find_subject(&sets, s)?.subject_id().to_string()],
                (None, SplitName::Val) => splits.val_subjects.clone(),
                (None, SplitName::Train) => splits.pretrain_subjects.clone(),
                (None, _) if record.kind == RunKind::Adapt => record.adapted.keys().cloned().collect(),
                (None, _) => splits.adapt_subjects.clone(),
            };
            let mut dirs: Vec<DirectionLsd> = Vec::new();
            let mut reports = Vec::new();
            for s in &subjects {
                let set = &sets[s];
                let indices = match a.split {
                    SplitName::Test1 | SplitName::Val => splits.seen.clone(),
                    SplitName::Test2 | SplitName::Eval => splits.unseen.clone(),
                    SplitName::Train => splits.pretrain_indices(s),
                };
                match a.baseline {
                    Some(b) => {
                        let train = record.adapted.get(s).ok_or_else(|| {
                            Error::Config(format!("no adaptation measurements recorded for subject {s}"))
                        })?;
                        reports.push(run_baseline(cfg, set, baseline_kind(b), train, &indices, label)?);
                    }
                    None => {
                        let fresh;
                        let adapter = match model.adapter(s) {
                            Some(ad) => ad,
                            None => {
                                fresh = model.fresh_adapter(cfg.seed);
                                &fresh
                            }
                        };
                        dirs.extend(evaluate_model(model, Some(adapter), set, &indices, cfg)?);
                    }
                }
            }
            if let Some(first) = reports.first() {
                let method = first.method.clone();
                let all = reports.into_iter().flat_map(|r| r.directions).collect();
                return Ok(EvalReport::new(method, label, record.config_hash.clone(), all));
            }
            Ok(EvalReport::new(method, label, record.config_hash.clone(), dirs))
        }
    }
}

fn filter_rows(
    model: &FieldModel,
    subject: Option<&str>,
    dirs: &[Direction],
    with_response: bool,
) -> Result<Vec<FilterRow>> {
    let adapter = match subject {
        Some(s) => Some(
            model
                .adapter(s)
                .ok_or_else(|| Error::Config(format!("checkpoint has no adapter for subject {s}")))?,
        ),
        None => None,
    };
    let cascades = model.cascades(dirs, adapter)?;
    let db = if with_response {
        Some(model.predict_db(dirs, adapter)?)
    } else {
        None
    };
    let fs = model.config().sample_rate;
    let bins = model.grid().bins();
    cascades
        .iter()
        .enumerate()
        .map(|(i, [l, r])| {
            Ok(FilterRow {
                azimuth_deg: dirs[i].azimuth().to_degrees(),
                elevation_deg: dirs[i].elevation().to_degrees(),
                left: realize(l, fs)?,
                right: realize(r, fs)?,
                left_db: db
                    .as_ref()
                    .map(|d| d.row(i).as_slice().expect("row")[..bins].to_vec()),
                right_db: db
                    .as_ref()
                    .map(|d| d.row(i).as_slice().expect("row")[bins..].to_vec()),
            })
        })
        .collect()
}

fn filter_table(ck: &Checkpoint, rows: Vec<FilterRow>) -> Result<FilterTable> {
    let record = RunRecord::from_checkpoint(ck)?;
    let HeadSpec::Iir { peaks } = ck.model.config().head else {
        return Err(Error::Config("filter export needs an IIR-head checkpoint".into()));
    };
    Ok(FilterTable {
        format: "niirf-filter-table".into(),
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: record.config_hash,
        sample_rate: ck.model.config().sample_rate,
        peaks,
        rows,
    })
}

fn interpolate(a: InterpolateArgs, out: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let dirs = read_directions_file(&a.directions)?;
    let rows = filter_rows(&ck.model, a.subject.as_deref(), &dirs, a.with_response)?;
    let table = filter_table(&ck, rows)?;
    let text = serde_json::to_string_pretty(&table).expect("table serializes") + "\n";
    match &a.out {
        Some(p) => write_file(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn export_filters(a: ExportArgs, out: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let record = RunRecord::from_checkpoint(&ck)?;
    let subject = a.data.subject.clone();
    let dirs = match &a.directions {
        Some(p) => read_directions_file(p)?,
        None => {
            let data = a
                .data
                .data
                .clone()
                .unwrap_or_else(|| PathBuf::from(&record.config.data));
            let sets = load(&data)?;
            let id = subject
                .clone()
                .or(record.config.subject.clone())
                .ok_or_else(|| Error::Config("export-filters needs --directions or --subject".into()))?;
            find_subject(&sets, &id)?.directions()
        }
    };
    // a single-subject model has no adapters; the subject only picks directions there
    let adapter_subject = subject.filter(|s| ck.model.adapter(s).is_some());
    let rows = filter_rows(&ck.model, adapter_subject.as_deref(), &dirs, false)?;
    let table = filter_table(&ck, rows)?;
    let bytes = match a.format {
        ExportFormat::Json => {
            (serde_json::to_string_pretty(&table).expect("table serializes") + "\n").into_bytes()
        }
        ExportFormat::Binary => write_filter_table(&table)?,
    };
    write_file(&a.out, &bytes)?;
    writeln!(
        out,
        "{} directions, {} sections per ear",
        table.rows.len(),
        table.peaks + 2
    )
    .map_err(stdout_err)
}

fn make_splits(a: MakeSplitsArgs, out: &mut dyn Write) -> Result<()> {
    let data = require(&a.data.data, "--data", "make-splits")?;
    let sets = load(data)?;
    let value = if a.multi {
        let p = preset(&a.preset, a.split.split_seed)?;
        let splits = p.split(&sets)?;
        serde_json::json!({ "preset": p, "splits": splits })
    } else {
        let subject = require(&a.data.subject, "--subject", "make-splits")?;
        let set = find_subject(&sets, subject)?;
        let cfg = ExperimentConfig {
            split: split_spec(&a.split)?,
            train_count: a.split.train_count,
            seed: a.seed,
            ..ExperimentConfig::default()
        };
        let (splits, train) = single_subject_indices(&cfg, set)?;
        serde_json::json!({ "subject": set.subject_id(), "splits": splits, "train_indices": train })
    };
    let text = serde_json::to_string(&value).expect("splits serialize") + "\n";
    match &a.out {
        Some(p) => write_file(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn inspect(a: InspectArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = std::fs::read(&a.path).map_err(|e| Error::io(&a.path, e))?;
    let info = if bytes.starts_with(CHECKPOINT_MAGIC) {
        let ck = Checkpoint::from_bytes(&bytes)?;
        let m = &ck.model;
        let record = RunRecord::from_checkpoint(&ck).ok();
        serde_json::json!({
            "kind": "checkpoint",
            "tool_version": record.as_ref().map(|r| r.tool_version.clone()),
            "config_hash": record.as_ref().map(|r| r.config_hash.clone()),
            "run": record.as_ref().map(|r| r.kind),
            "head": m.config().head,
            "conditioning": m.config().conditioning,
            "sample_rate": m.config().sample_rate,
            "shared_parameters": m.shared_param_count(),
            "adapter_parameters": m.adapter_param_count(),
            "adapters": m.adapters().keys().collect::<Vec<_>>(),
            "recorded": record.as_ref().map(|r| r.recorded.clone()),
        })
    } else if bytes.starts_with(CONTAINER_MAGIC) {
        let sets = read_container(&bytes)?;
        let subjects: Vec<_> = sets
            .values()
            .map(|s| {
                serde_json::json!({
                    "id": s.subject_id(),
                    "sample_rate": s.sample_rate(),
                    "measurements": s.len(),
                    "ir_length": s.ir_len(),
                    "provenance": s.provenance(),
                })
            })
            .collect();
        serde_json::json!({ "kind": "container", "subjects": subjects })
    } else if bytes.starts_with(super::FILTER_TABLE_MAGIC) {
        let t = read_filter_table(&bytes)?;
        serde_json::json!({
            "kind": "filter-table",
            "encoding": "binary",
            "tool_version": t.tool_version,
            "config_hash": t.config_hash,
            "sample_rate": t.sample_rate,
            "peaks": t.peaks,
            "directions": t.rows.len(),
        })
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{}: unrecognized file", a.path.display())))?;
        if let Ok(t) = serde_json::from_str::<FilterTable>(&text) {
            serde_json::json!({
                "kind": "filter-table",
                "encoding": "json",
                "tool_version": t.tool_version,
                "config_hash": t.config_hash,
                "sample_rate": t.sample_rate,
                "peaks": t.peaks,
                "directions": t.rows.len(),
            })
        } else if let Some(r) = EvalReport::from_jsonl(&text) {
            serde_json::json!({
                "kind": "report",
                "method": r.method,
                "split": r.split,
                "tool_version": r.tool_version,
                "config_hash": r.config_hash,
                "count": r.directions.len(),
                "mean_lsd": r.mean_lsd,
            })
        } else if let Some(c) = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .filter(|v| v.get("config_hash").is_some())
        {
            serde_json::json!({
                "kind": "config",
                "tool_version": c.get("tool_version"),
                "config_hash": c.get("config_hash"),
            })
        } else {
            return Err(Error::Format(format!("{}: unrecognized file", a.path.display())));
        }
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&info).expect("json")).map_err(stdout_err)
}
