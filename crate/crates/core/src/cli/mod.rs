//! Command-line interface.
//!
//! A `--config FILE` of `key = value` lines supplies default flags: each line becomes
//! `--key=value` (`key = true` becomes a bare `--key`, `key = false` is dropped), inserted
//! before the command-line flags so that the latter win. Keys belonging to other commands
//! are ignored; unknown keys are a usage error.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error, 4 numerical failure.

mod commands;
mod export;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

pub use export::{
    parse_directions, read_filter_table, write_filter_table, FilterRow, FilterSection, FilterTable,
    FILTER_TABLE_MAGIC,
};

#[derive(Parser, Debug)]
#[command(name = "niirf", version, about = "Neural IIR filter fields for HRTF modeling")]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` default flags; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-direction work (default: one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a single-subject field and evaluate it on the eval split.
    Train(TrainArgs),
    /// Pre-train a conditioned field on many subjects.
    Pretrain(PretrainArgs),
    /// Adapt a pre-trained field to new subjects (adapter parameters only).
    Adapt(AdaptArgs),
    /// Evaluate a checkpoint or a baseline on a split.
    Eval(EvalArgs),
    /// Filter parameters and coefficients at arbitrary directions.
    Interpolate(InterpolateArgs),
    /// Export realized filters as JSON or a binary table.
    ExportFilters(ExportArgs),
    /// Print the measurement splits of a subject or a multi-subject preset.
    MakeSplits(MakeSplitsArgs),
    /// Describe a container, checkpoint, report or filter table.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HeadKind {
    Iir,
    Magnitude,
    Fir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Cbc,
    Film,
    Bitfit,
    Lora,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Nearest,
    Vbap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Eval,
    Test1,
    Test2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Json,
    Binary,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// HRTF container file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Subject id (a bare number also matches ids ending in that number).
    #[arg(long)]
    pub subject: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "iir")]
    pub head: HeadKind,
    /// Peaking filters per ear (IIR head).
    #[arg(long = "K", default_value_t = 32)]
    pub k: usize,
    /// FIR taps per ear (default: IR length of the data).
    #[arg(long)]
    pub taps: Option<usize>,
    #[arg(long, default_value_t = 512)]
    pub dft_size: usize,
    #[arg(long, default_value_t = 256)]
    pub rff_channels: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rff_scale: f64,
    /// Hidden layer width.
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    /// Number of hidden layers.
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OptimArgs {
    /// Learning rate (default 5e-4 for RAdam, 1e-3 for AdamW).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Adam betas as `beta1,beta2`.
    #[arg(long, default_value = "0.9,0.999")]
    pub betas: String,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Weight decay (default 0 for RAdam, 1e-2 for AdamW).
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Seed for weight initialization and subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Accepted for compatibility: runs are always deterministic.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 20_000)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 200)]
    pub patience: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub eval_count: usize,
    #[arg(long, default_value_t = 100)]
    pub val_count: usize,
    /// Size of the training partition.
    #[arg(long, default_value_t = 150)]
    pub train_pool: usize,
    /// Train on this many measurements drawn from the training partition.
    #[arg(long)]
    pub train_count: Option<usize>,
    /// JSON file with explicit `train`, `val` and `eval` index lists (overrides counts).
    #[arg(long)]
    pub splits: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PresetArgs {
    /// Multi-subject split preset.
    #[arg(long, default_value = "hutubs-paper")]
    pub preset: String,
    /// Override the preset's number of pre-training subjects.
    #[arg(long)]
    pub n_pretrain: Option<usize>,
    /// Override the preset's number of adaptation subjects.
    #[arg(long)]
    pub n_adapt: Option<usize>,
    #[arg(long)]
    pub n_unseen: Option<usize>,
    #[arg(long)]
    pub n_seen: Option<usize>,
    #[arg(long)]
    pub n_val_subjects: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub variant: Variant,
    /// Subject embedding size (CbC, FiLM).
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    /// LoRA rank.
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[command(flatten)]
    pub preset: PresetArgs,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AdaptArgs {
    /// Pre-trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Adaptation scheme; must match the checkpoint.
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    /// HRTF container (default: the one used for pre-training).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Subjects to adapt (default: every adaptation subject of the preset).
    #[arg(long)]
    pub subject: Vec<String>,
    /// Number of adaptation measurements.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// AdamW steps.
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "eval")]
    pub split: SplitName,
    /// Evaluate an interpolation baseline instead of the field.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub splits: SplitArgs,
    #[arg(long, default_value_t = 512)]
    pub dft_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `report.jsonl` and `report.csv` (default: summary on stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Text file with one `azimuth elevation` pair in degrees per line.
    #[arg(long)]
    pub directions: PathBuf,
    /// Use this subject's adapter.
    #[arg(long)]
    pub subject: Option<String>,
    /// Include the sampled dB magnitude response.
    #[arg(long)]
    pub with_response: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directions file; without it every measured direction of `--data` is exported.
    #[arg(long)]
    pub directions: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MakeSplitsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the multi-subject preset split instead of a single-subject split.
    #[arg(long)]
    pub multi: bool,
    #[command(flatten)]
    pub preset: PresetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub path: PathBuf,
}

/// Reads a `key = value` config file into flags understood by `subcommand`.
fn config_flags(path: &std::path::Path, subcommand: &str) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cmd = Cli::command();
    let longs = |c: &clap::Command| -> Vec<String> {
        c.get_arguments()
            .filter_map(|a| a.get_long().map(str::to_string))
            .collect()
    };
    let own = cmd.find_subcommand(subcommand).map(longs).unwrap_or_default();
    let any: Vec<String> = cmd.get_subcommands().flat_map(longs).collect();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                n + 1
            )));
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if !any.iter().any(|k| k == key) && !matches!(key, "jobs") {
            return Err(Error::Config(format!(
                "{}:{}: unknown key {key:?}",
                path.display(),
                n + 1
            )));
        }
        if !own.iter().any(|k| k == key) && key != "jobs" {
            continue;
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => out.push(format!("--{key}={v}").into()),
        }
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand name.
fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        } else if s == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(config) = config else {
        return Ok(args);
    };
    let cmd = Cli::command();
    let Some(pos) = args.iter().position(|a| {
        let s = a.to_string_lossy();
        cmd.get_subcommands().any(|c| c.get_name() == s)
    }) else {
        return Ok(args);
    };
    let name = args[pos].to_string_lossy().into_owned();
    let mut out = args[..=pos].to_vec();
    out.extend(config_flags(&config, &name)?);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let mut stdout = std::io::stdout().lock();
    match commands::dispatch(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
