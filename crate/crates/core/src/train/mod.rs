//! Experiment configuration, training drivers, the LSD metric, baselines and reports.

mod baseline;
mod config;
mod fit;
mod metrics;
mod report;

pub use baseline::{
    baseline_nearest, baseline_vbap, nearest_index, Triangulation, VbapEstimate, NEAREST_TIE_TOLERANCE,
};
pub use config::ExperimentConfig;
pub use fit::{
    adapt, adapt_subject, evaluate_model, fit, method_name, pretrain, pretrain_multi, ranges_from_batches,
    run_baseline, score_spectra, single_subject_indices, train_single, AdaptOutcome, BaselineKind, Batch,
    FitSummary, PretrainOutcome, Schedule, SingleOutcome, SubjectBatch,
};
pub use metrics::{band_mask, lsd, LSD_BAND};
pub use report::{DirectionLsd, EvalReport, SubjectLsd};
