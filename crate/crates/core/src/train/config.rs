use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::LSD_BAND;
use crate::dataset::{MultiSubjectPreset, SplitSpec};
use crate::error::{Error, Result};
use crate::field::{Conditioning, FieldConfig, HeadSpec, RangeConfig};
use crate::grad::AdamHyper;

/// Everything that determines the numbers an experiment reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: String,
    pub subject: Option<String>,
    pub head: HeadSpec,
    pub dft_size: usize,
    pub rff_channels: usize,
    pub rff_scale: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub conditioning: Conditioning,
    pub ranges: RangeConfig,
    pub split: SplitSpec,
    /// Draw this many training measurements from the training split.
    pub train_count: Option<usize>,
    /// Multi-subject split protocol.
    pub preset: MultiSubjectPreset,
    /// Optimizer for single-subject training and pre-training (RAdam).
    pub optimizer: AdamHyper,
    /// Optimizer for adaptation (AdamW).
    pub adapt_optimizer: AdamHyper,
    pub max_epochs: usize,
    pub patience: usize,
    pub adapt_steps: usize,
    /// Number of adaptation measurements.
    pub adapt_count: usize,
    pub band: [f64; 2],
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let field = FieldConfig::default();
        Self {
            data: String::new(),
            subject: None,
            head: field.head,
            dft_size: field.dft_size,
            rff_channels: field.rff_channels,
            rff_scale: field.rff_scale,
            hidden_width: field.hidden_width,
            hidden_layers: field.hidden_layers,
            conditioning: Conditioning::None,
            ranges: RangeConfig::default(),
            split: SplitSpec::Counts {
                seed: 0,
                eval: 1000,
                val: 100,
                train: 150,
            },
            train_count: None,
            preset: MultiSubjectPreset::hutubs_protocol(0),
            optimizer: AdamHyper::radam(),
            adapt_optimizer: AdamHyper::adamw(),
            max_epochs: 20_000,
            patience: 200,
            adapt_steps: 2_000,
            adapt_count: 100,
            band: LSD_BAND,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn field_config(&self, sample_rate: f64) -> FieldConfig {
        FieldConfig {
            sample_rate,
            dft_size: self.dft_size,
            rff_channels: self.rff_channels,
            rff_scale: self.rff_scale,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            head: self.head,
            conditioning: self.conditioning,
            ranges: self.ranges,
        }
    }

    /// Canonical JSON: struct fields in declaration order, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        serde_json::from_value(value.clone())
            .map_err(|e| Error::Checkpoint(format!("stored experiment config is invalid: {e}")))
    }
}
