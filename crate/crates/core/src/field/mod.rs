//! The neural field: Fourier-feature encoding, GeLU MLP trunk, output heads and
//! per-subject adapters.

mod adapter;
mod checkpoint;
mod forward;
mod head;
mod params;
mod ranges;
mod rff;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Direction;
use crate::dsp::{CascadeParams, FrequencyGrid};
use crate::error::{Error, Result};

pub use adapter::SubjectAdapter;
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use forward::GradTape;
pub use head::{head_to_params, FirBasis};
pub use params::{ParamStore, TensorId, TensorInfo};
pub use ranges::{build_freq_ranges, spectral_extrema, FreqRangeTable, RangeConfig};
pub use rff::RffEncoder;

/// What the last layer predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadSpec {
    /// Low shelf, `peaks` peaking filters and high shelf per ear.
    Iir { peaks: usize },
    /// One-sided dB magnitude per ear.
    Magnitude,
    /// Time-domain FIR taps per ear.
    Fir { taps: usize },
}

impl HeadSpec {
    /// Width of the final affine layer.
    pub fn output_dim(&self, dft_size: usize) -> usize {
        match *self {
            HeadSpec::Iir { peaks } => 2 * (3 * peaks + 4),
            HeadSpec::Magnitude => 2 * (dft_size / 2 + 1),
            HeadSpec::Fir { taps } => 2 * taps,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HeadSpec::Iir { .. } => "iir",
            HeadSpec::Magnitude => "magnitude",
            HeadSpec::Fir { .. } => "fir",
        }
    }
}

/// Subject conditioning scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    /// Single-subject model.
    None,
    /// Subject embedding concatenated to the encoded direction.
    Cbc { dim: usize },
    /// Subject embedding mapped by a shared affine hypernetwork to per-layer scale/shift.
    Film { dim: usize },
    /// Per-subject biases of every affine layer.
    BitFit,
    /// Per-subject low-rank update `u v^T` of every affine layer.
    Lora { rank: usize },
}

impl Conditioning {
    pub fn name(&self) -> &'static str {
        match self {
            Conditioning::None => "none",
            Conditioning::Cbc { .. } => "cbc",
            Conditioning::Film { .. } => "film",
            Conditioning::BitFit => "bitfit",
            Conditioning::Lora { .. } => "lora",
        }
    }
}

/// Architecture and signal settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub sample_rate: f64,
    pub dft_size: usize,
    pub rff_channels: usize,
    pub rff_scale: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub head: HeadSpec,
    pub conditioning: Conditioning,
    pub ranges: RangeConfig,
}

impl Default for FieldConfig {
    /// 256 Fourier channels, four hidden layers of 512 units, `K = 32`, 512-point DFT at
    /// 44.1 kHz.
    fn default() -> Self {
        Self {
            sample_rate: 44_100.0,
            dft_size: 512,
            rff_channels: 256,
            rff_scale: 1.0,
            hidden_width: 512,
            hidden_layers: 4,
            head: HeadSpec::Iir { peaks: 32 },
            conditioning: Conditioning::None,
            ranges: RangeConfig::default(),
        }
    }
}

impl FieldConfig {
    pub fn output_dim(&self) -> usize {
        self.head.output_dim(self.dft_size)
    }

    pub fn input_dim(&self) -> usize {
        let extra = match self.conditioning {
            Conditioning::Cbc { dim } => dim,
            _ => 0,
        };
        2 * self.rff_channels + extra
    }

    /// `(fan_in, fan_out)` of each affine layer, hidden layers first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_dim();
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, self.output_dim()));
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.dft_size < 2 || !self.dft_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "DFT size {} must be even and at least 2",
                self.dft_size
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if self.rff_channels == 0 || self.hidden_width == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        match self.head {
            HeadSpec::Iir { peaks: 0 } => {
                return Err(Error::Config("IIR head needs at least one peak".into()))
            }
            HeadSpec::Fir { taps: 0 } => return Err(Error::Config("FIR head needs at least one tap".into())),
            _ => {}
        }
        match self.conditioning {
            Conditioning::Cbc { dim: 0 } | Conditioning::Film { dim: 0 } => {
                return Err(Error::Config(
                    "subject embedding dimension must be positive".into(),
                ))
            }
            Conditioning::Lora { rank: 0 } => return Err(Error::Config("LoRA rank must be positive".into())),
            Conditioning::Film { .. } if self.hidden_layers == 0 => {
                return Err(Error::Config("FiLM needs at least one hidden layer".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Tensor handles of one affine layer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DenseIds {
    pub weight: TensorId,
    pub bias: TensorId,
}

/// A trained or freshly initialized neural field.
#[derive(Clone, Debug)]
pub struct FieldModel {
    config: FieldConfig,
    rff: RffEncoder,
    params: ParamStore,
    layers: Vec<DenseIds>,
    film: Option<DenseIds>,
    ranges: Option<FreqRangeTable>,
    grid: FrequencyGrid,
    fir: Option<FirBasis>,
    adapters: BTreeMap<String, SubjectAdapter>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

impl FieldModel {
    /// Randomly initialized model. An IIR head requires the frequency range table.
    ///
    /// Affine layers draw weights and biases uniformly in `±1/sqrt(fan_in)`; the final layer
    /// is scaled by 0.01 so an IIR head starts near a flat cascade.
    pub fn new(config: FieldConfig, ranges: Option<FreqRangeTable>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rff = RffEncoder::sample(config.rff_channels, config.rff_scale, &mut rng);
        let mut params = ParamStore::new();
        let dims = config.layer_dims();
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == dims.len() { 0.01 } else { 1.0 };
            let w: Vec<f64> = uniform(&mut rng, fan_in * fan_out, bound)
                .into_iter()
                .map(|v| v * scale)
                .collect();
            let b: Vec<f64> = uniform(&mut rng, fan_out, bound)
                .into_iter()
                .map(|v| v * scale)
                .collect();
            params.push(format!("layers.{l}.weight"), &[fan_out, fan_in], true, w);
            params.push(format!("layers.{l}.bias"), &[fan_out], false, b);
        }
        if let Conditioning::Film { dim } = config.conditioning {
            let n_out = 2 * config.hidden_layers * config.hidden_width;
            let bound = 1.0 / (dim as f64).sqrt();
            params.push(
                "film.weight",
                &[n_out, dim],
                true,
                uniform(&mut rng, n_out * dim, bound),
            );
            // scale rows start at 1, shift rows at 0
            let w = config.hidden_width;
            let bias_init = (0..n_out).map(|i| if (i / w).is_multiple_of(2) { 1.0 } else { 0.0 });
            params.push("film.bias", &[n_out], false, bias_init);
        }
        Self::assemble(config, rff, params, ranges, BTreeMap::new())
    }

    fn assemble(
        config: FieldConfig,
        rff: RffEncoder,
        params: ParamStore,
        ranges: Option<FreqRangeTable>,
        adapters: BTreeMap<String, SubjectAdapter>,
    ) -> Result<Self> {
        if let HeadSpec::Iir { peaks } = config.head {
            let table = ranges
                .as_ref()
                .ok_or_else(|| Error::Config("IIR head requires a frequency range table".into()))?;
            if table.peaks.len() != peaks {
                return Err(Error::Shape(format!(
                    "range table has {} peaks, head has {peaks}",
                    table.peaks.len()
                )));
            }
            table.validate(config.sample_rate)?;
        }
        let grid = FrequencyGrid::new(config.dft_size)?;
        let fir = match config.head {
            HeadSpec::Fir { taps } => Some(FirBasis::new(taps, config.dft_size)),
            _ => None,
        };
        let mut layers = Vec::new();
        for l in 0..=config.hidden_layers {
            if let (Some(weight), Some(bias)) = (
                params.find(&format!("layers.{l}.weight")),
                params.find(&format!("layers.{l}.bias")),
            ) {
                layers.push(DenseIds { weight, bias });
            }
        }
        let film = match (params.find("film.weight"), params.find("film.bias")) {
            (Some(weight), Some(bias)) => Some(DenseIds { weight, bias }),
            _ => None,
        };
        Ok(Self {
            config,
            rff,
            params,
            layers,
            film,
            ranges,
            grid,
            fir,
            adapters,
        })
    }

    /// Rebuilds a model from stored parts, checking every tensor shape against the config.
    pub(crate) fn from_parts(
        config: FieldConfig,
        rff: RffEncoder,
        params: ParamStore,
        ranges: Option<FreqRangeTable>,
        adapters: BTreeMap<String, SubjectAdapter>,
    ) -> Result<Self> {
        config.validate()?;
        let model = Self::assemble(config, rff, params, ranges, adapters)?;
        let reference = Self::new(model.config.clone(), model.ranges.clone(), 0)?;
        if reference.params.tensors() != model.params.tensors() {
            return Err(Error::Checkpoint(
                "parameter tensors do not match the architecture".into(),
            ));
        }
        if model.rff.channels() != model.config.rff_channels {
            return Err(Error::Checkpoint("RFF projection shape mismatch".into()));
        }
        for (id, a) in &model.adapters {
            let fresh = model.fresh_adapter(0);
            if fresh.params().tensors() != a.params().tensors() {
                return Err(Error::Checkpoint(format!(
                    "adapter {id} does not match the conditioning scheme"
                )));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn rff(&self) -> &RffEncoder {
        &self.rff
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn ranges(&self) -> Option<&FreqRangeTable> {
        self.ranges.as_ref()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn adapters(&self) -> &BTreeMap<String, SubjectAdapter> {
        &self.adapters
    }

    pub fn adapter(&self, subject: &str) -> Option<&SubjectAdapter> {
        self.adapters.get(subject)
    }

    pub fn adapter_mut(&mut self, subject: &str) -> Option<&mut SubjectAdapter> {
        self.adapters.get_mut(subject)
    }

    pub fn insert_adapter(&mut self, subject: impl Into<String>, adapter: SubjectAdapter) -> Result<()> {
        self.check_adapter(Some(&adapter))?;
        self.adapters.insert(subject.into(), adapter);
        Ok(())
    }

    /// Number of subject-specific parameters per subject.
    pub fn adapter_param_count(&self) -> usize {
        self.fresh_adapter(0).params().len()
    }

    /// Number of shared trainable parameters.
    pub fn shared_param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn check_adapter(&self, adapter: Option<&SubjectAdapter>) -> Result<()> {
        match adapter {
            Some(a) if a.conditioning() != self.config.conditioning => Err(Error::Shape(format!(
                "adapter is {}, model expects {}",
                a.conditioning().name(),
                self.config.conditioning.name()
            ))),
            Some(_) if self.config.conditioning == Conditioning::None => {
                Err(Error::Shape("unconditioned model takes no adapter".into()))
            }
            _ => Ok(()),
        }
    }

    /// Raw outputs of the final affine layer, one row per direction.
    pub fn forward(&self, dirs: &[Direction], adapter: Option<&SubjectAdapter>) -> Result<Array2<f64>> {
        Ok(self.run(dirs, adapter, false)?.0)
    }

    /// One-sided dB magnitudes per direction, left-ear bins then right-ear bins.
    pub fn predict_db(&self, dirs: &[Direction], adapter: Option<&SubjectAdapter>) -> Result<Array2<f64>> {
        let raw = self.forward(dirs, adapter)?;
        self.head_db(&raw)
    }

    /// Left and right cascade parameters per direction (IIR head only).
    pub fn cascades(
        &self,
        dirs: &[Direction],
        adapter: Option<&SubjectAdapter>,
    ) -> Result<Vec<[CascadeParams; 2]>> {
        let (HeadSpec::Iir { peaks }, Some(ranges)) = (self.config.head, self.ranges.as_ref()) else {
            return Err(Error::Config("model does not have an IIR head".into()));
        };
        let raw = self.forward(dirs, adapter)?;
        Ok(raw
            .outer_iter()
            .map(|row| head_to_params(row.as_slice().expect("contiguous row"), ranges, peaks))
            .collect())
    }

    /// FIR taps per direction, left then right (FIR head only).
    pub fn fir_taps(&self, dirs: &[Direction], adapter: Option<&SubjectAdapter>) -> Result<Array2<f64>> {
        if !matches!(self.config.head, HeadSpec::Fir { .. }) {
            return Err(Error::Config("model does not have an FIR head".into()));
        }
        self.forward(dirs, adapter)
    }

    /// Rounds shared and adapter parameters to `f32`, as stored in checkpoints.
    pub fn round_to_f32(&mut self) {
        self.params.round_to_f32();
        for a in self.adapters.values_mut() {
            a.params_mut().round_to_f32();
        }
        let proj = self.rff.projection().mapv(|v| v as f32 as f64);
        self.rff = RffEncoder::from_projection(proj);
        if let Some(r) = self.ranges.as_mut() {
            let round = |x: &mut [f64; 2]| {
                for v in x.iter_mut() {
                    *v = *v as f32 as f64;
                }
            };
            r.peaks.iter_mut().for_each(round);
            round(&mut r.bandwidth);
            round(&mut r.low_shelf);
            round(&mut r.high_shelf);
        }
    }

    /// FNV-1a hash of the shared parameter bits, for detecting mutation.
    pub fn shared_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.params.values() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub(crate) fn film_ids(&self) -> Option<DenseIds> {
        self.film
    }

    pub(crate) fn fir_basis(&self) -> Option<&FirBasis> {
        self.fir.as_ref()
    }
}
