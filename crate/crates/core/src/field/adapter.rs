use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Conditioning, FieldModel, ParamStore, TensorId};

/// Subject-specific parameters.
///
/// Tensor layout by scheme: embedding schemes hold `z`; BitFit holds `bias.{l}` for every
/// affine layer; LoRA holds `lora.{l}.u` (`out x r`) and `lora.{l}.v` (`in x r`) for every
/// affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectAdapter {
    conditioning: Conditioning,
    params: ParamStore,
}

impl SubjectAdapter {
    pub(crate) fn from_parts(conditioning: Conditioning, params: ParamStore) -> Self {
        Self { conditioning, params }
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn embedding(&self) -> Option<&[f64]> {
        match self.conditioning {
            Conditioning::Cbc { .. } | Conditioning::Film { .. } => Some(self.params.slice(TensorId(0))),
            _ => None,
        }
    }

    pub(crate) fn bias_id(&self, layer: usize) -> Option<TensorId> {
        matches!(self.conditioning, Conditioning::BitFit).then_some(TensorId(layer))
    }

    pub(crate) fn lora_ids(&self, layer: usize) -> Option<(TensorId, TensorId)> {
        matches!(self.conditioning, Conditioning::Lora { .. })
            .then_some((TensorId(2 * layer), TensorId(2 * layer + 1)))
    }
}

impl FieldModel {
    /// Adapter that leaves the shared model unchanged: zero embedding (CbC, FiLM), copies
    /// of the shared biases (BitFit), or `u = 0` with random `v` (LoRA).
    pub fn fresh_adapter(&self, seed: u64) -> SubjectAdapter {
        let mut params = ParamStore::new();
        let conditioning = self.config.conditioning;
        match conditioning {
            Conditioning::None => {}
            Conditioning::Cbc { dim } | Conditioning::Film { dim } => {
                params.push("z", &[dim], false, std::iter::repeat(0.0));
            }
            Conditioning::BitFit => {
                for (l, ids) in self.layers.iter().enumerate() {
                    let b = self.params.slice(ids.bias).to_vec();
                    params.push(format!("bias.{l}"), &[b.len()], false, b);
                }
            }
            Conditioning::Lora { rank } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for (l, &(fan_in, fan_out)) in self.config.layer_dims().iter().enumerate() {
                    params.push(
                        format!("lora.{l}.u"),
                        &[fan_out, rank],
                        true,
                        std::iter::repeat(0.0),
                    );
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let v: Vec<f64> = (0..fan_in * rank)
                        .map(|_| rng.random_range(-bound..=bound))
                        .collect();
                    params.push(format!("lora.{l}.v"), &[fan_in, rank], true, v);
                }
            }
        }
        SubjectAdapter { conditioning, params }
    }
}
