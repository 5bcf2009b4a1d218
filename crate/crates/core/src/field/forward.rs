//! Batched trunk evaluation and its reverse pass.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::{Conditioning, FieldModel, SubjectAdapter};
use crate::dataset::Direction;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
pub(crate) fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Intermediates of one batched forward pass, consumed by the reverse pass.
#[derive(Debug)]
pub struct GradTape {
    /// Input of every affine layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    /// `x v` products of LoRA layers.
    lora_xv: Vec<Option<Array2<f64>>>,
    /// Hypernetwork output for FiLM.
    film: Option<Array1<f64>>,
    batch: usize,
}

impl GradTape {
    pub fn batch_size(&self) -> usize {
        self.batch
    }
}

impl FieldModel {
    fn film_vector(&self, adapter: Option<&SubjectAdapter>) -> Option<Array1<f64>> {
        let ids = self.film_ids()?;
        let w = self.params.matrix(ids.weight);
        let mut s = self.params.vector(ids.bias).to_owned();
        if let Some(z) = adapter.and_then(|a| a.embedding()) {
            s += &w.dot(&ArrayView1::from(z));
        }
        Some(s)
    }

    /// Encoded (and, for CbC, embedding-extended) network inputs.
    pub fn encode_batch(&self, dirs: &[Direction], adapter: Option<&SubjectAdapter>) -> Array2<f64> {
        let enc_dim = self.rff.output_dim();
        let mut x = Array2::zeros((dirs.len(), self.config.input_dim()));
        for (mut row, d) in x.outer_iter_mut().zip(dirs) {
            let row = row.as_slice_mut().expect("contiguous row");
            self.rff.encode_into(d, &mut row[..enc_dim]);
            if let (Conditioning::Cbc { .. }, Some(z)) =
                (self.config.conditioning, adapter.and_then(|a| a.embedding()))
            {
                row[enc_dim..].copy_from_slice(z);
            }
        }
        x
    }

    pub(crate) fn run(
        &self,
        dirs: &[Direction],
        adapter: Option<&SubjectAdapter>,
        keep_tape: bool,
    ) -> Result<(Array2<f64>, Option<GradTape>)> {
        self.check_adapter(adapter)?;
        let n_layers = self.layers.len();
        let hidden = self.config.hidden_layers;
        let width = self.config.hidden_width;
        let film = self.film_vector(adapter);
        let mut x = self.encode_batch(dirs, adapter);
        let mut tape = GradTape {
            inputs: Vec::new(),
            pre: Vec::new(),
            lora_xv: Vec::new(),
            film: None,
            batch: dirs.len(),
        };
        for l in 0..n_layers {
            let ids = self.layers[l];
            let a = self.params.matrix(ids.weight);
            let bias = match adapter.and_then(|ad| ad.bias_id(l)) {
                Some(id) => adapter.unwrap().params().vector(id),
                None => self.params.vector(ids.bias),
            };
            let mut z = x.dot(&a.t());
            z += &bias;
            let xv = match adapter.and_then(|ad| ad.lora_ids(l)) {
                Some((u, v)) => {
                    let p = adapter.unwrap().params();
                    let xv = x.dot(&p.matrix(v));
                    general_mat_mul(1.0, &xv, &p.matrix(u).t(), 1.0, &mut z);
                    Some(xv)
                }
                None => None,
            };
            if l < hidden {
                let mut h = z.mapv(gelu);
                if let Some(s) = &film {
                    let sigma = s.slice(s![2 * l * width..(2 * l + 1) * width]);
                    let mu = s.slice(s![(2 * l + 1) * width..(2 * l + 2) * width]);
                    h *= &sigma;
                    h += &mu;
                }
                let next = h;
                if keep_tape {
                    tape.inputs.push(std::mem::replace(&mut x, next));
                    tape.pre.push(z);
                    tape.lora_xv.push(xv);
                } else {
                    x = next;
                }
            } else {
                if keep_tape {
                    tape.inputs.push(x);
                    tape.lora_xv.push(xv);
                    tape.film = film;
                }
                return Ok((z, keep_tape.then_some(tape)));
            }
        }
        unreachable!("model always has an output layer")
    }

    /// Forward pass that records intermediates for [`FieldModel::backward`].
    pub fn forward_with_tape(
        &self,
        dirs: &[Direction],
        adapter: Option<&SubjectAdapter>,
    ) -> Result<(Array2<f64>, GradTape)> {
        let (out, tape) = self.run(dirs, adapter, true)?;
        Ok((out, tape.expect("tape requested")))
    }

    /// Accumulates gradients of a scalar loss given `d_out = dL/d(raw output)`.
    ///
    /// Gradients of shared parameters are added into `shared_grad` and those of the adapter
    /// into `adapter_grad`, each laid out like the corresponding [`super::ParamStore`];
    /// passing `None` skips that parameter set.
    pub fn backward(
        &self,
        tape: GradTape,
        d_out: Array2<f64>,
        adapter: Option<&SubjectAdapter>,
        mut shared_grad: Option<&mut [f64]>,
        mut adapter_grad: Option<&mut [f64]>,
    ) -> Result<()> {
        self.check_adapter(adapter)?;
        if d_out.nrows() != tape.batch || d_out.ncols() != self.config.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, expected ({}, {})",
                d_out.dim(),
                tape.batch,
                self.config.output_dim()
            )));
        }
        if let Some(g) = shared_grad.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Shape("shared gradient buffer size".into()));
            }
        }
        if let (Some(g), Some(a)) = (adapter_grad.as_deref(), adapter) {
            if g.len() != a.params().len() {
                return Err(Error::Shape("adapter gradient buffer size".into()));
            }
        }
        let adapter_grad_active = adapter.is_some() && adapter_grad.is_some();
        let hidden = self.config.hidden_layers;
        let width = self.config.hidden_width;
        let embeds_input = matches!(self.config.conditioning, Conditioning::Cbc { .. });
        let mut film_grad = tape.film.as_ref().map(|s| Array1::<f64>::zeros(s.len()));
        let mut d = d_out;

        for l in (0..self.layers.len()).rev() {
            let ids = self.layers[l];
            let x = &tape.inputs[l];
            let dz = if l < hidden {
                let pre = &tape.pre[l];
                if let (Some(s), Some(fg)) = (&tape.film, film_grad.as_mut()) {
                    let act = pre.mapv(gelu);
                    let dsigma = (&d * &act).sum_axis(Axis(0));
                    let dmu = d.sum_axis(Axis(0));
                    fg.slice_mut(s![2 * l * width..(2 * l + 1) * width])
                        .assign(&dsigma);
                    fg.slice_mut(s![(2 * l + 1) * width..(2 * l + 2) * width])
                        .assign(&dmu);
                    d *= &s.slice(s![2 * l * width..(2 * l + 1) * width]);
                }
                ndarray::Zip::from(&mut d)
                    .and(pre)
                    .for_each(|g, &p| *g *= gelu_derivative(p));
                d
            } else {
                d
            };

            let adapter_bias = adapter.and_then(|a| a.bias_id(l));
            if let Some(g) = shared_grad.as_deref_mut() {
                let mut ga = self.params.grad_matrix(g, ids.weight);
                general_mat_mul(1.0, &dz.t(), x, 1.0, &mut ga);
                if adapter_bias.is_none() {
                    let mut gb = self.params.grad_vector(g, ids.bias);
                    gb += &dz.sum_axis(Axis(0));
                }
            }
            let mut dxv = None;
            if let (Some(a), Some(g)) = (adapter, adapter_grad.as_deref_mut()) {
                if let Some(id) = adapter_bias {
                    let mut gb = a.params().grad_vector(g, id);
                    gb += &dz.sum_axis(Axis(0));
                }
                if let (Some((u, v)), Some(xv)) = (a.lora_ids(l), tape.lora_xv[l].as_ref()) {
                    let p = a.params();
                    let mut gu = p.grad_matrix(g, u);
                    general_mat_mul(1.0, &dz.t(), xv, 1.0, &mut gu);
                    let d_xv = dz.dot(&p.matrix(u));
                    let mut gv = p.grad_matrix(g, v);
                    general_mat_mul(1.0, &x.t(), &d_xv, 1.0, &mut gv);
                    dxv = Some(d_xv);
                }
            }
            if dxv.is_none() {
                if let Some((u, _)) = adapter.and_then(|a| a.lora_ids(l)) {
                    dxv = Some(dz.dot(&adapter.expect("lora adapter").params().matrix(u)));
                }
            }
            if l == 0 && !(embeds_input && adapter_grad_active) {
                break;
            }
            let mut dx = dz.dot(&self.params.matrix(ids.weight));
            if let (Some(d_xv), Some(a)) = (dxv, adapter) {
                let (_, v) = a.lora_ids(l).expect("lora adapter");
                general_mat_mul(1.0, &d_xv, &a.params().matrix(v).t(), 1.0, &mut dx);
            }
            if l == 0 {
                // only the embedding columns of the input are trainable
                let a = adapter.expect("active adapter");
                let g = adapter_grad.as_deref_mut().expect("active adapter");
                let enc_dim = self.rff.output_dim();
                let dz_sum = dx.slice(s![.., enc_dim..]).sum_axis(Axis(0));
                let mut gz = a.params().grad_vector(g, super::TensorId(0));
                gz += &dz_sum;
                break;
            }
            d = dx;
        }

        if let (Some(fg), Some(ids)) = (film_grad, self.film_ids()) {
            let z: Array1<f64> = adapter
                .and_then(|a| a.embedding())
                .map(|z| Array1::from(z.to_vec()))
                .unwrap_or_else(|| Array1::zeros(self.params.info(ids.weight).shape[1]));
            if let Some(g) = shared_grad {
                let mut gw = self.params.grad_matrix(g, ids.weight);
                let outer = fg.view().insert_axis(Axis(1)).dot(&z.view().insert_axis(Axis(0)));
                gw += &outer;
                let mut gb = self.params.grad_vector(g, ids.bias);
                gb += &fg;
            }
            if let (Some(a), Some(g)) = (adapter, adapter_grad) {
                let gz_add = self.params.matrix(ids.weight).t().dot(&fg);
                let mut gz = a.params().grad_vector(g, super::TensorId(0));
                gz += &gz_add;
            }
        }
        Ok(())
    }
}
