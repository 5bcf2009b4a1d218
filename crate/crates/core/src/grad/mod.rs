//! Log-spectral loss with analytic gradients, and the RAdam / AdamW optimizers.

mod optim;

use ndarray::Array2;

pub use optim::{adamw_step, radam_step, AdamHyper, OptimizerKind, OptimizerState};

use crate::dataset::Direction;
use crate::error::{Error, Result};
use crate::field::{FieldModel, SubjectAdapter};

/// Which parameters receive gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainable {
    /// Shared parameters, plus the adapter if one is given.
    All,
    /// Shared parameters only.
    Shared,
    /// Adapter parameters only; the shared model is frozen.
    Adapter,
}

/// Gradients of one loss evaluation, laid out like the parameter stores.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub shared: Option<Vec<f64>>,
    pub adapter: Option<Vec<f64>>,
}

fn check_targets(model: &FieldModel, n: usize, targets: &Array2<f64>) -> Result<()> {
    if n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let width = 2 * model.grid().bins();
    if targets.dim() != (n, width) {
        return Err(Error::Shape(format!(
            "targets are {:?}, expected ({n}, {width})",
            targets.dim()
        )));
    }
    if let Some((idx, _)) = targets.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "target of direction {} is not finite at bin {}",
            idx.0, idx.1
        )));
    }
    Ok(())
}

fn mse(pred: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    let loss = ndarray::Zip::from(pred)
        .and(targets)
        .fold(0.0, |acc, p, t| acc + (p - t) * (p - t))
        / pred.len() as f64;
    if !loss.is_finite() {
        let bin = pred
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(i, _)| format!(" (direction {}, bin {})", i.0, i.1))
            .unwrap_or_default();
        return Err(Error::NonFinite(format!("loss is not finite{bin}")));
    }
    Ok(loss)
}

/// Mean squared dB error over directions, ears and one-sided bins.
///
/// `targets` rows hold left-ear bins followed by right-ear bins.
pub fn loss(
    model: &FieldModel,
    adapter: Option<&SubjectAdapter>,
    dirs: &[Direction],
    targets: &Array2<f64>,
) -> Result<f64> {
    check_targets(model, dirs.len(), targets)?;
    mse(&model.predict_db(dirs, adapter)?, targets)
}

/// Loss and its gradient with respect to the selected parameters.
pub fn loss_and_grad(
    model: &FieldModel,
    adapter: Option<&SubjectAdapter>,
    dirs: &[Direction],
    targets: &Array2<f64>,
    trainable: Trainable,
) -> Result<(f64, Gradients)> {
    check_targets(model, dirs.len(), targets)?;
    if trainable == Trainable::Adapter && adapter.is_none() {
        return Err(Error::Config("adapter-only training needs an adapter".into()));
    }
    let (raw, tape) = model.forward_with_tape(dirs, adapter)?;
    let pred = model.head_db(&raw)?;
    let loss = mse(&pred, targets)?;
    let scale = 2.0 / pred.len() as f64;
    let d_db = (&pred - targets) * scale;
    let d_raw = model.head_backward(&raw, &d_db)?;

    let mut grads = Gradients::default();
    if trainable != Trainable::Adapter {
        grads.shared = Some(vec![0.0; model.params().len()]);
    }
    if trainable != Trainable::Shared {
        grads.adapter = adapter.map(|a| vec![0.0; a.param_count()]);
    }
    model.backward(
        tape,
        d_raw,
        adapter,
        grads.shared.as_deref_mut(),
        grads.adapter.as_deref_mut(),
    )?;
    Ok((loss, grads))
}
