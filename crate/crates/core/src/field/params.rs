use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use serde::{Deserialize, Serialize};

/// Handle to one tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Whether decoupled weight decay applies (weight matrices only).
    pub decay: bool,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named tensors packed into one flat `f64` buffer.
///
/// Optimizers and gradient buffers work on the flat buffer; layers read matrix views.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    infos: Vec<TensorInfo>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        decay: bool,
        values: impl IntoIterator<Item = f64>,
    ) -> TensorId {
        let offset = self.values.len();
        let info = TensorInfo {
            name: name.into(),
            shape: shape.to_vec(),
            offset,
            decay,
        };
        let n = info.len();
        self.values.extend(values.into_iter().take(n));
        assert_eq!(self.values.len(), offset + n, "tensor {} underfilled", info.name);
        self.infos.push(info);
        TensorId(self.infos.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.infos
    }

    pub fn info(&self, id: TensorId) -> &TensorInfo {
        &self.infos[id.0]
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.infos.iter().position(|t| t.name == name).map(TensorId)
    }

    pub fn slice(&self, id: TensorId) -> &[f64] {
        let t = &self.infos[id.0];
        &self.values[t.offset..t.offset + t.len()]
    }

    pub fn slice_mut(&mut self, id: TensorId) -> &mut [f64] {
        let t = &self.infos[id.0];
        let (o, n) = (t.offset, t.len());
        &mut self.values[o..o + n]
    }

    pub fn vector(&self, id: TensorId) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.slice(id))
    }

    pub fn matrix(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let t = &self.infos[id.0];
        ArrayView2::from_shape((t.shape[0], t.shape[1]), self.slice(id)).expect("2-d tensor")
    }

    /// Mask with one entry per scalar: true where weight decay applies.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.values.len()];
        for t in &self.infos {
            if t.decay {
                mask[t.offset..t.offset + t.len()].fill(true);
            }
        }
        mask
    }

    /// Rounds every value to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    pub(crate) fn grad_vector<'a>(&self, grad: &'a mut [f64], id: TensorId) -> ArrayViewMut1<'a, f64> {
        let t = &self.infos[id.0];
        ArrayViewMut1::from(&mut grad[t.offset..t.offset + t.len()])
    }

    pub(crate) fn grad_matrix<'a>(&self, grad: &'a mut [f64], id: TensorId) -> ArrayViewMut2<'a, f64> {
        let t = &self.infos[id.0];
        ArrayViewMut2::from_shape((t.shape[0], t.shape[1]), &mut grad[t.offset..t.offset + t.len()])
            .expect("2-d tensor")
    }

    /// Rebuilds a store from tensor descriptors and a flat buffer.
    pub(crate) fn from_parts(infos: Vec<TensorInfo>, values: Vec<f64>) -> Option<Self> {
        let mut expected = 0;
        for t in &infos {
            if t.offset != expected {
                return None;
            }
            expected += t.len();
        }
        (expected == values.len()).then_some(Self { values, infos })
    }
}
