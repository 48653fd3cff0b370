use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

pub type ParamId = usize;

/// Flat store of all learnable tensors. Networks keep [`ParamId`] handles
/// into one shared store; optimizer state and target-network layouts are
/// expressed as id lists over it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Params {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Params {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// `dst[i] <- (1 - tau) * dst[i] + tau * src[i]`, elementwise over the
    /// paired id lists.
    pub fn soft_update(&mut self, dst: &[ParamId], src: &[ParamId], tau: f64) {
        assert_eq!(dst.len(), src.len(), "mismatched target layouts");
        for (&d, &s) in dst.iter().zip(src) {
            assert_eq!(
                self.tensors[d].shape(),
                self.tensors[s].shape(),
                "soft_update shape mismatch"
            );
            let src_vals = self.tensors[s].data().to_vec();
            for (t, p) in self.tensors[d].data_mut().iter_mut().zip(src_vals) {
                *t = (1.0 - tau) * *t + tau * p;
            }
        }
    }

    /// Copy values from `src` ids into `dst` ids (hard target sync).
    pub fn copy_values(&mut self, dst: &[ParamId], src: &[ParamId]) {
        self.soft_update(dst, src, 1.0);
    }
}

impl Default for Params {
    fn default() -> Self {
        Self::new()
    }
}
