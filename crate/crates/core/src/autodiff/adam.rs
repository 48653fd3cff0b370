use serde::{Deserialize, Serialize};

use super::graph::Gradients;
use super::params::{ParamId, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction, default betas/eps, one state per parameter
/// group (policy, each critic, temperature).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    ids: Vec<ParamId>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Params, ids: Vec<ParamId>, lr: f64) -> Self {
        let m = ids
            .iter()
            .map(|&id| {
                let p = params.get(id);
                Tensor::zeros(p.rows(), p.cols())
            })
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            ids,
            m,
            v,
        }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter in this group.
    pub fn apply(&mut self, params: &mut Params, grads: &Gradients) -> Result<()> {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, &id) in self.ids.iter().enumerate() {
            let g = grads.for_param(params, id);
            let p = params.get_mut(id);
            if g.shape() != p.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape(),
                    rhs: g.shape(),
                });
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for ((pv, gv), (mv, vv)) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
