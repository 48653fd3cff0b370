//! Finite-difference gradient checking, the test oracle for everything the
//! tape computes.

use super::graph::{Graph, NodeId};
use super::params::{ParamId, Params};
use crate::error::Result;

/// Max over all coordinates of
/// `|analytic - central| / max(1e-8, |central|)` where `central` is the
/// central finite difference of `f` at the current parameter values.
///
/// `f` must build the scalar loss through a fresh graph on every call and
/// must be deterministic (pass any sampling noise in as constants).
pub fn grad_check<F>(params: &mut Params, ids: &[ParamId], f: F, eps: f64) -> Result<f64>
where
    F: Fn(&Params, &mut Graph) -> Result<NodeId>,
{
    let mut graph = Graph::new(params.len());
    let loss = f(params, &mut graph)?;
    let grads = graph.backward(loss)?;
    let analytic: Vec<_> = ids.iter().map(|&id| grads.for_param(params, id)).collect();
    drop(graph);

    let mut max_rel = 0.0f64;
    for (k, &id) in ids.iter().enumerate() {
        for i in 0..params.get(id).len() {
            let orig = params.get(id).data()[i];

            params.get_mut(id).data_mut()[i] = orig + eps;
            let mut g = Graph::new(params.len());
            let node = f(params, &mut g)?;
            let plus = g.value(node).item();

            params.get_mut(id).data_mut()[i] = orig - eps;
            let mut g = Graph::new(params.len());
            let node = f(params, &mut g)?;
            let minus = g.value(node).item();

            params.get_mut(id).data_mut()[i] = orig;

            let central = (plus - minus) / (2.0 * eps);
            let a = analytic[k].data()[i];
            let rel = (a - central).abs() / central.abs().max(1e-8);
            if !rel.is_finite() {
                return Ok(f64::INFINITY);
            }
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
