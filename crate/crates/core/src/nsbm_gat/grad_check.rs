//! Finite-difference verification of the backward pass.

use serde::Serialize;

use super::network::{backward, forward_cached};
use super::params::ModelParams;
use crate::error::Result;
use crate::gev::nll_item;
use crate::scalar::Scalar;
use crate::scene_graph::SceneGraph;

/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates whose perturbation crossed an activation kink or changed a
    /// max-pool winner.
    pub skipped: usize,
}

/// NLL of one observation and its backpropagated weight gradient.
pub fn loss_and_grad<F: Scalar>(
    m: &ModelParams<F>,
    graph: &SceneGraph<F>,
    z: F,
) -> Result<(F, ModelParams<F>)> {
    let cache = forward_cached(graph, m)?;
    let it = nll_item(z, cache.params);
    let mut grads = m.zeros_like();
    backward(&cache, m, [it.d_xi_raw, it.d_sigma_raw, it.d_mu], &mut grads);
    Ok((it.nll, grads))
}

/// Central differences with step `h` for every weight.
pub fn grad_check<F: Scalar>(
    m: &ModelParams<F>,
    graph: &SceneGraph<F>,
    z: F,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_grad(m, graph, z)?;
    let base_sig = forward_cached(graph, m)?.kink_signature();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        checked: 0,
        skipped: 0,
    };
    let hf = F::lit(h);
    let mut probe = m.clone();
    for (t, (name, tensor)) in m.tensors().into_iter().enumerate() {
        for i in 0..tensor.len() {
            let orig = tensor.data[i];
            let eval = |probe: &mut ModelParams<F>, v: F| -> Result<(F, Vec<u32>)> {
                probe.tensors_mut()[t].1.data[i] = v;
                let cache = forward_cached(graph, probe)?;
                Ok((nll_item(z, cache.params).nll, cache.kink_signature()))
            };
            let (lp, sp) = eval(&mut probe, orig + hf)?;
            let (lm, sm) = eval(&mut probe, orig - hf)?;
            probe.tensors_mut()[t].1.data[i] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = ((lp - lm) / (hf + hf)).as_f64();
            let analytic = grads.tensors()[t].1.data[i].as_f64();
            let denom = numeric.abs().max(analytic.abs()).max(GRAD_FLOOR);
            let rel = (numeric - analytic).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.to_string();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
