use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::BarrierParams;
use super::stencil::{derivatives_at, require_one_sided};
use super::argmax;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::{check_grid, discrete_jet, GridField};
use crate::symfun::{matrix_f_grad, SymMat};

/// Second-derivative sizes of a grid field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateAudit {
    /// `max |D^2 u|` (spectral norm) over interior nodes, central stencils.
    pub sup_interior: f64,
    /// Same over boundary nodes, one-sided stencils.
    pub sup_boundary: f64,
    /// `sup_interior / (1 + sup_boundary)`.
    pub c_emp: f64,
    pub argmax_interior: Vec<usize>,
    pub argmax_boundary: Vec<usize>,
    pub interior_nodes: usize,
    pub boundary_nodes: usize,
}

pub fn d2_stats(u: &GridField, prob: &ProblemSpec) -> Result<EstimateAudit> {
    check_grid(u, prob)?;
    require_one_sided(u)?;
    let norms = |nodes: &[usize]| -> Vec<f64> {
        nodes.par_iter().map(|&i| SymMat::symmetrized(derivatives_at(u, i).1).spectral_norm()).collect()
    };
    let (inner, outer) = (u.interior_nodes(), u.boundary_nodes());
    let (ni, nb) = (norms(&inner), norms(&outer));
    let wi = argmax(&ni).ok_or_else(|| Error::Empty("grid has no interior nodes".into()))?;
    let wb = argmax(&nb).expect("boundary is never empty");
    let c_emp = ni[wi] / (1.0 + nb[wb]);
    if !c_emp.is_finite() {
        return Err(Error::NonFinite("second derivatives of the field".into()));
    }
    Ok(EstimateAudit {
        sup_interior: ni[wi],
        sup_boundary: nb[wb],
        c_emp,
        argmax_interior: u.multi_index(inner[wi]),
        argmax_boundary: u.multi_index(outer[wb]),
        interior_nodes: inner.len(),
        boundary_nodes: outer.len(),
    })
}

/// Maximum of `v = log w_max + eta(|Du|^2 / 2) + b phi` over interior
/// nodes, `phi = exp(K (u_sub - u))`, `eta(t) = a (1 + t)^2 / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryProbe {
    pub max_value: f64,
    pub argmax: Vec<usize>,
    /// `a` actually used: the requested value capped by `1 / (1 + t_max)^2`
    /// so that `eta'' - eta'^2 >= 0` on the observed range of `t`.
    pub a: f64,
    pub t_max: f64,
    /// Largest eigenvalue of `W` at the maximum.
    pub w_max: f64,
    /// Sizes of `{i : w_ii <= -theta w_11}` and `{i > 1 : w_ii > -theta w_11}`
    /// in the eigenframe at the maximum.
    pub index_i: usize,
    pub index_j: usize,
    /// `F^{11}` and `sum F^{ii}` at the maximum, when `W` is in the open cone.
    pub f11: Option<f64>,
    pub trace_f: Option<f64>,
}

pub fn auxiliary_probe(u: &GridField, u_sub: &GridField, prob: &ProblemSpec, params: &BarrierParams) -> Result<AuxiliaryProbe> {
    params.validate()?;
    u_sub.require_same_grid(u)?;
    let jet = discrete_jet(u, prob)?;
    let t: Vec<f64> = jet.du.iter().map(|p| 0.5 * p.iter().map(|v| v * v).sum::<f64>()).collect();
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let a = params.a.min(1.0 / ((1.0 + t_max) * (1.0 + t_max)));
    let mut values = Vec::with_capacity(jet.nodes.len());
    for (i, &node) in jet.nodes.iter().enumerate() {
        let lmax = jet.w[i].eigenvalues().values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lmax > 0.0) {
            return Err(Error::InadmissibleAt { x: u.coord(node), j: 1, margin: jet.w[i].trace() });
        }
        let phi = (params.k * (u_sub.values[node] - u.values[node])).exp();
        values.push(lmax.ln() + 0.5 * a * (1.0 + t[i]).powi(2) + params.b * phi);
    }
    let w = argmax(&values).ok_or_else(|| Error::Empty("grid has no interior nodes".into()))?;
    let (eig, vecs) = jet.w[w].eigen();
    let mut order: Vec<usize> = (0..eig.len()).collect();
    order.sort_by(|&x, &y| eig[y].total_cmp(&eig[x]));
    let w11 = eig[order[0]];
    let index_i = order.iter().filter(|&&i| eig[i] <= -params.theta * w11).count();
    let index_j = order.iter().skip(1).filter(|&&i| eig[i] > -params.theta * w11).count();
    let (f11, trace_f) = match matrix_f_grad(&jet.w[w], prob.k) {
        Ok((_, fij)) => {
            let e1 = vecs.column(order[0]);
            (Some((e1.transpose() * fij.matrix() * e1)[(0, 0)]), Some(fij.trace()))
        }
        Err(_) => (None, None),
    };
    Ok(AuxiliaryProbe {
        max_value: values[w],
        argmax: u.multi_index(jet.nodes[w]),
        a,
        t_max,
        w_max: w11,
        index_i,
        index_j,
        f11,
        trace_f,
    })
}
