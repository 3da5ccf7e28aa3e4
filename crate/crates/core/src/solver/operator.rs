use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridField;
use crate::error::{Error, Result};
use crate::model::{AJet, BtildeJet, ProblemSpec};
use crate::symfun::{matrix_elem_sym_all, matrix_f_grad, ConeClass, ConeLabel, SymMat};

/// Central-difference derivatives at the interior nodes of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJet {
    /// Flat indices of the interior nodes, in lexicographic order.
    pub nodes: Vec<usize>,
    pub du: Vec<Vec<f64>>,
    pub d2u: Vec<SymMat>,
    /// `W_h = D^2 u_h - A(x, u, Du_h)`.
    pub w: Vec<SymMat>,
}

pub(crate) fn check_grid(u: &GridField, prob: &ProblemSpec) -> Result<()> {
    if u.n != prob.n || u.lo != prob.domain.lo || u.hi != prob.domain.hi {
        return Err(Error::GridMismatch(format!(
            "field lives on [{:?}, {:?}], problem box is [{:?}, {:?}]",
            u.lo, u.hi, prob.domain.lo, prob.domain.hi
        )));
    }
    if let Some(d) = u.m.iter().position(|&c| c < 3) {
        return Err(Error::GridMismatch(format!("axis {d} has {} nodes, difference stencils need 3", u.m[d])));
    }
    Ok(())
}

/// Gradient and Hessian by central differences at an interior node. Mixed
/// entries use the four-point cross.
pub(crate) fn node_derivatives(u: &GridField, node: usize, h: &[f64], strides: &[usize]) -> (Vec<f64>, DMatrix<f64>) {
    let n = u.n;
    let v = &u.values;
    let c = v[node];
    let mut du = vec![0.0; n];
    let mut d2 = DMatrix::zeros(n, n);
    for d in 0..n {
        let (p, m) = (v[node + strides[d]], v[node - strides[d]]);
        du[d] = (p - m) / (2.0 * h[d]);
        d2[(d, d)] = (p - 2.0 * c + m) / (h[d] * h[d]);
        for e in (d + 1)..n {
            let (sd, se) = (strides[d], strides[e]);
            let val = (v[node + sd + se] - v[node + sd - se] - v[node - sd + se] + v[node - sd - se]) / (4.0 * h[d] * h[e]);
            d2[(d, e)] = val;
            d2[(e, d)] = val;
        }
    }
    (du, d2)
}

pub fn discrete_jet(u: &GridField, prob: &ProblemSpec) -> Result<DiscreteJet> {
    check_grid(u, prob)?;
    let (h, strides) = (u.h(), u.strides());
    let nodes = u.interior_nodes();
    let parts: Vec<(Vec<f64>, SymMat, SymMat)> = nodes
        .par_iter()
        .map(|&node| {
            let (du, d2) = node_derivatives(u, node, &h, &strides);
            let x = u.coord(node);
            let a = prob.a.eval(&x, u.values[node], &du)?;
            let w = SymMat::symmetrized(&d2 - a.matrix());
            Ok((du, SymMat::symmetrized(d2), w))
        })
        .collect::<Result<_>>()?;
    let mut jet = DiscreteJet { nodes, du: vec![], d2u: vec![], w: vec![] };
    for (du, d2, w) in parts {
        jet.du.push(du);
        jet.d2u.push(d2);
        jet.w.push(w);
    }
    Ok(jet)
}

/// Right-hand side `(1 - t) base + t B~` used along the homotopy.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Target<'a> {
    pub t: f64,
    pub base: Option<&'a [f64]>,
}

impl Target<'_> {
    pub const FINAL: Target<'static> = Target { t: 1.0, base: None };

    fn blend(&self, i: usize, btilde: f64) -> f64 {
        match self.base {
            Some(b) => (1.0 - self.t) * b[i] + self.t * btilde,
            None => btilde,
        }
    }

    fn weight(&self) -> f64 {
        if self.base.is_some() {
            self.t
        } else {
            1.0
        }
    }
}

/// Everything the residual and linearization need at one interior node.
#[derive(Debug, Clone)]
pub(crate) struct NodeEval {
    pub f: f64,
    pub cone: ConeClass,
    pub fij: Option<SymMat>,
    pub a: Option<AJet>,
    pub bt: BtildeJet,
}

impl NodeEval {
    /// Smallest `S_j(W)`, `j <= k`.
    pub fn cone_margin(&self) -> f64 {
        self.cone.worst().1
    }
}

pub(crate) fn evaluate_nodes(u: &GridField, prob: &ProblemSpec, linearize: bool) -> Result<(Vec<usize>, Vec<NodeEval>)> {
    check_grid(u, prob)?;
    let (h, strides) = (u.h(), u.strides());
    let nodes = u.interior_nodes();
    let k = prob.k;
    let evals = nodes
        .par_iter()
        .map(|&node| {
            let (du, d2) = node_derivatives(u, node, &h, &strides);
            let x = u.coord(node);
            let z = u.values[node];
            let order = if linearize { 1 } else { 0 };
            let a = prob.a.jet(&x, z, &du, order)?;
            let w = SymMat::symmetrized(d2 - a.value.matrix());
            let s = matrix_elem_sym_all(&w, k)?;
            let tol = crate::symfun::default_cone_tol_matrix(&w);
            let cone = ConeClass { label: label_of(&s[1..], tol), margins: s[1..].to_vec(), tol };
            if cone.label == ConeLabel::Outside {
                let (j, margin) = cone.worst();
                return Err(Error::AdmissibilityLost { node: u.multi_index(node), j, margin });
            }
            let bt = prob.b.btilde_jet(k, &x, z, &du, order)?;
            let (f, fij) = if linearize {
                let (f, fij) = matrix_f_grad(&w, k).map_err(|_| {
                    let (j, margin) = cone.worst();
                    Error::AdmissibilityLost { node: u.multi_index(node), j, margin }
                })?;
                (f, Some(fij))
            } else {
                (s[k].max(0.0).powf(1.0 / k as f64), None)
            };
            Ok(NodeEval { f, cone, fij, a: linearize.then_some(a), bt })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((nodes, evals))
}

fn label_of(margins: &[f64], tol: f64) -> ConeLabel {
    if margins.iter().all(|&m| m > tol) {
        ConeLabel::Interior
    } else if margins.iter().any(|&m| m < -tol) {
        ConeLabel::Outside
    } else {
        ConeLabel::Boundary
    }
}

pub(crate) fn residual_from(evals: &[NodeEval], target: Target<'_>) -> Vec<f64> {
    evals.iter().enumerate().map(|(i, e)| e.f - target.blend(i, e.bt.value)).collect()
}

/// `r = f(W_h) - B~(x, u, Du_h)` at the interior nodes (lexicographic order).
pub fn residual(u: &GridField, prob: &ProblemSpec) -> Result<Vec<f64>> {
    let (_, evals) = evaluate_nodes(u, prob, false)?;
    Ok(residual_from(&evals, Target::FINAL))
}

/// Which linearization to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorVariant {
    /// `F^{ij} (D_ij - D_{p_k} A_ij D_k)`.
    L,
    /// `L - B~_{p_k} D_k`.
    Drift,
    /// `Drift - (F^{ij} D_z A_ij + B~_z)`: the Jacobian of the residual.
    FullNewton,
}

/// Stencil rows of a linearized operator. Each interior node owns one row of
/// `(global node, weight)` pairs, boundary neighbours included, so the
/// operator can act on fields with nonzero boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperator {
    pub variant: OperatorVariant,
    pub m: Vec<usize>,
    pub nodes: Vec<usize>,
    pub rows: Vec<Vec<(usize, f64)>>,
    /// `sum_i F^{ii}` per interior node.
    pub trace_f: Vec<f64>,
}

impl LinearizedOperator {
    /// Action on a full-grid vector; returns interior values.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, w)| w * v[j]).sum()).collect()
    }

    /// Interior-to-interior block as triplets `(row, col, value)`.
    pub fn interior_triplets(&self) -> Vec<(usize, usize, f64)> {
        let total: usize = self.m.iter().product();
        let mut unknown = vec![usize::MAX; total];
        for (i, &node) in self.nodes.iter().enumerate() {
            unknown[node] = i;
        }
        let mut out = Vec::with_capacity(self.rows.iter().map(Vec::len).sum());
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                if unknown[j] != usize::MAX {
                    out.push((r, unknown[j], w));
                }
            }
        }
        out
    }
}

pub(crate) fn assemble_from(
    u: &GridField,
    nodes: &[usize],
    evals: &[NodeEval],
    variant: OperatorVariant,
    target: Target<'_>,
) -> Result<LinearizedOperator> {
    let n = u.n;
    let (h, strides) = (u.h(), u.strides());
    let tw = target.weight();
    let mut rows = Vec::with_capacity(nodes.len());
    let mut trace_f = Vec::with_capacity(nodes.len());
    for (&node, e) in nodes.iter().zip(evals) {
        let fij = e.fij.as_ref().expect("linearized evaluation").matrix();
        let a = e.a.as_ref().expect("linearized evaluation");
        let mut b = vec![0.0; n];
        for (kk, dak) in a.dp.iter().enumerate() {
            b[kk] = -fij.component_mul(dak).sum();
        }
        let mut c = 0.0;
        if variant != OperatorVariant::L {
            for kk in 0..n {
                b[kk] -= tw * e.bt.dp[kk];
            }
        }
        if variant == OperatorVariant::FullNewton {
            let dz = a.dz.as_ref().ok_or_else(|| Error::MissingDerivative("D_z A".into()))?;
            c = -fij.component_mul(dz).sum() - tw * e.bt.dz;
        }
        let mut row = Vec::with_capacity(1 + 2 * n + 2 * n * (n - 1));
        let mut center = c;
        for d in 0..n {
            let s = fij[(d, d)] / (h[d] * h[d]);
            center -= 2.0 * s;
            let g = b[d] / (2.0 * h[d]);
            row.push((node + strides[d], s + g));
            row.push((node - strides[d], s - g));
        }
        for d in 0..n {
            for ee in (d + 1)..n {
                let w = 2.0 * fij[(d, ee)] / (4.0 * h[d] * h[ee]);
                let (sd, se) = (strides[d], strides[ee]);
                row.push((node + sd + se, w));
                row.push((node + sd - se, -w));
                row.push((node - sd + se, -w));
                row.push((node - sd - se, w));
            }
        }
        row.insert(0, (node, center));
        rows.push(row);
        trace_f.push(fij.trace());
    }
    Ok(LinearizedOperator { variant, m: u.m.clone(), nodes: nodes.to_vec(), rows, trace_f })
}

/// Discrete linearized operator at `u`.
pub fn assemble_linearized(u: &GridField, prob: &ProblemSpec, variant: OperatorVariant) -> Result<LinearizedOperator> {
    let (nodes, evals) = evaluate_nodes(u, prob, true)?;
    assemble_from(u, &nodes, &evals, variant, Target::FINAL)
}
