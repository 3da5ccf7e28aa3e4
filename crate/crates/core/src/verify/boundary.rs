use nalgebra::DMatrix;
use rayon::prelude::*;

use super::barrier::Face;
use super::stencil::{derivatives_at, require_one_sided};
use super::argmax;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::{check_grid, discrete_jet, GridField};
use crate::structure::{argmin, CertificateReport, Witness};
use crate::symfun::{matrix_f_grad, tridiagonal_coefficients, sk_derivative_from, SymMat};

/// Expansion of `S_k(W)` along the row and column `axis`:
/// `S_k(W) = w_nn S_{k-1}(W') + R`, `R = S_k(W') - b^T [dS_{k-1}/dW'](W') b`,
/// with `W'` the complementary block and `b` the off-diagonal part of the
/// row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub w_nn: f64,
    pub s_km1: f64,
    pub r: f64,
    /// `w_nn S_{k-1}(W') + R`.
    pub lhs: f64,
}

pub fn decompose(w: &SymMat, k: usize, axis: usize) -> Result<Decomposition> {
    let n = w.dim();
    if k == 0 || k > n || axis >= n {
        return Err(Error::Domain(format!("decomposition needs 1 <= k <= n and axis < n (n = {n}, k = {k}, axis = {axis})")));
    }
    let rest: Vec<usize> = (0..n).filter(|&i| i != axis).collect();
    let b: Vec<f64> = rest.iter().map(|&i| w.get(axis, i)).collect();
    let wp = w.principal(&rest);
    let s = if rest.is_empty() {
        let mut s = vec![0.0; k + 1];
        s[0] = 1.0;
        s
    } else {
        tridiagonal_coefficients(&wp, k)
    };
    let s_km1 = s[k - 1];
    let quad = if k >= 2 {
        let t = sk_derivative_from(&wp, &s, k - 1);
        let bv = nalgebra::DVector::from_column_slice(&b);
        (bv.transpose() * t.matrix() * &bv)[(0, 0)]
    } else {
        0.0
    };
    let r = s[k] - quad;
    let w_nn = w.get(axis, axis);
    Ok(Decomposition { w_nn, s_km1, r, lhs: w_nn * s_km1 + r })
}

/// Face nodes not lying on any other face.
fn face_nodes(u: &GridField, face: Face) -> Vec<usize> {
    (0..u.len())
        .filter(|&node| {
            let idx = u.multi_index(node);
            idx.iter().enumerate().all(|(d, &i)| {
                if d == face.axis {
                    match face.side {
                        super::Side::Lo => i == 0,
                        super::Side::Hi => i + 1 == u.m[d],
                    }
                } else {
                    i > 0 && i + 1 < u.m[d]
                }
            })
        })
        .collect()
}

/// The decomposition at the nodes of one face, with `W` built from
/// one-sided normal stencils. The margin is `budget - max |LHS - B|`;
/// `identity_error` records the algebraic check against direct `S_k(W)` and
/// `dnn_gap` compares `D_nn u` with its value recovered by inverting the
/// decomposition where `S_{k-1}(W') >= 0.1`.
pub fn boundary_decomposition_check(u: &GridField, prob: &ProblemSpec, face: Face, budget: f64) -> Result<CertificateReport> {
    check_grid(u, prob)?;
    require_one_sided(u)?;
    face.validate(u.n)?;
    let nodes = face_nodes(u, face);
    if nodes.is_empty() {
        return Err(Error::Empty("face carries no nodes away from its edges".into()));
    }
    let k = prob.k;
    let rows: Vec<(f64, f64, Option<f64>)> = nodes
        .par_iter()
        .map(|&node| {
            let (du, d2) = derivatives_at(u, node);
            let x = u.coord(node);
            let z = u.values[node];
            let a = prob.a.eval(&x, z, &du)?;
            let w = SymMat::symmetrized(d2.clone() - a.matrix());
            let dec = decompose(&w, k, face.axis)?;
            let sk = tridiagonal_coefficients(&w, k)[k];
            let b = prob.b.eval(&x, z, &du)?;
            let id_err = (dec.lhs - sk).abs() / (1.0 + sk.abs());
            let dnn = (dec.s_km1 >= 0.1).then(|| {
                let recovered = a.get(face.axis, face.axis) + (b - dec.r) / dec.s_km1;
                (recovered - d2[(face.axis, face.axis)]).abs()
            });
            Ok(((dec.lhs - b).abs(), id_err, dnn))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let w = argmax(&gaps).expect("non-empty");
    let id_max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let dnn: Vec<f64> = rows.iter().filter_map(|r| r.2).collect();
    let witness = Witness { x: Some(u.coord(nodes[w])), node: Some(u.multi_index(nodes[w])), ..Default::default() };
    let mut rep = CertificateReport::from_margin("boundary_decomposition", budget - gaps[w], Some(witness), 0.0, nodes.len())
        .with_extra("max_gap", gaps[w])
        .with_extra("identity_error", id_max)
        .with_extra("budget", budget);
    if !dnn.is_empty() {
        rep = rep.with_extra("dnn_gap", dnn.iter().copied().fold(0.0, f64::max)).with_extra("dnn_nodes", dnn.len() as f64);
    }
    Ok(rep)
}

/// `max_{beta != n} |F^{beta j} w_{nj}|` with `n` the last index. Asserted
/// only for diagonal `W`; for other matrices the residual is recorded and
/// the verdict is inconclusive.
pub fn tangential_frame_check(w: &SymMat, k: usize, tol: f64) -> Result<CertificateReport> {
    let n = w.dim();
    let (_, fij) = matrix_f_grad(w, k)?;
    let prod: DMatrix<f64> = fij.matrix() * w.matrix();
    let last = n - 1;
    let residual = (0..last).map(|b| prod[(b, last)].abs()).fold(0.0, f64::max);
    let off = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| w.get(i, j).abs()).fold(0.0, f64::max);
    let rep = if off == 0.0 {
        CertificateReport::from_margin("tangential_frame", -residual, None, tol, 1)
    } else {
        let mut r = CertificateReport::inconclusive("tangential_frame", tol, "non-diagonal frame: residual recorded, not asserted");
        r.margin = -residual;
        r.samples = 1;
        r
    };
    Ok(rep.with_extra("residual", residual).with_extra("max_off_diagonal", off))
}

/// `min tr(W_h)` over interior nodes; holds iff it is `>= -tol`.
pub fn trace_ellipticity_check(u: &GridField, prob: &ProblemSpec, tol: f64) -> Result<CertificateReport> {
    let jet = discrete_jet(u, prob)?;
    let traces: Vec<f64> = jet.w.iter().map(SymMat::trace).collect();
    let i = argmin(&traces).ok_or_else(|| Error::Empty("grid has no interior nodes".into()))?;
    let node = jet.nodes[i];
    let witness = Witness { x: Some(u.coord(node)), node: Some(u.multi_index(node)), ..Default::default() };
    let mut rep = CertificateReport::from_margin("trace_ellipticity", traces[i], Some(witness), tol, traces.len());
    if traces[i].abs() <= tol {
        rep.note = Some("minimum on the boundary of Gamma_1".into());
    }
    Ok(rep)
}
