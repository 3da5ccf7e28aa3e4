//! Sampled certification of the structural hypotheses on `A`, `B`, the
//! boundary data and the domain.
//!
//! All checks falsify by sampling: a `Fails` verdict carries a concrete
//! witness, a `Holds` verdict only means no sampled margin fell below `-tol`.

mod frames;
mod report;
mod sampling;
mod transform;

pub use frames::{box_face_frames, ellipse_frames, sphere_frames, BoundaryFrame};
pub use report::{CertificateReport, Verdict, Witness, DEFAULT_TOL};
pub use sampling::{Sample, SamplingSpec};
pub use transform::{
    check_orthogonal, signed_permutation, transform_box, transform_coefficient, transform_field, transform_problem,
    transform_scalar, transform_source, Motion,
};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AJet, BoxDomain, CoefficientA, ProblemSpec, SourceB};
use crate::solver::{check_grid, node_derivatives, GridField};
use crate::symfun::{elem_sym, matrix_cone_classify, ConeLabel, SymMat};
pub(crate) use report::argmin;
use sampling::orthonormal_pair;

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymMat::symmetrized(m.clone()).min_eigenvalue()
}

/// `M(eta) = sum_kl eta_k eta_l D_{p_k p_l} A` and `N(xi)_kl = xi^T D_{p_k p_l} A xi`.
fn partial_forms(jet: &AJet, xi: &[f64], eta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = xi.len();
    let mut m = DMatrix::zeros(n, n);
    let mut nn = DMatrix::zeros(n, n);
    let xv = nalgebra::DVector::from_column_slice(xi);
    for k in 0..n {
        for l in 0..n {
            let t = jet.dpp(k, l);
            m += t * (eta[k] * eta[l]);
            nn[(k, l)] = (xv.transpose() * t * &xv)[(0, 0)];
        }
    }
    (m, nn)
}

/// Projected gradient descent for `A_{ij,kl} xi_i xi_j eta_k eta_l` over
/// orthonormal pairs, retracting by Gram-Schmidt after each step.
fn descend_pair(jet: &AJet, xi: &[f64], eta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut cur = (jet.codim_one_form(xi, eta), xi.to_vec(), eta.to_vec());
    let mut alpha = 0.25;
    for _ in 0..200 {
        let (m, nn) = partial_forms(jet, &cur.1, &cur.2);
        let gx = (&m * nalgebra::DVector::from_column_slice(&cur.1)) * 2.0;
        let gy = (&nn * nalgebra::DVector::from_column_slice(&cur.2)) * 2.0;
        if gx.norm() + gy.norm() < 1e-14 {
            break;
        }
        let mut improved = false;
        while alpha > 1e-12 {
            let a: Vec<f64> = cur.1.iter().zip(gx.iter()).map(|(v, g)| v - alpha * g).collect();
            let b: Vec<f64> = cur.2.iter().zip(gy.iter()).map(|(v, g)| v - alpha * g).collect();
            if let Some((x2, e2)) = orthonormal_pair(&a, &b) {
                let v = jet.codim_one_form(&x2, &e2);
                if v < cur.0 - 1e-15 * (1.0 + cur.0.abs()) {
                    cur = (v, x2, e2);
                    alpha *= 1.5;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    cur
}

/// Co-dimension one convexity of `A` in `p`: the margin at each sample is
/// `min A_{ij,kl} xi_i xi_j eta_k eta_l` over unit `xi` orthogonal to `eta`.
/// With `strict = Some(c0)` the margin is reduced by `c0` (the bound
/// `c0 |xi|^2 |eta|^2` on unit vectors).
pub fn check_regular(
    a: &CoefficientA,
    domain: &BoxDomain,
    s: &SamplingSpec,
    strict: Option<f64>,
    tol: f64,
) -> Result<CertificateReport> {
    s.validate()?;
    let n = domain.dim();
    let mut rng = s.rng();
    let points = s.points_with(domain, &mut rng);
    let pairs = s.pairs_for(n, points.len(), &mut rng);
    let results: Vec<(f64, Vec<f64>, Vec<f64>)> = points
        .par_iter()
        .zip(pairs.par_iter())
        .map(|(pt, prs)| {
            let jet = a.jet(&pt.x, pt.z, &pt.p, 2)?;
            let vals: Vec<f64> = prs.iter().map(|(x, e)| jet.codim_one_form(x, e)).collect();
            let w = argmin(&vals).expect("pairs >= 1");
            let (v, x, e) = descend_pair(&jet, &prs[w].0, &prs[w].1);
            Ok((v.min(vals[w]), x, e))
        })
        .collect::<Result<_>>()?;
    let forms: Vec<f64> = results.iter().map(|r| r.0).collect();
    let w = argmin(&forms).expect("samples >= 1");
    let c0 = strict.unwrap_or(0.0);
    let pt = &points[w];
    let witness = Witness {
        x: Some(pt.x.clone()),
        z: Some(pt.z),
        p: Some(pt.p.clone()),
        xi: Some(results[w].1.clone()),
        eta: Some(results[w].2.clone()),
        node: None,
    };
    let name = if strict.is_some() { "strictly_regular" } else { "regular" };
    Ok(CertificateReport::from_margin(name, forms[w] - c0, Some(witness), tol, points.len() * s.pairs)
        .with_seed(s.seed)
        .with_extra("min_form", forms[w])
        .with_extra("c0", c0))
}

/// Convexity of `B~ = B^{1/k}` in `p`: margin is the smallest eigenvalue of
/// `D_pp B~`. On failure, `threshold_norm` locates the first sign change of
/// that eigenvalue along the ray through the witness.
pub fn check_btilde_convex(b: &SourceB, k: usize, domain: &BoxDomain, s: &SamplingSpec, tol: f64) -> Result<CertificateReport> {
    let points = s.points(domain)?;
    let eig = |x: &[f64], z: f64, p: &[f64]| -> Result<f64> { Ok(min_eig(&b.btilde_jet(k, x, z, p, 2)?.dpp)) };
    let margins: Vec<f64> = points.par_iter().map(|pt| eig(&pt.x, pt.z, &pt.p)).collect::<Result<_>>()?;
    let w = argmin(&margins).expect("samples >= 1");
    let pt = &points[w];
    let witness = Witness { x: Some(pt.x.clone()), z: Some(pt.z), p: Some(pt.p.clone()), ..Default::default() };
    let mut rep = CertificateReport::from_margin("btilde_convex", margins[w], Some(witness), tol, points.len()).with_seed(s.seed);
    let pn = pt.p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rep.fails() && pn > 0.0 {
        let along = |r: f64| -> Result<f64> {
            let p: Vec<f64> = pt.p.iter().map(|v| v * r / pn).collect();
            eig(&pt.x, pt.z, &p)
        };
        let (mut lo, mut hi) = (0.0, pn);
        if along(0.0)? < 0.0 {
            hi = 0.0;
        }
        for _ in 0..80 {
            if hi - lo <= 1e-12 * (1.0 + pn) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if along(mid)? < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        rep = rep.with_extra("threshold_norm", hi).with_extra("threshold_norm_sq", hi * hi).with_extra("witness_norm", pn);
    }
    Ok(rep)
}

/// Monotonicity in `z`: smallest eigenvalue of `D_z A` and smallest `D_z B~`.
pub fn check_monotone(
    a: &CoefficientA,
    b: &SourceB,
    k: usize,
    domain: &BoxDomain,
    s: &SamplingSpec,
    tol: f64,
) -> Result<(CertificateReport, CertificateReport)> {
    let points = s.points(domain)?;
    let witness = |i: usize| {
        let pt = &points[i];
        Witness { x: Some(pt.x.clone()), z: Some(pt.z), p: Some(pt.p.clone()), ..Default::default() }
    };
    let a_margins: Vec<Option<f64>> = points
        .par_iter()
        .map(|pt| Ok(a.jet(&pt.x, pt.z, &pt.p, 1)?.dz.as_ref().map(min_eig)))
        .collect::<Result<_>>()?;
    let a_rep = if a_margins.iter().any(Option::is_none) {
        CertificateReport::inconclusive("monotone_A", tol, format!("no z-derivative available for `{}`", a.id))
    } else {
        let m: Vec<f64> = a_margins.into_iter().map(Option::unwrap).collect();
        let w = argmin(&m).expect("samples >= 1");
        CertificateReport::from_margin("monotone_A", m[w], Some(witness(w)), tol, points.len())
    }
    .with_seed(s.seed);
    let b_margins: Vec<f64> = points
        .par_iter()
        .map(|pt| Ok(b.btilde_jet(k, &pt.x, pt.z, &pt.p, 1)?.dz))
        .collect::<Result<_>>()?;
    let w = argmin(&b_margins).expect("samples >= 1");
    let b_rep = CertificateReport::from_margin("monotone_Btilde", b_margins[w], Some(witness(w)), tol, points.len()).with_seed(s.seed);
    Ok((a_rep, b_rep))
}

/// What a grid field is checked to be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FieldMode {
    /// `W_h` in the closed cone at every interior node.
    Admissible,
    /// `W_h` in the open cone.
    StrictCone,
    /// Admissible with `S_k[W_h] >= B`.
    Subsolution,
    /// Open cone with `S_k[W_h] >= B + delta`.
    StrictSubsolution { delta: f64 },
    /// Admissible with `S_k[W_h] <= B`.
    Supersolution,
    /// Open cone with `S_k[W_h] <= B - delta`.
    StrictSupersolution { delta: f64 },
}

impl FieldMode {
    fn name(&self) -> &'static str {
        match self {
            FieldMode::Admissible => "admissible",
            FieldMode::StrictCone => "strict_cone",
            FieldMode::Subsolution => "subsolution",
            FieldMode::StrictSubsolution { .. } => "strict_subsolution",
            FieldMode::Supersolution => "supersolution",
            FieldMode::StrictSupersolution { .. } => "strict_supersolution",
        }
    }

    fn open_cone(&self) -> bool {
        matches!(self, FieldMode::StrictCone | FieldMode::StrictSubsolution { .. } | FieldMode::StrictSupersolution { .. })
    }
}

struct NodeCheck {
    cone_ok: bool,
    cone_margin: f64,
    sk: f64,
    eq_margin: f64,
}

/// Cone membership of `W_h(u)` and the sign of `S_k[W_h] - B(x, u, Du_h)` at
/// every interior node. Cone violations take precedence and are reported
/// with their `S_j` margin; otherwise the margin is the equation gap.
///
/// `strict_cone` reports `delta = min S_k` and `f_min = delta^{1/k}`.
pub fn check_admissible_field(u: &GridField, prob: &ProblemSpec, mode: FieldMode, tol: f64) -> Result<CertificateReport> {
    check_grid(u, prob)?;
    if let Some(i) = u.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("field value at node {i}")));
    }
    let (h, st) = (u.h(), u.strides());
    let nodes = u.interior_nodes();
    let k = prob.k;
    let checks: Vec<NodeCheck> = nodes
        .par_iter()
        .map(|&node| {
            let (du, d2) = node_derivatives(u, node, &h, &st);
            let x = u.coord(node);
            let z = u.values[node];
            let w = SymMat::symmetrized(d2 - prob.a.eval(&x, z, &du)?.matrix());
            let cone = matrix_cone_classify(&w, k, crate::symfun::default_cone_tol_matrix(&w))?;
            let cone_ok = if mode.open_cone() { cone.label == ConeLabel::Interior } else { cone.label != ConeLabel::Outside };
            let sk = cone.margins[k - 1];
            let eq_margin = match mode {
                FieldMode::Admissible | FieldMode::StrictCone => 0.0,
                FieldMode::Subsolution => sk - prob.b.eval(&x, z, &du)?,
                FieldMode::StrictSubsolution { delta } => sk - prob.b.eval(&x, z, &du)? - delta,
                FieldMode::Supersolution => prob.b.eval(&x, z, &du)? - sk,
                FieldMode::StrictSupersolution { delta } => prob.b.eval(&x, z, &du)? - sk - delta,
            };
            Ok(NodeCheck { cone_ok, cone_margin: cone.worst().1, sk, eq_margin })
        })
        .collect::<Result<_>>()?;
    let node_witness = |i: usize| Witness { x: Some(u.coord(nodes[i])), node: Some(u.multi_index(nodes[i])), ..Default::default() };
    let cone_margins: Vec<f64> = checks.iter().map(|c| c.cone_margin).collect();
    let wc = argmin(&cone_margins);
    let samples = nodes.len();
    let cone_violation = checks.iter().position(|c| !c.cone_ok);
    let mut rep = if let Some(first) = cone_violation {
        let bad: Vec<f64> = checks.iter().map(|c| if c.cone_ok { f64::INFINITY } else { c.cone_margin }).collect();
        let i = argmin(&bad).unwrap_or(first);
        let mut r = CertificateReport::from_margin(mode.name(), checks[i].cone_margin, Some(node_witness(i)), tol, samples);
        r.verdict = if checks[i].cone_margin < -tol || !mode.open_cone() { Verdict::Fails } else { Verdict::Inconclusive };
        r.note = Some("W_h leaves the required cone".into());
        r
    } else {
        match mode {
            FieldMode::Admissible | FieldMode::StrictCone => {
                let i = wc.expect("interior nodes");
                CertificateReport::from_margin(mode.name(), cone_margins[i], Some(node_witness(i)), tol, samples)
            }
            _ => {
                let m: Vec<f64> = checks.iter().map(|c| c.eq_margin).collect();
                let i = argmin(&m).expect("interior nodes");
                CertificateReport::from_margin(mode.name(), m[i], Some(node_witness(i)), tol, samples)
            }
        }
    };
    if let Some(i) = wc {
        rep = rep.with_extra("min_cone_margin", cone_margins[i]);
    }
    if mode == FieldMode::StrictCone && cone_violation.is_none() {
        let delta = checks.iter().map(|c| c.sk).fold(f64::INFINITY, f64::min);
        rep = rep.with_extra("delta", delta).with_extra("f_min", delta.max(0.0).powf(1.0 / k as f64));
    }
    Ok(rep)
}

/// `min_xi [D_ij vphi - D_{p_k} A_ij(x, u, Du) D_k vphi] xi_i xi_j - delta0`
/// over unit `xi` and interior nodes.
pub fn check_a_bounded(vphi: &GridField, u: &GridField, prob: &ProblemSpec, delta0: f64, tol: f64) -> Result<CertificateReport> {
    check_grid(u, prob)?;
    vphi.require_same_grid(u)?;
    let (h, st) = (u.h(), u.strides());
    let nodes = u.interior_nodes();
    let margins: Vec<f64> = nodes
        .par_iter()
        .map(|&node| {
            let (du, _) = node_derivatives(u, node, &h, &st);
            let (dphi, d2phi) = node_derivatives(vphi, node, &h, &st);
            let jet = prob.a.jet(&u.coord(node), u.values[node], &du, 1)?;
            Ok(min_eig(&(d2phi - jet.dp_contract(&dphi))) - delta0)
        })
        .collect::<Result<_>>()?;
    let i = argmin(&margins).ok_or_else(|| Error::Empty("grid has no interior nodes".into()))?;
    let witness = Witness { x: Some(u.coord(nodes[i])), node: Some(u.multi_index(nodes[i])), ..Default::default() };
    Ok(CertificateReport::from_margin("a_bounded", margins[i], Some(witness), tol, nodes.len()))
}

/// Uniform `(k-1)`-A-convexity of the boundary: for each frame and `p`,
/// `kappa` are the eigenvalues of the tangential restriction of
/// `D_i gamma_j - D_{p_k} A_ij gamma_k`, and the margin is
/// `S_{k-1}(kappa) - delta0`.
pub fn check_domain_convex(
    frames: &[BoundaryFrame],
    a: &CoefficientA,
    p_samples: &[Vec<f64>],
    z: f64,
    k: usize,
    delta0: f64,
    tol: f64,
) -> Result<CertificateReport> {
    if frames.is_empty() || p_samples.is_empty() {
        return Err(Error::Empty("frames and p samples".into()));
    }
    let n = frames[0].x.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    let pairs: Vec<(usize, usize)> = (0..frames.len()).flat_map(|f| (0..p_samples.len()).map(move |p| (f, p))).collect();
    let margins: Vec<f64> = pairs
        .par_iter()
        .map(|&(fi, pi)| {
            let fr = &frames[fi];
            let jet = a.jet(&fr.x, z, &p_samples[pi], 1)?;
            let g = &fr.dgamma - jet.dp_contract(&fr.normal);
            let t = SymMat::symmetrized(frames::tangential(&g, &fr.tangents));
            let s = if k == 1 { 1.0 } else { elem_sym(&t.eigenvalues(), k - 1)? };
            Ok(s - delta0)
        })
        .collect::<Result<_>>()?;
    let i = argmin(&margins).expect("non-empty");
    let (fi, pi) = pairs[i];
    let witness = Witness { x: Some(frames[fi].x.clone()), p: Some(p_samples[pi].clone()), z: Some(z), ..Default::default() };
    Ok(CertificateReport::from_margin("domain_convex", margins[i], Some(witness), tol, pairs.len()))
}
