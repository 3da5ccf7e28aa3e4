use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grid::GridField;
use super::linear::{solve_triplets, LinearMethod};
use super::operator::{assemble_from, evaluate_nodes, residual_from, NodeEval, OperatorVariant, Target};
use crate::error::{Error, Result};
use crate::model::{ProblemSpec, ScalarField};

/// Starting field for Newton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum InitMode {
    /// Discrete harmonic extension of `phi - mu q` plus `mu q`, with
    /// `q = |x - x_c|^2 / 2 - R^2` and `mu` doubled from `mu0` until the
    /// field is strictly admissible.
    Auto {
        #[serde(default = "default_mu0")]
        mu0: f64,
    },
    /// Use the problem's subsolution, with boundary values reset to `phi`.
    Subsolution,
    /// A supplied field.
    #[serde(skip)]
    Field(GridField),
}

fn default_mu0() -> f64 {
    1.0
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::Auto { mu0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Target for the max norm of the residual.
    pub rtol: f64,
    /// Newton iterations per homotopy stage.
    pub max_newton: usize,
    /// Number of geometric stages `t = 1 - 2^{-j}` before `t = 1`.
    pub homotopy_stages: usize,
    /// Bisections allowed for a failing stage.
    pub max_bisections: usize,
    pub max_halvings: usize,
    pub init: InitMode,
    pub linear: LinearMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rtol: 1e-10,
            max_newton: 50,
            homotopy_stages: 8,
            max_bisections: 4,
            max_halvings: 40,
            init: InitMode::default(),
            linear: LinearMethod::Auto,
        }
    }
}

/// One accepted Newton step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingRecord {
    pub stage: usize,
    pub t: f64,
    pub iteration: usize,
    /// Accepted step length.
    pub step: f64,
    pub residual: f64,
    /// Smallest `S_j(W_h)` over nodes and `j <= k` after the step.
    pub min_cone_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub stages: Vec<StageRecord>,
    pub residual: f64,
    pub min_cone_margin: f64,
    /// Margin floor enforced by the line search.
    pub margin_floor: f64,
    pub init_mu: Option<f64>,
    pub damping: Vec<DampingRecord>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl SolveReport {
    fn new() -> Self {
        SolveReport {
            converged: false,
            iterations: 0,
            stages: vec![],
            residual: f64::INFINITY,
            min_cone_margin: f64::NAN,
            margin_floor: 0.0,
            init_mu: None,
            damping: vec![],
            failure: None,
            wall_time_s: 0.0,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn min_margin(evals: &[NodeEval]) -> f64 {
    worst_node(evals).1
}

fn worst_node(evals: &[NodeEval]) -> (usize, f64) {
    evals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, e)| if e.cone_margin() < acc.1 { (i, e.cone_margin()) } else { acc })
}

/// Discrete harmonic function with boundary values `g` on the grid of `u`.
pub fn harmonic_extension(template: &GridField, g: &ScalarField, method: LinearMethod) -> Result<GridField> {
    let mut u = template.clone();
    u.set_boundary(g);
    let nodes = u.interior_nodes();
    let mut unknown = vec![usize::MAX; u.len()];
    for (i, &node) in nodes.iter().enumerate() {
        unknown[node] = i;
    }
    let (h, strides) = (u.h(), u.strides());
    let mut trip = Vec::new();
    let mut rhs = vec![0.0; nodes.len()];
    for (r, &node) in nodes.iter().enumerate() {
        let mut center = 0.0;
        for d in 0..u.n {
            let w = 1.0 / (h[d] * h[d]);
            center -= 2.0 * w;
            for nb in [node + strides[d], node - strides[d]] {
                if unknown[nb] == usize::MAX {
                    rhs[r] -= w * u.values[nb];
                } else {
                    trip.push((r, unknown[nb], w));
                }
            }
        }
        trip.push((r, r, center));
    }
    let x = solve_triplets(nodes.len(), &trip, &rhs, method, u.n, 1e-14)?;
    for (i, &node) in nodes.iter().enumerate() {
        u.values[node] = x[i];
    }
    Ok(u)
}

fn auto_init(prob: &ProblemSpec, m: &[usize], mu0: f64, method: LinearMethod) -> Result<(GridField, f64)> {
    if !(mu0 > 0.0) {
        return Err(Error::InvalidParameter { name: "mu0".into(), reason: format!("must be > 0, got {mu0}") });
    }
    let template = GridField::zeros(&prob.domain, m)?;
    let xc = prob.domain.center();
    let r2 = prob.domain.half_diagonal_sq();
    let q = move |x: &[f64]| 0.5 * x.iter().zip(&xc).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() - r2;
    let mut mu = mu0;
    let mut last = None;
    for _ in 0..60 {
        let (phi, qq, muc) = (prob.phi.clone(), q.clone(), mu);
        let g = ScalarField::new("init boundary", move |x| phi.eval(x) - muc * qq(x));
        let mut u = harmonic_extension(&template, &g, method)?;
        for i in u.interior_nodes() {
            u.values[i] += mu * q(&u.coord(i));
        }
        u.set_boundary(&prob.phi);
        match evaluate_nodes(&u, prob, false) {
            Ok((_, evals)) if evals.iter().all(|e| e.cone.label == crate::symfun::ConeLabel::Interior) => {
                return Ok((u, mu));
            }
            Ok(_) => {}
            Err(e @ (Error::AdmissibilityLost { .. } | Error::OutsideCone { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
        mu *= 2.0;
    }
    Err(last.unwrap_or(Error::Domain("no strictly admissible initial field found".into())))
}

fn initial_field(prob: &ProblemSpec, m: &[usize], opts: &SolveOptions) -> Result<(GridField, Option<f64>)> {
    match &opts.init {
        InitMode::Auto { mu0 } => {
            let (u, mu) = auto_init(prob, m, *mu0, opts.linear)?;
            Ok((u, Some(mu)))
        }
        InitMode::Subsolution => {
            let sub = prob
                .subsolution
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter { name: "init".into(), reason: "problem has no subsolution".into() })?;
            let mut u = GridField::from_scalar(&prob.domain, m, sub)?;
            u.set_boundary(&prob.phi);
            Ok((u, None))
        }
        InitMode::Field(f) => {
            let mut u = f.clone();
            if u.m != m || u.lo != prob.domain.lo || u.hi != prob.domain.hi {
                return Err(Error::GridMismatch("initial field does not match the requested grid".into()));
            }
            u.set_boundary(&prob.phi);
            Ok((u, None))
        }
    }
}

struct StageOutcome {
    converged: bool,
    iterations: usize,
    residual: f64,
    error: Option<Error>,
}

/// Damped Newton for `f(W_h(u)) = target` starting from `u`, which must be
/// strictly admissible. Accepted iterates keep every node's cone margin
/// above `floor`.
#[allow(clippy::too_many_arguments)]
fn newton_stage(
    u: &mut GridField,
    prob: &ProblemSpec,
    target: Target<'_>,
    tol: f64,
    stage: usize,
    opts: &SolveOptions,
    floor: f64,
    log: &mut Vec<DampingRecord>,
) -> StageOutcome {
    let mut out = StageOutcome { converged: false, iterations: 0, residual: f64::INFINITY, error: None };
    let fail = |out: &mut StageOutcome, e: Error| {
        out.error = Some(e);
    };
    let (mut nodes, mut evals) = match evaluate_nodes(u, prob, true) {
        Ok(v) => v,
        Err(e) => {
            fail(&mut out, e);
            return out;
        }
    };
    let mut r = residual_from(&evals, target);
    let mut rn = inf_norm(&r);
    out.residual = rn;
    for it in 0..=opts.max_newton {
        if rn <= tol {
            out.converged = true;
            return out;
        }
        if it == opts.max_newton {
            break;
        }
        out.iterations = it + 1;
        let op = match assemble_from(u, &nodes, &evals, OperatorVariant::FullNewton, target) {
            Ok(op) => op,
            Err(e) => {
                fail(&mut out, e);
                return out;
            }
        };
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = match solve_triplets(nodes.len(), &op.interior_triplets(), &rhs, opts.linear, u.n, 1e-12) {
            Ok(d) => d,
            Err(e) => {
                fail(&mut out, e);
                return out;
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        let mut lost = None;
        let mut saw_admissible = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = u.clone();
            for (i, &node) in nodes.iter().enumerate() {
                trial.values[node] += step * delta[i];
            }
            match evaluate_nodes(&trial, prob, true) {
                Ok((tn, te)) => {
                    let (worst, margin) = worst_node(&te);
                    if margin > floor {
                        saw_admissible = true;
                        let tr = residual_from(&te, target);
                        let trn = inf_norm(&tr);
                        if trn < rn {
                            accepted = Some((trial, tn, te, tr, trn, margin));
                            break;
                        }
                    } else {
                        let (j, _) = te[worst].cone.worst();
                        lost = Some(Error::AdmissibilityLost { node: u.multi_index(tn[worst]), j, margin });
                    }
                }
                Err(e @ (Error::AdmissibilityLost { .. } | Error::NonPositiveSource { .. })) => lost = Some(e),
                Err(e) => {
                    fail(&mut out, e);
                    return out;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, tn, te, tr, trn, margin)) => {
                log.push(DampingRecord { stage, t: target.t, iteration: it + 1, step, residual: trn, min_cone_margin: margin });
                *u = trial;
                nodes = tn;
                evals = te;
                r = tr;
                rn = trn;
                out.residual = rn;
            }
            None => {
                if !saw_admissible {
                    out.error = lost;
                }
                return out;
            }
        }
    }
    out
}

/// Solve the Dirichlet problem on an `m[0] x ... x m[n-1]` grid. Returns
/// the final field and report even on failure; the third component holds
/// the error, if any.
pub fn solve_traced(prob: &ProblemSpec, m: &[usize], opts: &SolveOptions) -> (GridField, SolveReport, Option<Error>) {
    let start = Instant::now();
    let mut report = SolveReport::new();
    let finish = |mut report: SolveReport, u: GridField, err: Option<Error>| {
        report.wall_time_s = start.elapsed().as_secs_f64();
        if let Some(e) = &err {
            report.failure = Some(e.to_string());
        }
        (u, report, err)
    };
    if m.len() != prob.n {
        let e = Error::GridMismatch(format!("{} node counts for n = {}", m.len(), prob.n));
        return finish(report, GridField { n: 0, m: vec![], lo: vec![], hi: vec![], values: vec![] }, Some(e));
    }
    let (mut u, mu) = match initial_field(prob, m, opts) {
        Ok(v) => v,
        Err(e) => {
            let blank = GridField::zeros(&prob.domain, m).unwrap_or(GridField {
                n: 0,
                m: vec![],
                lo: vec![],
                hi: vec![],
                values: vec![],
            });
            return finish(report, blank, Some(e));
        }
    };
    report.init_mu = mu;
    let floor = 1e-12 * (1.0 + u.max_abs());
    report.margin_floor = floor;
    let base = match evaluate_nodes(&u, prob, false) {
        Ok((_, evals)) => {
            let margin = min_margin(&evals);
            if !(margin > floor) {
                let e = Error::AdmissibilityLost { node: vec![], j: 0, margin };
                return finish(report, u, Some(e));
            }
            evals.iter().map(|e| e.f).collect::<Vec<f64>>()
        }
        Err(e) => return finish(report, u, Some(e)),
    };

    let mut schedule: Vec<f64> = (1..=opts.homotopy_stages).map(|j| 1.0 - 0.5f64.powi(j as i32)).collect();
    schedule.push(1.0);
    let stage_tol = |t: f64| if t < 1.0 { opts.rtol.max(1e-8) } else { opts.rtol };
    let mut t_prev = 0.0;
    let mut stage = 0;
    let mut queue: Vec<(f64, usize)> = schedule.iter().rev().map(|&t| (t, 0)).collect();
    while let Some((t, depth)) = queue.pop() {
        stage += 1;
        let saved = u.clone();
        let target = Target { t, base: Some(&base) };
        let o = newton_stage(&mut u, prob, target, stage_tol(t), stage, opts, floor, &mut report.damping);
        report.iterations += o.iterations;
        report.stages.push(StageRecord { t, iterations: o.iterations, residual: o.residual, converged: o.converged });
        report.residual = o.residual;
        if o.converged {
            t_prev = t;
            continue;
        }
        if depth < opts.max_bisections {
            u = saved;
            queue.push((t, depth + 1));
            queue.push((0.5 * (t_prev + t), depth + 1));
            continue;
        }
        let err = o.error.unwrap_or(Error::NoConvergence { stage, t, iteration: o.iterations, residual: o.residual });
        return finish(report, u, Some(err));
    }
    match evaluate_nodes(&u, prob, false) {
        Ok((_, evals)) => {
            report.min_cone_margin = min_margin(&evals);
            report.residual = inf_norm(&residual_from(&evals, Target::FINAL));
            report.converged = report.residual <= opts.rtol && report.min_cone_margin > 0.0;
            if !report.converged {
                let e = Error::NoConvergence { stage, t: 1.0, iteration: report.iterations, residual: report.residual };
                return finish(report, u, Some(e));
            }
            finish(report, u, None)
        }
        Err(e) => finish(report, u, Some(e)),
    }
}

/// [`solve_traced`] with the error folded into the result.
pub fn solve(prob: &ProblemSpec, m: &[usize], opts: &SolveOptions) -> Result<(GridField, SolveReport)> {
    let (u, report, err) = solve_traced(prob, m, opts);
    match err {
        Some(e) => Err(e),
        None => Ok((u, report)),
    }
}
