use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Command, RunConfig};
use super::field_io::{emit_field, fmt_f64};
use super::selftest::run_selftest;
use crate::error::{Error, Result};
use crate::model::{ParamValue, ProblemSpec};
use crate::solver::{solve_traced, GridField, SolveReport};
use crate::structure::{check_admissible_field, check_btilde_convex, check_monotone, check_regular, CertificateReport, FieldMode};
use crate::verify::{
    auxiliary_probe, boundary_barrier_sweep, boundary_decomposition_check, d2_stats, interior_barrier_audit,
    trace_ellipticity_check, BarrierParams, BoundaryContext,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_BAD_CONFIG: i32 = 4;

/// Exit status for an error that aborts a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NoConvergence { .. } | Error::AdmissibilityLost { .. } | Error::LinearSolveFailure(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_BAD_CONFIG,
    }
}

/// What a command produced. `report` is deterministic for a fixed config
/// and seed; wall-clock time goes to a separate file.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit: i32,
    pub report: Value,
    pub out_dir: PathBuf,
    pub wall_time_s: f64,
    pub summary: String,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

/// Run one command and write its artifacts under `out_dir`.
pub fn run_command(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let command = cfg.command.ok_or_else(|| Error::ConfigSchema { pointer: "/command".into(), reason: "missing".into() })?;
    std::fs::create_dir_all(out_dir)?;
    let (exit, results, summary) = match command {
        Command::Structure => structure(cfg)?,
        Command::Solve => solve_cmd(cfg, out_dir)?,
        Command::Verify => verify_cmd(cfg, out_dir)?,
        Command::Sweep => sweep_cmd(cfg, out_dir)?,
        Command::Selftest => run_selftest(out_dir)?,
    };
    let report = json!({
        "toolkit": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "config": to_value(cfg),
        "results": results,
        "exit_status": exit,
    });
    write(out_dir, "report.json", &pretty(&report))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write(out_dir, "timing.json", &pretty(&json!({ "wall_time_s": wall_time_s })))?;
    Ok(RunOutcome { exit, report, out_dir: out_dir.to_path_buf(), wall_time_s, summary })
}

fn verdict_exit(reports: &[&CertificateReport]) -> i32 {
    if reports.iter().any(|r| r.fails()) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}

fn summarize(reports: &[&CertificateReport]) -> String {
    reports.iter().map(|r| format!("{}:{}", r.condition, to_value(&r.verdict).as_str().unwrap_or("?"))).collect::<Vec<_>>().join(" ")
}

fn structure(cfg: &RunConfig) -> Result<(i32, Value, String)> {
    let prob = cfg.problem_spec()?;
    let seed = cfg.seed()?;
    let s = cfg.checks.samples.with_seed(seed);
    let tol = cfg.checks.tol;
    let mut reports = vec![check_regular(&prob.a, &prob.domain, &s, None, tol)?];
    if cfg.checks.strict {
        reports.push(check_regular(&prob.a, &prob.domain, &s, Some(cfg.checks.c0), tol)?);
    }
    reports.push(check_btilde_convex(&prob.b, prob.k, &prob.domain, &s, tol)?);
    let (ma, mb) = check_monotone(&prob.a, &prob.b, prob.k, &prob.domain, &s, tol)?;
    reports.push(ma);
    reports.push(mb);
    if let (Some(sub), Some(grid)) = (&prob.subsolution, &cfg.grid) {
        let u = GridField::from_scalar(&prob.domain, &grid.m, sub)?;
        reports.push(check_admissible_field(&u, &prob, FieldMode::Subsolution, tol)?);
    }
    let refs: Vec<&CertificateReport> = reports.iter().collect();
    Ok((verdict_exit(&refs), json!({ "reports": to_value(&reports) }), summarize(&refs)))
}

#[derive(Serialize)]
struct SolveSummary {
    solve: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_inf: Option<f64>,
    nodes: usize,
}

fn run_solve(prob: &ProblemSpec, m: &[usize], cfg: &RunConfig) -> (GridField, SolveSummary, Option<Error>) {
    let (u, report, err) = solve_traced(prob, m, &cfg.solver);
    let error_inf = prob.exact.as_ref().filter(|_| err.is_none()).and_then(|e| {
        GridField::from_scalar(&prob.domain, m, e).ok().and_then(|ex| u.max_diff(&ex).ok())
    });
    let nodes = u.len();
    (u, SolveSummary { solve: report, error_inf, nodes }, err)
}

fn solve_cmd(cfg: &RunConfig, out: &Path) -> Result<(i32, Value, String)> {
    let prob = cfg.problem_spec()?;
    let m = cfg.grid_m()?;
    let (u, summary, err) = run_solve(&prob, &m, cfg);
    let exit = if err.is_some() || !summary.solve.converged { EXIT_NO_CONVERGENCE } else { EXIT_OK };
    if exit == EXIT_OK {
        emit_field(&u, &out.join("solution.csv"))?;
    }
    let line = format!("converged={} residual={:e} iterations={}", summary.solve.converged, summary.solve.residual, summary.solve.iterations);
    let mut v = to_value(&summary);
    if let Some(e) = err {
        v["error"] = Value::String(e.to_string());
    }
    Ok((exit, v, line))
}

/// The problem's subsolution on the grid, or `u - c (R^2 - |x - x_c|^2)`.
fn subsolution_field(prob: &ProblemSpec, u: &GridField, bump: f64) -> Result<GridField> {
    if let Some(sub) = &prob.subsolution {
        return GridField::from_scalar(&prob.domain, &u.m, sub);
    }
    let c = prob.domain.center();
    let r2 = prob.domain.half_diagonal_sq();
    u.with_values(
        (0..u.len())
            .map(|i| {
                let x = u.coord(i);
                let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                u.values[i] - bump * (r2 - d2)
            })
            .collect(),
    )
}

fn verify_cmd(cfg: &RunConfig, out: &Path) -> Result<(i32, Value, String)> {
    let prob = cfg.problem_spec()?;
    let m = cfg.grid_m()?;
    let (u, summary, err) = run_solve(&prob, &m, cfg);
    if err.is_some() || !summary.solve.converged {
        let mut v = json!({ "solve": to_value(&summary) });
        if let Some(e) = err {
            v["error"] = Value::String(e.to_string());
        }
        return Ok((EXIT_NO_CONVERGENCE, v, "solve failed".into()));
    }
    let vc = &cfg.verify;
    let tol = cfg.checks.tol;
    let estimate = d2_stats(&u, &prob)?;
    let trace = trace_ellipticity_check(&u, &prob, tol)?;
    let u_sub = subsolution_field(&prob, &u, vc.bump)?;
    let interior = interior_barrier_audit(&u, &u_sub, &prob, &vc.k_list, &vc.eps1_list, vc.c_cap)?;
    write(out, "interior_barrier.csv", &interior.to_csv())?;
    let best = interior.best.map(|b| interior.entries[b].clone());
    let bc = &vc.boundary;
    let eps1 = bc.eps1.or(best.as_ref().map(|b| b.eps1)).unwrap_or(0.1);
    let sweep = boundary_barrier_sweep(&u, &u_sub, &prob, bc.face, eps1, bc.m, &bc.sweep)?;
    write(out, "boundary_barrier.csv", &sweep.to_csv())?;
    let single = match (bc.k, bc.delta, bc.mu, bc.n) {
        (Some(k), Some(delta), Some(mu), Some(n)) => {
            let p = BarrierParams { k, delta, mu, n, m: bc.m, eps1, ..Default::default() };
            Some(BoundaryContext::new(&u, &u_sub, &prob, bc.face)?.audit(&p, tol)?)
        }
        _ => None,
    };
    let decomposition = boundary_decomposition_check(&u, &prob, bc.face, vc.decomposition_budget)?;
    let probe_params = BarrierParams { k: best.as_ref().map_or(1.0, |b| b.k), ..Default::default() };
    let probe = auxiliary_probe(&u, &u_sub, &prob, &probe_params)?;
    let mut reports: Vec<&CertificateReport> = vec![&trace, &decomposition];
    if let Some(s) = &single {
        reports.push(s);
    }
    let mut exit = verdict_exit(&reports);
    if !interior.informative || sweep.feasible.is_none() {
        exit = EXIT_CHECK_FAILED;
    }
    let line = format!(
        "{} interior_informative={} boundary_feasible={} C_emp={}",
        summarize(&reports),
        interior.informative,
        sweep.feasible.is_some(),
        fmt_f64(estimate.c_emp)
    );
    let v = json!({
        "solve": to_value(&summary),
        "estimate": to_value(&estimate),
        "trace_ellipticity": to_value(&trace),
        "interior_barrier": to_value(&interior),
        "boundary_barrier": {
            "face": to_value(&sweep.face),
            "eps1": sweep.eps1,
            "M": sweep.m,
            "entries": sweep.entries.len(),
            "feasible": sweep.feasible.map(|i| to_value(&sweep.entries[i])),
            "single": single.as_ref().map(to_value),
        },
        "boundary_decomposition": to_value(&decomposition),
        "auxiliary_probe": to_value(&probe),
    });
    Ok((exit, v, line))
}

fn sweep_cmd(cfg: &RunConfig, out: &Path) -> Result<(i32, Value, String)> {
    let spec = cfg.sweep.as_ref().expect("validated");
    let mut rows = Vec::new();
    let mut csv = format!("{},converged,iterations,residual,min_cone_margin,error_inf\n", spec.param);
    let mut failures = 0;
    for &value in &spec.values {
        let mut c = cfg.clone();
        let m = if spec.param == "m" {
            vec![value as usize; c.problem.as_ref().map_or(1, |p| p.n)]
        } else {
            c.problem.as_mut().expect("validated").params.insert(spec.param.clone(), ParamValue::Num(value));
            cfg.grid_m()?
        };
        let prob = c.problem_spec()?;
        let (_, summary, err) = run_solve(&prob, &m, &c);
        let ok = err.is_none() && summary.solve.converged;
        failures += usize::from(!ok);
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            if spec.param == "m" { (value as usize).to_string() } else { fmt_f64(value) },
            ok,
            summary.solve.iterations,
            fmt_f64(summary.solve.residual),
            fmt_f64(summary.solve.min_cone_margin),
            summary.error_inf.map(fmt_f64).unwrap_or_default()
        ));
        let mut row = json!({ "value": value, "converged": ok, "summary": to_value(&summary) });
        if let Some(e) = err {
            row["error"] = Value::String(e.to_string());
        }
        rows.push(row);
    }
    write(out, "sweep_summary.csv", &csv)?;
    let exit = if failures > 0 { EXIT_NO_CONVERGENCE } else { EXIT_OK };
    Ok((exit, json!({ "param": spec.param, "runs": rows }), format!("{} runs, {failures} failed", spec.values.len())))
}
