//! Built-in example suite run by `hessctl selftest`.

use std::path::Path;

use serde_json::{json, Value};

use super::commands::{run_command, EXIT_BAD_CONFIG, EXIT_CHECK_FAILED, EXIT_NO_CONVERGENCE, EXIT_OK};
use super::config::parse_config;
use super::field_io::{field_from_csv, field_to_csv};
use crate::error::{Error, Result};
use crate::model::{problem_preset, BoxDomain, ParamValue, Params};
use crate::solver::{discrete_jet, residual, solve, GridField, SolveOptions};
use crate::structure::{check_admissible_field, check_btilde_convex, check_regular, FieldMode, SamplingSpec, Verdict};
use crate::symfun::{
    binomial, cone_classify, elem_sym, elem_sym_grad, f_eval, matrix_f_grad, matrix_sk, ConeLabel, EigenTuple, SymMat,
};
use crate::verify::{d2_stats, decompose, tangential_frame_check};

type Check = fn(&Path) -> Result<bool>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn tuple(v: &[f64]) -> Result<EigenTuple> {
    EigenTuple::new(v.to_vec())
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Num(*v))).collect()
}

fn symfun_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("elem_sym identity tuple", |_| Ok(elem_sym(&tuple(&[1.0, 1.0, 1.0])?, 2)? == 3.0)),
        ("elem_sym mixed signs", |_| Ok(close(elem_sym(&tuple(&[1.0, 1.0, -0.4])?, 2)?, 0.2, 1e-14))),
        ("elem_sym zero factor", |_| Ok(elem_sym(&tuple(&[0.0, 2.0, 3.0])?, 3)? == 0.0)),
        ("elem_sym_grad delete-one", |_| {
            let g = elem_sym_grad(&tuple(&[3.0, 2.0, 1.0])?, 3)?;
            Ok(g == vec![2.0, 3.0, 6.0])
        }),
        ("cone classes", |_| {
            let t = tuple(&[1.0, 1.0, -0.4])?;
            Ok(cone_classify(&t, 2, 1e-12)?.label == ConeLabel::Interior && cone_classify(&t, 3, 1e-12)?.label == ConeLabel::Outside)
        }),
        ("f on identity tuple", |_| {
            let v = f_eval(&tuple(&[1.0; 4])?, 2)?.value;
            Ok(close(v, binomial(4, 2).sqrt(), 1e-14))
        }),
        ("matrix S_k diagonal", |_| Ok(close(matrix_sk(&SymMat::diag(&[1.0, 1.0, -0.4])?, 2)?, 0.2, 1e-14))),
        ("F gradient for k = 1", |_| {
            let w = SymMat::from_fn(3, |i, j| if i == j { 2.0 } else { 0.3 })?;
            let (_, f) = matrix_f_grad(&w, 1)?;
            Ok((f.matrix() - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-14)
        }),
    ]
}

fn model_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("conformal printed at e1", |_| {
            let p = problem_preset("conformal_printed_const_B", 2, 1, None, &Params::new())?;
            let a = p.a.eval(&[0.0, 0.0], 0.0, &[1.0, 0.0])?;
            Ok(close(a.get(0, 0), 0.5, 1e-15) && close(a.get(1, 1), -0.5, 1e-15) && a.get(0, 1) == 0.0)
        }),
        ("power B at the origin", |_| {
            let p = problem_preset("power_B_zero_A", 2, 2, None, &params(&[("b0", 1.0), ("t", 1.0)]))?;
            let j = p.b.btilde_jet(2, &[0.0, 0.0], 0.0, &[0.0, 0.0], 1)?;
            Ok(close(j.value, 1.0, 1e-15) && j.dp.iter().all(|v| v.abs() < 1e-15))
        }),
        ("power B tilde at unit p", |_| {
            let p = problem_preset("power_B_zero_A", 2, 2, None, &params(&[("b0", 1.0), ("t", 1.0)]))?;
            let j = p.b.btilde_jet(2, &[0.0, 0.0], 0.0, &[1.0, 0.0], 0)?;
            Ok(close(j.value, 2f64.sqrt(), 1e-14))
        }),
    ]
}

fn structure_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("skew projector regular, margin s", |_| {
            let p = problem_preset("skew_projector_const_B", 2, 2, None, &params(&[("s", 1.0)]))?;
            let r = check_regular(&p.a, &p.domain, &SamplingSpec::default(), None, 1e-8)?;
            Ok(r.verdict == Verdict::Holds && close(r.margin, 1.0, 1e-6))
        }),
        ("conformal printed fails with -1", |_| {
            let p = problem_preset("conformal_printed_const_B", 2, 1, None, &Params::new())?;
            let r = check_regular(&p.a, &p.domain, &SamplingSpec::default(), None, 1e-8)?;
            Ok(r.verdict == Verdict::Fails && (r.margin + 1.0).abs() < 1e-6 && r.witness.is_some())
        }),
        ("power B convexity", |_| {
            let s = SamplingSpec { p_radius: 3.0, ..Default::default() };
            let good = problem_preset("power_B_zero_A", 2, 1, None, &params(&[("t", 1.0)]))?;
            let bad = problem_preset("power_B_zero_A", 2, 1, None, &params(&[("t", 0.25)]))?;
            Ok(check_btilde_convex(&good.b, 1, &good.domain, &s, 1e-8)?.holds()
                && check_btilde_convex(&bad.b, 1, &bad.domain, &s, 1e-8)?.fails())
        }),
        ("half norm squared is a subsolution", |_| {
            let p = problem_preset("zero_A_const_B", 2, 2, None, &Params::new())?;
            let u = GridField::from_scalar(&p.domain, &[9, 9], &p.phi)?;
            let r = check_admissible_field(&u, &p, FieldMode::StrictSubsolution { delta: 0.0 }, 1e-10)?;
            Ok(r.holds() && r.margin.abs() < 1e-10)
        }),
    ]
}

fn solver_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("discrete Hessian of half norm squared", |_| {
            let p = problem_preset("zero_A_const_B", 2, 2, None, &Params::new())?;
            let u = GridField::from_scalar(&p.domain, &[7, 7], &p.phi)?;
            let jet = discrete_jet(&u, &p)?;
            Ok(jet.w.iter().all(|w| (w.matrix() - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-12))
        }),
        ("zero residual at the exact quadratic", |_| {
            let p = problem_preset("zero_A_const_B", 3, 2, None, &Params::new())?;
            let u = GridField::from_scalar(&p.domain, &[5, 5, 5], &p.phi)?;
            Ok(residual(&u, &p)?.iter().all(|r| r.abs() < 1e-12))
        }),
        ("quadratic solve exact", |_| {
            let p = problem_preset("zero_A_const_B", 2, 2, None, &params(&[("mu", 1.5)]))?;
            let (u, rep) = solve(&p, &[17, 17], &SolveOptions::default())?;
            let ex = GridField::from_scalar(&p.domain, &[17, 17], p.exact.as_ref().expect("exact"))?;
            Ok(rep.converged && rep.residual <= 1e-10 && u.max_diff(&ex)? <= 1e-9)
        }),
    ]
}

fn verify_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("d2 stats of half norm squared", |_| {
            let p = problem_preset("zero_A_const_B", 2, 2, None, &Params::new())?;
            let u = GridField::from_scalar(&p.domain, &[9, 9], &p.phi)?;
            let e = d2_stats(&u, &p)?;
            Ok(close(e.sup_interior, 1.0, 1e-10) && close(e.sup_boundary, 1.0, 1e-10) && close(e.c_emp, 0.5, 1e-10))
        }),
        ("decomposition of a diagonal matrix", |_| {
            let d = decompose(&SymMat::diag(&[3.0, 2.0, 1.0])?, 2, 2)?;
            Ok(close(d.r, 6.0, 1e-15) && close(d.s_km1, 5.0, 1e-15) && close(d.lhs, 11.0, 1e-14))
        }),
        ("tangential frame on a diagonal matrix", |_| {
            Ok(tangential_frame_check(&SymMat::diag(&[3.0, 2.0, 1.0])?, 2, 0.0)?.margin == 0.0)
        }),
    ]
}

fn file_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("field round trip", |_| {
            let d = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 3.0])?;
            let u = GridField::from_fn(&d, &[4, 5], |x| (x[0] * 1.7).sin() / 3.0 + x[1].exp())?;
            let back = field_from_csv(&field_to_csv(&u))?;
            Ok(back.values.iter().zip(&u.values).all(|(a, b)| a.to_bits() == b.to_bits()) && back.m == u.m)
        }),
        ("hand-built zero field", |_| {
            let mut text = String::from("# n=2 m=3,3 lo=0,0 hi=1,1\n");
            for i in 0..3 {
                for j in 0..3 {
                    text.push_str(&format!("{i},{j},{},{},0\n", i as f64 / 2.0, j as f64 / 2.0));
                }
            }
            let u = field_from_csv(&text)?;
            Ok(u.values.iter().all(|&v| v == 0.0) && u.m == vec![3, 3] && u.lo == vec![0.0, 0.0] && u.hi == vec![1.0, 1.0])
        }),
        ("permuted rows rejected", |_| {
            let text = "# n=1 m=3 lo=0 hi=1\n1,0.5,0\n0,0,0\n2,1,0\n";
            Ok(matches!(field_from_csv(text), Err(Error::FieldFormat(m)) if m.contains("node order")))
        }),
    ]
}

fn config_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("minimal config", |_| {
            let c = parse_config(r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[33,33]}}"#)?;
            Ok(c.solver == SolveOptions::default() && c.grid_m()? == vec![33, 33])
        }),
        ("k > n names /problem/k", |_| {
            let r = parse_config(r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":3,"n":2},"grid":{"m":[9,9]}}"#);
            Ok(matches!(r, Err(Error::ConfigSchema { pointer, .. }) if pointer == "/problem/k"))
        }),
        ("duplicate key is a parse error", |_| {
            Ok(matches!(parse_config(r#"{"command":"solve","command":"verify"}"#), Err(Error::ConfigParse(_))))
        }),
    ]
}

fn exit_case(dir: &Path, name: &str, text: &str, expected: i32) -> Result<bool> {
    let cfg = match parse_config(text) {
        Ok(c) => c,
        Err(e) => return Ok(super::commands::exit_code_for(&e) == expected),
    };
    let out = run_command(&cfg, &dir.join(name));
    Ok(match out {
        Ok(o) => o.exit == expected,
        Err(e) => super::commands::exit_code_for(&e) == expected,
    })
}

fn exit_cases() -> Vec<(&'static str, Check)> {
    vec![
        ("exit 0: quadratic solve", |d| {
            let cfg = r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[9,9]}}"#;
            exit_case(d, "solve_ok", cfg, EXIT_OK)
        }),
        ("exit 2: conformal printed structure", |d| {
            let cfg = r#"{"command":"structure","problem":{"catalog":"conformal_printed_const_B","k":1,"n":2},"checks":{"seed":7}}"#;
            exit_case(d, "structure_fails", cfg, EXIT_CHECK_FAILED)
        }),
        ("exit 3: Newton budget exhausted", |d| {
            let cfg = r#"{"command":"solve","problem":{"catalog":"manufactured_exp","k":2,"n":2},"grid":{"m":[9,9]},
                "solver":{"max_newton":1,"homotopy_stages":0,"max_bisections":0}}"#;
            exit_case(d, "solve_stalls", cfg, EXIT_NO_CONVERGENCE)
        }),
        ("exit 4: bad config", |d| {
            let cfg = r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":3,"n":2},"grid":{"m":[9,9]}}"#;
            exit_case(d, "bad_config", cfg, EXIT_BAD_CONFIG)
        }),
        ("exit 4: missing seed", |d| {
            let cfg = r#"{"command":"structure","problem":{"catalog":"zero_A_const_B","k":2,"n":2}}"#;
            exit_case(d, "missing_seed", cfg, EXIT_BAD_CONFIG)
        }),
    ]
}

/// Run every suite; exit 0 iff all cases pass. Errors inside a case count
/// as failures.
pub(crate) fn run_selftest(out: &Path) -> Result<(i32, Value, String)> {
    let suites: Vec<(&str, Vec<(&str, Check)>)> = vec![
        ("symfun", symfun_cases()),
        ("model", model_cases()),
        ("structure", structure_cases()),
        ("solver", solver_cases()),
        ("verify", verify_cases()),
        ("field_io", file_cases()),
        ("config", config_cases()),
        ("exit_codes", exit_cases()),
    ];
    let scratch = out.join("selftest");
    let mut results = Vec::new();
    let mut lines = Vec::new();
    let (mut passed, mut total) = (0, 0);
    for (suite, cases) in suites {
        let mut rows = Vec::new();
        let mut ok = 0;
        for (name, check) in &cases {
            let (pass, error) = match check(&scratch) {
                Ok(p) => (p, None),
                Err(e) => (false, Some(e.to_string())),
            };
            ok += usize::from(pass);
            let mut row = json!({ "name": name, "passed": pass });
            if let Some(e) = error {
                row["error"] = Value::String(e);
            }
            rows.push(row);
        }
        lines.push(format!("{suite}: {ok}/{} passed", cases.len()));
        passed += ok;
        total += cases.len();
        results.push(json!({ "suite": suite, "passed": ok, "total": cases.len(), "cases": rows }));
    }
    lines.push(format!("total: {passed}/{total} passed"));
    let exit = if passed == total { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok((exit, json!({ "suites": results, "passed": passed, "total": total }), lines.join("\n")))
}
