use super::*;
use crate::model::BoxDomain;
use crate::solver::GridField;
use crate::Error;

fn minimal() -> &'static str {
    r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[33,33]}}"#
}

#[test]
fn minimal_config_fills_defaults() {
    let c = parse_config(minimal()).unwrap();
    assert_eq!(c.command, Some(Command::Solve));
    assert_eq!(c.solver, crate::solver::SolveOptions::default());
    assert_eq!(c.checks.seed, None);
    assert_eq!(c.output.dir, "out");
    let echo = serde_json::to_value(&c).unwrap();
    assert!(echo.get("output").is_none());
    assert!(echo["solver"]["rtol"].is_number());
    // The echo parses back to the same configuration.
    let again = parse_config(&serde_json::to_string(&echo).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&again).unwrap(), echo);
}

#[test]
fn schema_pointers() {
    let cases = [
        (r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":3,"n":2},"grid":{"m":[9,9]}}"#, "/problem/k"),
        (r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[9,2]}}"#, "/grid/m/1"),
        (r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[9,9]},"solver":{"rtol":"x"}}"#, "/solver/rtol"),
        (r#"{"command":"solve","problem":{"catalog":"nope","k":2,"n":2},"grid":{"m":[9,9]}}"#, "/problem/catalog"),
        (r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2}}"#, "/grid"),
        (r#"{"command":"solve","problem":{"catalog":"zero_A_const_B","k":2,"n":2},"grid":{"m":[9,9]},"extra":1}"#, "/extra"),
    ];
    for (text, want) in cases {
        match parse_config(text) {
            Err(Error::ConfigSchema { pointer, .. }) => assert_eq!(pointer, want, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn parse_errors() {
    assert!(matches!(parse_config(r#"{"command":"solve","command":"solve"}"#), Err(Error::ConfigParse(_))));
    assert!(matches!(parse_config(r#"{"problem":{"n":2,"n":3}}"#), Err(Error::ConfigParse(_))));
    assert!(matches!(parse_config("{\"command\": "), Err(Error::ConfigParse(_))));
    assert!(matches!(parse_config("{} trailing"), Err(Error::ConfigParse(_))));
    assert_eq!(exit_code_for(&Error::ConfigParse(String::new())), EXIT_BAD_CONFIG);
}

#[test]
fn field_csv_round_trip_is_bitwise() {
    let d = BoxDomain::new(vec![-1.0, 0.5, 0.0], vec![1.0, 2.0, 0.1]).unwrap();
    let u = GridField::from_fn(&d, &[3, 4, 5], |x| (x[0] / 3.0).exp() - x[1] * x[2] + 1e-300).unwrap();
    let back = field_from_csv(&field_to_csv(&u)).unwrap();
    assert_eq!(back.m, u.m);
    assert_eq!(back.lo, u.lo);
    assert_eq!(back.hi, u.hi);
    for (a, b) in back.values.iter().zip(&u.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn field_csv_rejects_bad_files() {
    let good = "# n=1 m=3 lo=0 hi=1\n0,0,1\n1,0.5,2\n2,1,3\n";
    assert_eq!(field_from_csv(good).unwrap().values, vec![1.0, 2.0, 3.0]);
    let bad = [
        ("0,0,1\n1,0.5,2\n2,1,3\n", "header"),
        ("# n=1 m=3 lo=0 hi=1\n0,0,1\n2,1,3\n1,0.5,2\n", "node order"),
        ("# n=1 m=3 lo=0 hi=1\n0,0,1\n1,0.5,2\n", "node count"),
        ("# n=1 m=3 lo=0 hi=1\n0,0,1\n1,0.5\n2,1,3\n", "columns"),
        ("# n=2 m=3 lo=0 hi=1\n", "lengths"),
    ];
    for (text, what) in bad {
        match field_from_csv(text) {
            Err(Error::FieldFormat(m)) => assert!(m.contains(what), "{m}"),
            other => panic!("{what}: {other:?}"),
        }
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, minimal().replace("33,33", "9,9")).unwrap();
    let out = dir.path().join("o");
    let args = |cmd: &str| vec!["hessctl".to_string(), cmd.into(), "--config".into(), cfg.display().to_string(), "--out".into(), out.display().to_string()];
    assert_eq!(run(args("solve")), EXIT_OK);
    assert!(out.join("solution.csv").exists());
    let u = read_field(&out.join("solution.csv")).unwrap();
    assert_eq!(u.m, vec![9, 9]);
    // Command mismatch against the file.
    assert_eq!(run(args("verify")), EXIT_BAD_CONFIG);
    assert_eq!(run(args("bogus")), EXIT_BAD_CONFIG);
    assert_eq!(run(["hessctl", "solve"]), EXIT_BAD_CONFIG);
    assert_eq!(run(["hessctl", "solve", "--seed", "x"]), EXIT_BAD_CONFIG);
}

#[test]
fn structure_seed_from_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"command":"structure","problem":{"catalog":"conformal_printed_const_B","k":1,"n":2}}"#).unwrap();
    let out = dir.path().join("o").display().to_string();
    let c = cfg.display().to_string();
    assert_eq!(run(["hessctl", "structure", "--config", &c, "--out", &out]), EXIT_BAD_CONFIG);
    assert_eq!(run(["hessctl", "structure", "--config", &c, "--out", &out, "--seed", "5"]), EXIT_CHECK_FAILED);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["exit_status"], 2);
    assert_eq!(report["config"]["checks"]["seed"], 5);
    let regular = &report["results"]["reports"][0];
    assert_eq!(regular["condition"], "regular");
    assert_eq!(regular["verdict"], "fails");
    assert!(regular["witness"]["xi"].is_array());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"command":"sweep","problem":{"catalog":"zero_A_const_B","k":1,"n":2},"grid":{"m":[9,9]},
        "sweep":{"param":"mu","values":[0.5,2]}}"#;
    let cfg = parse_config(text).unwrap();
    let o = run_command(&cfg, dir.path()).unwrap();
    assert_eq!(o.exit, EXIT_OK);
    let csv = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("mu,converged"));
}

#[test]
fn selftest_is_green() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_command(&RunConfig::empty(Command::Selftest), dir.path()).unwrap();
    assert_eq!(o.exit, EXIT_OK, "{}", o.summary);
    assert_eq!(o.report["results"]["passed"], o.report["results"]["total"]);
}

#[test]
fn reports_independent_of_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(r#"{"command":"structure","problem":{"catalog":"skew_projector_const_B","k":2,"n":2},"checks":{"seed":1}}"#).unwrap();
    let a = run_command(&cfg, &dir.path().join("a")).unwrap();
    let b = run_command(&cfg, &dir.path().join("b")).unwrap();
    let ra = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.exit, b.exit);
}
