use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stencil::derivatives_at;
use super::*;
use crate::model::{problem_preset, ParamValue, Params, ProblemSpec};
use crate::solver::{assemble_linearized, solve, GridField, OperatorVariant, SolveOptions};
use crate::structure::Verdict;
use crate::symfun::{matrix_sk, SymMat};
use crate::Error;

fn preset(name: &str, n: usize, k: usize) -> ProblemSpec {
    problem_preset(name, n, k, None, &Params::new()).unwrap()
}

fn field(prob: &ProblemSpec, m: usize, f: impl Fn(&[f64]) -> f64) -> GridField {
    GridField::from_fn(&prob.domain, &vec![m; prob.n], f).unwrap()
}

#[test]
fn stencils_exact_on_quadratics_everywhere() {
    let prob = preset("zero_A_const_B", 3, 2);
    let u = field(&prob, 6, |x| 0.5 * x[0] * x[0] - x[1] * x[2] + 2.0 * x[2] * x[2] + 3.0 * x[0] - x[1]);
    let hess = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, -1.0, 4.0]);
    for node in 0..u.len() {
        let x = u.coord(node);
        let (du, d2) = derivatives_at(&u, node);
        let want = [x[0] + 3.0, -x[2] - 1.0, -x[1] + 4.0 * x[2]];
        for d in 0..3 {
            assert!((du[d] - want[d]).abs() < 1e-11, "node {node}");
        }
        assert!((d2 - &hess).amax() < 1e-10, "node {node}");
    }
}

#[test]
fn d2_stats_examples() {
    let prob = preset("zero_A_const_B", 2, 2);
    let q = field(&prob, 9, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let s = d2_stats(&q, &prob).unwrap();
    assert!((s.sup_interior - 1.0).abs() < 1e-10);
    assert!((s.sup_boundary - 1.0).abs() < 1e-10);
    assert!((s.c_emp - 0.5).abs() < 1e-10);
    let affine = field(&prob, 9, |x| 2.0 * x[0] - x[1] + 0.3);
    let s = d2_stats(&affine, &prob).unwrap();
    assert!(s.c_emp.abs() < 1e-10 && s.sup_boundary.abs() < 1e-10);
    let shifted = q.with_values(q.values.iter().zip(&affine.values).map(|(a, b)| a + b).collect()).unwrap();
    assert!((d2_stats(&shifted, &prob).unwrap().c_emp - 0.5).abs() < 1e-10);
    let tiny = field(&prob, 3, |_| 0.0);
    assert!(matches!(d2_stats(&tiny, &prob), Err(Error::GridMismatch(_))));
}

#[test]
fn decomposition_examples() {
    let d = SymMat::diag(&[3.0, 2.0, 0.5]).unwrap();
    for k in 1..=3 {
        for axis in 0..3 {
            let dec = decompose(&d, k, axis).unwrap();
            let rest: Vec<f64> = (0..3).filter(|&i| i != axis).map(|i| d.get(i, i)).collect();
            let sk_rest = match k {
                1 => rest[0] + rest[1],
                2 => rest[0] * rest[1],
                _ => 0.0,
            };
            assert!((dec.r - sk_rest).abs() < 1e-13);
            assert!((dec.lhs - matrix_sk(&d, k).unwrap()).abs() < 1e-12);
        }
    }
    let w = SymMat::from_fn(3, |i, j| if i == j { 1.0 + i as f64 } else { 0.4 }).unwrap();
    let dec = decompose(&w, 1, 2).unwrap();
    assert!((dec.r - 3.0).abs() < 1e-14 && (dec.lhs - 6.0).abs() < 1e-14);
}

#[test]
fn decomposition_matches_direct_sk_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(2..=5);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let w = SymMat::symmetrized(&m * m.transpose() + DMatrix::identity(n, n) * 0.1);
        for k in 1..=n {
            let axis = rng.random_range(0..n);
            let dec = decompose(&w, k, axis).unwrap();
            let sk = matrix_sk(&w, k).unwrap();
            assert!((dec.lhs - sk).abs() <= 1e-12 * (1.0 + sk.abs()), "n={n} k={k}");
        }
    }
}

#[test]
fn tangential_frame_examples() {
    let d = SymMat::diag(&[3.0, 2.0, 1.0]).unwrap();
    let r = tangential_frame_check(&d, 2, 1e-12).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert_eq!(r.extra["residual"], 0.0);
    assert!(tangential_frame_check(&SymMat::identity(3), 3, 1e-12).unwrap().holds());
    let w = SymMat::from_fn(3, |i, j| if i == j { 3.0 } else { 0.5 }).unwrap();
    let r = tangential_frame_check(&w, 2, 1e-12).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert!(r.extra["residual"] > 0.0);
}

#[test]
fn trace_ellipticity_examples() {
    let prob = preset("zero_A_const_B", 2, 1);
    let r = trace_ellipticity_check(&field(&prob, 9, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])), &prob, 1e-9).unwrap();
    assert!(r.holds() && (r.margin - 2.0).abs() < 1e-10);
    let r = trace_ellipticity_check(&field(&prob, 9, |x| x[0] * x[0] - x[1] * x[1]), &prob, 1e-9).unwrap();
    assert!(r.holds() && r.margin.abs() < 1e-9);
    assert!(r.note.is_some());
    let r = trace_ellipticity_check(&field(&prob, 9, |x| -x[0] * x[0]), &prob, 1e-9).unwrap();
    assert!(r.fails());
}

fn solved(prob: &ProblemSpec, m: usize) -> GridField {
    let (u, rep) = solve(prob, &vec![m; prob.n], &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    u
}

#[test]
fn interior_audit_degenerate_and_monotone() {
    let mut p = Params::new();
    p.insert("mu".into(), ParamValue::Num(1.5));
    let prob = problem_preset("zero_A_const_B", 2, 2, None, &p).unwrap();
    let u = field(&prob, 13, |x| 0.75 * (x[0] * x[0] + x[1] * x[1]));
    let audit = interior_barrier_audit(&u, &u, &prob, &DEFAULT_K_LIST, &DEFAULT_EPS1_LIST, DEFAULT_C_CAP).unwrap();
    let op = assemble_linearized(&u, &prob, OperatorVariant::Drift).unwrap();
    let tmax = op.trace_f.iter().copied().fold(0.0, f64::max);
    for e in &audit.entries {
        assert!((e.c - e.eps1 * tmax).abs() < 1e-9, "{e:?}");
    }
    assert!(audit.informative);
    let r = DEFAULT_EPS1_LIST.len();
    for row in audit.entries.chunks(r) {
        for w in row.windows(2) {
            assert!(w[0].c <= w[1].c);
        }
    }
    let csv = audit.to_csv();
    assert!(csv.starts_with("K,eps1,C,worst_node_index,margin\n"));
    assert_eq!(csv.lines().count(), 1 + audit.entries.len());
}

#[test]
fn interior_audit_with_bumped_subsolution() {
    let prob = preset("zero_A_const_B", 2, 2);
    let u = solved(&prob, 17);
    let r2 = prob.domain.half_diagonal_sq();
    let c = 0.1;
    let sub = u.with_values((0..u.len()).map(|i| {
        let x = u.coord(i);
        u.values[i] - c * (r2 - x.iter().map(|v| v * v).sum::<f64>())
    }).collect()).unwrap();
    let audit = interior_barrier_audit(&u, &sub, &prob, &DEFAULT_K_LIST, &DEFAULT_EPS1_LIST, DEFAULT_C_CAP).unwrap();
    assert!(audit.informative);
    let best = &audit.entries[audit.best.unwrap()];
    assert!(best.eps1 > 0.0 && best.c.is_finite());
}

#[test]
fn interior_audit_rejects_inadmissible_subsolution() {
    let prob = preset("zero_A_const_B", 2, 2);
    let u = field(&prob, 9, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let bad = field(&prob, 9, |x| x[0] * x[0] - x[1] * x[1]);
    let err = interior_barrier_audit(&u, &bad, &prob, &[1.0], &[0.1], 1e3).unwrap_err();
    assert!(matches!(err, Error::InadmissibleAt { .. }));
}

#[test]
fn boundary_barrier_psi_on_face_and_slab_errors() {
    let prob = preset("zero_A_const_B", 2, 2);
    let u = field(&prob, 17, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let face = Face { axis: 0, side: Side::Lo };
    let params = BarrierParams { k: 4.0, mu: 1.0, n: 1.0, delta: 0.3, ..Default::default() };
    let rep = boundary_barrier_audit(&u, &u, &prob, &params, face, 0.0).unwrap();
    // u_sub = u: psi = 1 - exp(K d (N d - mu)) >= 0 whenever N delta <= mu.
    assert!(rep.extra["margin_positivity"] >= 0.0);
    assert_eq!(rep.extra["margin_positivity"], 0.0);
    let thin = BarrierParams { delta: 0.05, ..params.clone() };
    assert!(matches!(boundary_barrier_audit(&u, &u, &prob, &thin, face, 0.0), Err(Error::Empty(_))));
    let wide = BarrierParams { delta: 3.0, ..params };
    assert!(matches!(boundary_barrier_audit(&u, &u, &prob, &wide, face, 0.0), Err(Error::InvalidParameter { .. })));
    let bad_face = Face { axis: 2, side: Side::Hi };
    assert!(boundary_barrier_audit(&u, &u, &prob, &BarrierParams::default(), bad_face, 0.0).is_err());
}

#[test]
fn barrier_params_validation() {
    assert!(BarrierParams::default().validate().is_ok());
    assert!(BarrierParams { k: 0.0, ..Default::default() }.validate().is_err());
    assert!(BarrierParams { theta: 1.0, ..Default::default() }.validate().is_err());
    assert!(BarrierParams { eps1: 0.0, ..Default::default() }.validate().is_ok());
    let p: BarrierParams = serde_json::from_str(r#"{"K": 8, "N": 2, "M": 1}"#).unwrap();
    assert_eq!((p.k, p.n, p.m), (8.0, 2.0, 1.0));
    assert!((p.theta - 1.0 / 3.0).abs() < 1e-16);
}

#[test]
fn decomposition_check_on_quadratic_field_is_exact() {
    let prob = preset("zero_A_const_B", 2, 2);
    let u = field(&prob, 9, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    for side in [Side::Lo, Side::Hi] {
        let r = boundary_decomposition_check(&u, &prob, Face { axis: 1, side }, 1e-9).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.extra["identity_error"] < 1e-14);
        assert!(r.extra["dnn_gap"] < 1e-9);
    }
}

#[test]
fn auxiliary_probe_caps_a() {
    let prob = preset("zero_A_const_B", 2, 2);
    let u = field(&prob, 9, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let p = auxiliary_probe(&u, &u, &prob, &BarrierParams::default()).unwrap();
    // t_max = |x|^2 / 2 at the nodes next to a corner.
    let t = 0.75f64 * 0.75;
    assert!((p.t_max - t).abs() < 1e-12);
    assert!((p.a - 1.0 / ((1.0 + t) * (1.0 + t))).abs() < 1e-12);
    assert!((p.w_max - 1.0).abs() < 1e-12);
    assert_eq!(p.index_i, 0);
    assert_eq!(p.index_j, 1);
}

#[test]
fn covering_radius_of_skew_projector() {
    let prob = preset("skew_projector_const_B", 2, 2);
    let samples = vec![(vec![0.0, 0.0], 0.0, vec![1.0, 0.0])];
    // D_{p_1} A at p = e_1 has max entry s = 0.1.
    let rho = covering_radius(&prob.a, &samples).unwrap().unwrap();
    assert!((rho - 1.0 / (2.0 * 2.0 * 0.1)).abs() < 1e-12);
    let zero = preset("zero_A_const_B", 2, 2);
    assert_eq!(covering_radius(&zero.a, &samples).unwrap(), None);
}
