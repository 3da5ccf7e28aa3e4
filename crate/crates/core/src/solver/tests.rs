use super::*;
use crate::model::{catalog_instantiate, problem_preset, BoxDomain, ParamValue, Params};

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Num(*v))).collect()
}

fn quadratic_problem(n: usize, k: usize) -> ProblemSpec {
    problem_preset("zero_A_const_B", n, k, None, &Params::new()).unwrap()
}

#[test]
fn jet_is_exact_on_quadratics_and_bilinears() {
    let p = quadratic_problem(3, 2);
    let u = GridField::from_fn(&p.domain, &[5, 6, 7], |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
    let jet = discrete_jet(&u, &p).unwrap();
    for d2 in &jet.d2u {
        let e = d2.matrix() - nalgebra::DMatrix::identity(3, 3);
        assert!(e.amax() < 1e-12);
    }
    let u = GridField::from_fn(&p.domain, &[5, 6, 7], |x| x[0] * x[1]).unwrap();
    let jet = discrete_jet(&u, &p).unwrap();
    for d2 in &jet.d2u {
        assert!((d2.get(0, 1) - 1.0).abs() < 1e-12);
        assert!(d2.get(0, 0).abs() < 1e-12 && d2.get(1, 2).abs() < 1e-12);
    }
}

#[test]
fn jet_error_ratio_is_second_order() {
    let p = quadratic_problem(2, 2);
    let exact = |x: &[f64]| -(x[0].sin() * x[1].sin());
    let err = |m: usize| {
        let u = GridField::from_fn(&p.domain, &[m, m], |x| x[0].sin() * x[1].sin()).unwrap();
        let jet = discrete_jet(&u, &p).unwrap();
        jet.nodes
            .iter()
            .zip(&jet.d2u)
            .map(|(&node, d2)| {
                let x = u.coord(node);
                let want = [exact(&x), x[0].cos() * x[1].cos()];
                (d2.get(0, 0) - want[0]).abs().max((d2.get(0, 1) - want[1]).abs())
            })
            .fold(0.0, f64::max)
    };
    let ratio = err(17) / err(33);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn residual_vanishes_on_exact_data() {
    for (n, k) in [(2, 1), (2, 2), (3, 2), (3, 3)] {
        let p = quadratic_problem(n, k);
        let m = vec![6; n];
        let u = GridField::from_scalar(&p.domain, &m, p.exact.as_ref().unwrap()).unwrap();
        let r = residual(&u, &p).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-13), "n={n} k={k}");
    }
    let p = problem_preset("manufactured_exp", 2, 2, None, &Params::new()).unwrap();
    let ustar = p.exact.clone().unwrap();
    let b = manufactured_b_discrete(&p, &ustar, &[9, 9]).unwrap();
    let p = p.with_source(b);
    let u = GridField::from_scalar(&p.domain, &[9, 9], &ustar).unwrap();
    assert!(residual(&u, &p).unwrap().iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn residual_scales_with_perturbation() {
    let p = quadratic_problem(2, 2);
    let base = GridField::from_scalar(&p.domain, &[11, 11], p.exact.as_ref().unwrap()).unwrap();
    let bump = |x: &[f64]| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]);
    let norm = |eps: f64| {
        let mut u = base.clone();
        for i in 0..u.len() {
            u.values[i] += eps * bump(&u.coord(i));
        }
        residual(&u, &p).unwrap().iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    };
    let (a, b) = (norm(1e-3), norm(2e-3));
    assert!(a > 0.0 && (b / a - 2.0).abs() < 0.01, "{a} {b}");
}

#[test]
fn k1_operator_is_five_point_laplacian() {
    let p = quadratic_problem(2, 1);
    let u = GridField::from_scalar(&p.domain, &[5, 5], p.exact.as_ref().unwrap()).unwrap();
    let op = assemble_linearized(&u, &p, OperatorVariant::Drift).unwrap();
    let h = u.h();
    for row in &op.rows {
        let nz: Vec<f64> = row.iter().map(|e| e.1).filter(|w| *w != 0.0).collect();
        assert_eq!(nz.len(), 5);
        assert!((row[0].1 + 4.0 / (h[0] * h[0])).abs() < 1e-12);
        assert!((row.iter().map(|e| e.1).sum::<f64>()).abs() < 1e-10);
    }
    assert!(op.trace_f.iter().all(|&t| (t - 2.0).abs() < 1e-15));
}

#[test]
fn drift_operator_kills_constants() {
    let n = 2;
    let a = catalog_instantiate("skew_projector_A", &params(&[("s", 0.3)]), n).unwrap().a.unwrap();
    let b = catalog_instantiate("power_B", &params(&[("b0", 1.0), ("t", 0.5)]), n).unwrap().b.unwrap();
    let phi = ScalarField::new("q", |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>());
    let p = ProblemSpec::new("t", 2, BoxDomain::cube(2, -1.0, 1.0), a, b, phi.clone()).unwrap();
    let u = GridField::from_scalar(&p.domain, &[7, 7], &phi).unwrap();
    let op = assemble_linearized(&u, &p, OperatorVariant::Drift).unwrap();
    let ones = vec![1.0; u.len()];
    assert!(op.apply(&ones).iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn jacobian_matches_directional_differences() {
    let n = 2;
    let a = catalog_instantiate("skew_projector_A", &params(&[("s", 0.3)]), n).unwrap().a.unwrap();
    let b = catalog_instantiate("power_B", &params(&[("b0", 1.0), ("t", 0.5)]), n).unwrap().b.unwrap();
    let phi = ScalarField::new("q", |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>() + 0.1 * x[0] * x[1]);
    let p = ProblemSpec::new("t", 2, BoxDomain::cube(2, -1.0, 1.0), a, b, phi.clone()).unwrap();
    let u = GridField::from_scalar(&p.domain, &[9, 9], &phi).unwrap();
    let op = assemble_linearized(&u, &p, OperatorVariant::FullNewton).unwrap();
    let mut v = vec![0.0; u.len()];
    for &i in &op.nodes {
        let x = u.coord(i);
        v[i] = (3.0 * x[0]).sin() + x[1] * x[1];
    }
    let t = 1e-6;
    let shift = |s: f64| {
        let mut w = u.clone();
        for i in 0..w.len() {
            w.values[i] += s * v[i];
        }
        residual(&w, &p).unwrap()
    };
    let (rp, rm) = (shift(t), shift(-t));
    let jv = op.apply(&v);
    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * t)).collect();
    let num = fd.iter().zip(&jv).fold(0.0, |a: f64, (x, y)| a.max((x - y).abs()));
    let den = jv.iter().fold(0.0, |a: f64, y| a.max(y.abs()));
    assert!(num / den < 1e-6, "{}", num / den);
}

#[test]
fn solves_quadratic_problem_exactly() {
    let p = quadratic_problem(2, 2);
    let (u, rep) = solve(&p, &[17, 17], &SolveOptions::default()).unwrap();
    assert!(rep.converged && rep.residual <= 1e-10);
    let exact = GridField::from_scalar(&p.domain, &[17, 17], p.exact.as_ref().unwrap()).unwrap();
    assert!(u.max_diff(&exact).unwrap() < 1e-9);
    assert!(rep.damping.iter().all(|d| d.min_cone_margin > 0.0));
}

#[test]
fn k1_matches_direct_poisson_solve() {
    // B = 2 + x_1: Delta u = B, u = phi on the boundary.
    let a = catalog_instantiate("zero_A", &Params::new(), 2).unwrap().a.unwrap();
    let b = SourceB::pointwise("lin", |x| Ok(2.0 + x[0]));
    let phi = ScalarField::new("phi", |x: &[f64]| x[0] * x[0] + 0.3 * x[1]);
    let p = ProblemSpec::new("poisson", 1, BoxDomain::cube(2, -1.0, 1.0), a, b, phi.clone()).unwrap();
    let m = [21, 21];
    let (u, _) = solve(&p, &m, &SolveOptions::default()).unwrap();

    let mut g = GridField::from_scalar(&p.domain, &m, &phi).unwrap();
    let nodes = g.interior_nodes();
    let mut unknown = vec![usize::MAX; g.len()];
    for (i, &n) in nodes.iter().enumerate() {
        unknown[n] = i;
    }
    let (h, st) = (g.h(), g.strides());
    let mut trip = vec![];
    let mut rhs = vec![0.0; nodes.len()];
    for (r, &node) in nodes.iter().enumerate() {
        rhs[r] = 2.0 + g.coord(node)[0];
        for d in 0..2 {
            let w = 1.0 / (h[d] * h[d]);
            trip.push((r, r, -2.0 * w));
            for nb in [node + st[d], node - st[d]] {
                if unknown[nb] == usize::MAX {
                    rhs[r] -= w * g.values[nb];
                } else {
                    trip.push((r, unknown[nb], w));
                }
            }
        }
    }
    let x = linear::solve_triplets(nodes.len(), &trip, &rhs, LinearMethod::Direct, 2, 0.0).unwrap();
    for (i, &n) in nodes.iter().enumerate() {
        g.values[n] = x[i];
    }
    assert!(u.max_diff(&g).unwrap() < 1e-11);
}
