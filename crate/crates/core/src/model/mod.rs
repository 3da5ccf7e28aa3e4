//! Problem data for `S_k[D^2 u - A(x, u, Du)] = B(x, u, Du)`: the matrix
//! function `A`, the source `B`, boundary data, and a catalog of instances.

mod catalog;
mod coefficient;
mod source;

pub use catalog::{boundary_catalog, catalog_instantiate, manufactured_b, problem_preset, Components, PRESET_NAMES};
pub use coefficient::{AJet, CoefficientA};
pub use source::{BtildeJet, ManufacturedField, NodalTable, RawBJet, ScalarField, ScalarFn, SourceB};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How derivative queries are answered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivMode {
    Analytic,
    /// Central differences with step `h (1 + |p|)`.
    FiniteDifference { h: f64 },
}

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Catalog parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

pub(crate) fn param_num(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Num(v)) if v.is_finite() => Ok(*v),
        Some(other) => Err(Error::InvalidParameter {
            name: key.to_string(),
            reason: format!("expected a finite number, got {other:?}"),
        }),
    }
}

pub(crate) fn param_text<'a>(params: &'a Params, key: &str, default: &'a str) -> Result<&'a str> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Text(s)) => Ok(s.as_str()),
        Some(other) => Err(Error::InvalidParameter {
            name: key.to_string(),
            reason: format!("expected a string, got {other:?}"),
        }),
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Domain(format!("box bounds have lengths {} and {}", lo.len(), hi.len())));
        }
        for (d, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Domain(format!("box axis {d}: need lo < hi, got [{a}, {b}]")));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        BoxDomain { lo: vec![lo; n], hi: vec![hi; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// `max_{x in box} |x|^2`.
    pub fn max_norm_sq(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (a * a).max(b * b)).sum()
    }

    /// Squared half-diagonal.
    pub fn half_diagonal_sq(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.25 * (b - a) * (b - a)).sum()
    }
}

/// The full Dirichlet problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub domain: BoxDomain,
    pub a: CoefficientA,
    pub b: SourceB,
    pub phi: ScalarField,
    /// Selects the u-dependent form; set when either `A` or `B` varies with `z`.
    pub depends_on_u: bool,
    /// Known exact solution, when the instance has one.
    pub exact: Option<ScalarField>,
    /// Supplied subsolution or admissible comparison function.
    pub subsolution: Option<ScalarField>,
}

impl ProblemSpec {
    pub fn new(name: &str, k: usize, domain: BoxDomain, a: CoefficientA, b: SourceB, phi: ScalarField) -> Result<Self> {
        let n = domain.dim();
        if n < 2 {
            return Err(Error::Domain(format!("dimension n = {n} must be >= 2")));
        }
        if k == 0 || k > n {
            return Err(Error::Domain(format!("order k = {k} must satisfy 1 <= k <= n = {n}")));
        }
        let depends_on_u = a.depends_on_u() || b.depends_on_u();
        Ok(ProblemSpec {
            name: name.to_string(),
            n,
            k,
            domain,
            a,
            b,
            phi,
            depends_on_u,
            exact: None,
            subsolution: None,
        })
    }

    pub fn with_exact(mut self, exact: ScalarField) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_subsolution(mut self, sub: ScalarField) -> Self {
        self.subsolution = Some(sub);
        self
    }

    pub fn with_source(mut self, b: SourceB) -> Self {
        self.depends_on_u = self.a.depends_on_u() || b.depends_on_u();
        self.b = b;
        self
    }
}

/// `A` jet at `(x, z, p)` up to `order`.
pub fn eval_a_jet(a: &CoefficientA, x: &[f64], z: f64, p: &[f64], order: u8) -> Result<AJet> {
    a.jet(x, z, p, order)
}

/// `B~ = B^{1/k}` jet at `(x, z, p)` up to `order`.
pub fn eval_btilde_jet(b: &SourceB, k: usize, x: &[f64], z: f64, p: &[f64], order: u8) -> Result<BtildeJet> {
    b.btilde_jet(k, x, z, p, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Num(*v))).collect()
    }

    fn a_of(name: &str, p: Params, n: usize) -> CoefficientA {
        catalog_instantiate(name, &p, n).unwrap().a.unwrap()
    }

    fn b_of(name: &str, p: Params, n: usize) -> SourceB {
        catalog_instantiate(name, &p, n).unwrap().b.unwrap()
    }

    #[test]
    fn zero_a_has_zero_jet() {
        let a = a_of("zero_A", Params::new(), 3);
        let j = a.jet(&[0.3, 0.1, -0.2], 0.7, &[1.0, -2.0, 0.5], 2).unwrap();
        assert!(j.value.matrix().iter().all(|&v| v == 0.0));
        assert!(j.dp.iter().chain(&j.dpp).chain(&j.dx).all(|m| m.iter().all(|&v| v == 0.0)));
        assert_eq!(j.dpp.len(), 9);
    }

    #[test]
    fn conformal_printed_at_unit_vector() {
        let a = a_of("conformal_A_as_printed", Params::new(), 2);
        let v = a.eval(&[0.0, 0.0], 0.0, &[1.0, 0.0]).unwrap();
        assert_eq!(v.matrix(), &DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.5]));
    }

    #[test]
    fn conformal_printed_second_derivative_tensor() {
        let n = 3;
        let a = a_of("conformal_A_as_printed", Params::new(), n);
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.3]] {
            let j = a.jet(&[0.1, 0.2, 0.3], 0.0, &p, 2).unwrap();
            for k in 0..n {
                for l in 0..n {
                    for r in 0..n {
                        for c in 0..n {
                            let expect = -d(k, l) * d(r, c) + d(r, k) * d(c, l) + d(r, l) * d(c, k);
                            assert_eq!(j.dpp(k, l)[(r, c)], expect);
                        }
                    }
                }
            }
        }
        let fd = a.clone().with_mode(DerivMode::FiniteDifference { h: DEFAULT_FD_STEP });
        let jf = fd.jet(&[0.1, 0.2, 0.3], 0.0, &[1.0, -2.0, 0.3], 2).unwrap();
        let ja = a.jet(&[0.1, 0.2, 0.3], 0.0, &[1.0, -2.0, 0.3], 2).unwrap();
        for (x, y) in jf.dpp.iter().zip(&ja.dpp) {
            assert!((x - y).norm() < 1e-5);
        }
    }

    #[test]
    fn u_diag_z_derivative_matches_differences() {
        for (g, c) in [("exp", 1.0), ("linear", -1.0), ("exp", 0.3)] {
            let mut p = params(&[("c", c)]);
            p.insert("g".into(), ParamValue::Text(g.into()));
            let a = a_of("u_diag_A", p, 2);
            let z = 0.4;
            let j = a.jet(&[0.0, 0.0], z, &[0.0, 0.0], 1).unwrap();
            let h = 1e-6;
            let gp = a.eval(&[0.0, 0.0], z + h, &[0.0, 0.0]).unwrap().get(0, 0);
            let gm = a.eval(&[0.0, 0.0], z - h, &[0.0, 0.0]).unwrap().get(0, 0);
            let fd = (gp - gm) / (2.0 * h);
            let dz = j.dz.unwrap();
            assert!((dz[(0, 0)] - fd).abs() < 1e-8);
            assert!((dz[(1, 1)] - fd).abs() < 1e-8);
            assert_eq!(dz[(0, 1)], 0.0);
        }
    }

    #[test]
    fn catalog_matrices_are_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let names: [(&str, Params); 5] = [
            ("conformal_A_as_printed", Params::new()),
            ("conformal_A_signflip", Params::new()),
            ("skew_projector_A", params(&[("s", 0.7)])),
            ("x_diag_A", params(&[("c", 2.0)])),
            ("u_diag_A", Params::new()),
        ];
        for (name, p) in names {
            let a = a_of(name, p, 3);
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let q: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let m = a.eval_raw(&x, rng.random_range(-1.0..1.0), &q);
                assert_eq!(m, m.transpose(), "{name}");
            }
        }
    }

    #[test]
    fn analytic_and_fd_derivatives_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let names: [(&str, Params); 6] = [
            ("conformal_A_as_printed", Params::new()),
            ("conformal_A_signflip", Params::new()),
            ("skew_projector_A", params(&[("s", 0.7)])),
            ("x_diag_A", params(&[("c", 2.0)])),
            ("u_diag_A", Params::new()),
            ("zero_A", Params::new()),
        ];
        for (name, p) in names {
            let a = a_of(name, p, 3);
            let f = a.clone().with_mode(DerivMode::FiniteDifference { h: DEFAULT_FD_STEP });
            for _ in 0..1000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let z = rng.random_range(-1.0..1.0);
                let ja = a.jet(&x, z, &q, 2).unwrap();
                let jf = f.jet(&x, z, &q, 2).unwrap();
                let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x - y).norm() / y.norm().max(1.0);
                for (u, v) in jf.dp.iter().zip(&ja.dp).chain(jf.dx.iter().zip(&ja.dx)).chain(jf.dpp.iter().zip(&ja.dpp)) {
                    assert!(rel(u, v) <= 1e-5, "{name}: {}", rel(u, v));
                }
                assert!(rel(jf.dz.as_ref().unwrap(), ja.dz.as_ref().unwrap()) <= 1e-5);
            }
        }
    }

    #[test]
    fn btilde_examples() {
        let b = b_of("const_B", params(&[("c", 1.0)]), 2);
        for k in 1..=3 {
            let j = b.btilde_jet(k, &[0.0, 0.0], 0.0, &[0.5, 0.2], 2).unwrap();
            assert_eq!(j.value, 1.0);
            assert!(j.dp.iter().chain(j.dpp.iter()).all(|&v| v == 0.0));
        }
        let b = b_of("power_B", params(&[("b0", 1.0), ("t", 1.0)]), 2);
        let j0 = b.btilde_jet(2, &[0.0, 0.0], 0.0, &[0.0, 0.0], 1).unwrap();
        assert_eq!(j0.value, 1.0);
        assert!(j0.dp.iter().all(|&v| v == 0.0));
        let j = b.btilde_jet(2, &[0.0, 0.0], 0.0, &[1.0, 0.0], 2).unwrap();
        assert!((j.value - 2f64.sqrt()).abs() < 1e-15);
        assert!((j.value.powi(2) - j.b).abs() <= 1e-12 * j.b);

        let b = b_of("exp_u_B", params(&[("c", 2.5)]), 2);
        for k in 1..=3 {
            let z = 0.3;
            let j = b.btilde_jet(k, &[0.0, 0.0], z, &[0.0, 0.0], 1).unwrap();
            let h = 1e-6;
            let fd = (b.btilde_jet(k, &[0.0, 0.0], z + h, &[0.0, 0.0], 0).unwrap().value
                - b.btilde_jet(k, &[0.0, 0.0], z - h, &[0.0, 0.0], 0).unwrap().value)
                / (2.0 * h);
            assert!((j.dz - fd).abs() < 1e-8);
            assert!((j.dz - j.value / k as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn btilde_hessian_matches_differences() {
        let b = b_of("power_B", params(&[("b0", 1.3), ("t", 0.7)]), 3);
        let k = 2;
        let p = [0.4, -0.8, 1.1];
        let j = b.btilde_jet(k, &[0.0; 3], 0.0, &p, 2).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut a = p;
            let mut c = p;
            a[i] += h;
            c[i] -= h;
            let ga = b.btilde_jet(k, &[0.0; 3], 0.0, &a, 1).unwrap().dp;
            let gc = b.btilde_jet(k, &[0.0; 3], 0.0, &c, 1).unwrap().dp;
            for l in 0..3 {
                assert!(((ga[l] - gc[l]) / (2.0 * h) - j.dpp[(i, l)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn non_positive_source_is_reported() {
        let b = SourceB::pointwise("neg", |_| Ok(-1.0));
        assert!(matches!(b.btilde_jet(2, &[0.0, 0.0], 0.0, &[0.0, 0.0], 0), Err(Error::NonPositiveSource { .. })));
    }

    #[test]
    fn catalog_rejects_bad_input() {
        assert!(matches!(catalog_instantiate("nope", &Params::new(), 2), Err(Error::UnknownCatalog(_))));
        assert!(matches!(
            catalog_instantiate("power_B", &params(&[("b0", 0.0)]), 2),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            catalog_instantiate("skew_projector_A", &params(&[("s", -1.0)]), 2),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn manufactured_sources() {
        let zero = a_of("zero_A", Params::new(), 3);
        for k in 1..=3 {
            let b = manufactured_b(k, &zero, &ManufacturedField::diagonal_quadratic(vec![1.0; 3]));
            let v = b.eval(&[0.2, -0.3, 0.9], 0.0, &[0.0; 3]).unwrap();
            assert!((v - crate::symfun::binomial(3, k)).abs() < 1e-14);
        }
        let zero2 = a_of("zero_A", Params::new(), 2);
        let b = manufactured_b(2, &zero2, &ManufacturedField::diagonal_quadratic(vec![2.0, 1.0]));
        assert!((b.eval(&[0.5, 0.5], 0.0, &[0.0; 2]).unwrap() - 2.0).abs() < 1e-14);

        // W(0) = I - A(0, 0) = I since A vanishes at p = 0.
        let skew = a_of("skew_projector_A", params(&[("s", 0.1)]), 2);
        let b = manufactured_b(2, &skew, &ManufacturedField::diagonal_quadratic(vec![1.0, 1.0]));
        assert!((b.eval(&[0.0, 0.0], 0.0, &[0.0; 2]).unwrap() - 1.0).abs() < 1e-15);
        // At x = (1, 0): Du = (1, 0), A = 0.05 diag(0, 1), W = diag(1, 0.95).
        assert!((b.eval(&[1.0, 0.0], 0.0, &[0.0; 2]).unwrap() - 0.95).abs() < 1e-15);

        let bad = manufactured_b(2, &zero2, &ManufacturedField::diagonal_quadratic(vec![-1.0, -1.0]));
        assert!(matches!(bad.eval(&[0.0, 0.0], 0.0, &[0.0; 2]), Err(Error::InadmissibleAt { .. })));
    }

    #[test]
    fn problem_spec_validation() {
        let d = BoxDomain::cube(2, -1.0, 1.0);
        let a = a_of("zero_A", Params::new(), 2);
        let b = b_of("const_B", Params::new(), 2);
        let phi = ScalarField::new("zero", |_| 0.0);
        assert!(ProblemSpec::new("x", 3, d.clone(), a.clone(), b.clone(), phi.clone()).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        let p = ProblemSpec::new("x", 2, d, a, b, phi).unwrap();
        assert!(!p.depends_on_u);
    }
}
