//! Elementary symmetric functions, Gårding cones and the normalized operator
//! `f = S_k^{1/k}` acting on eigenvalue tuples and symmetric matrices.

mod matrix;

pub use matrix::{
    andrews_form, matrix_cone_classify, matrix_elem_sym_all, matrix_f_grad, matrix_sk,
    sk_derivative_matrix, SymMat,
};
pub(crate) use matrix::{default_cone_tol_matrix, sk_derivative_from, tridiagonal_coefficients};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered real n-tuple, the eigenvalue argument of `S_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("eigenvalue tuple".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("eigenvalue entry {v}")));
        }
        Ok(EigenTuple(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// The tuple with `delta` added to the last entry.
    pub fn shift_last(&self, delta: f64) -> EigenTuple {
        let mut v = self.0.clone();
        *v.last_mut().expect("non-empty") += delta;
        EigenTuple(v)
    }
}

impl AsRef<[f64]> for EigenTuple {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_order(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    Ok(())
}

/// `[S_0, S_1, ..., S_k]` of a slice, via the coefficient recurrence of
/// `prod (1 + lambda_i t)`. No range checks; `k` may exceed the length.
pub(crate) fn elem_sym_prefix(values: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (count, &x) in values.iter().enumerate() {
        let top = k.min(count + 1);
        for j in (1..=top).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// All elementary symmetric functions `S_0..=S_k` of `lambda`.
pub fn elem_sym_all(lambda: &EigenTuple, k: usize) -> Result<Vec<f64>> {
    check_order(lambda.len(), k)?;
    Ok(elem_sym_prefix(lambda.values(), k))
}

/// `S_k(lambda)`.
pub fn elem_sym(lambda: &EigenTuple, k: usize) -> Result<f64> {
    Ok(elem_sym_all(lambda, k)?[k])
}

fn without(values: &[f64], skip: &[usize]) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, &v)| v)
        .collect()
}

/// `dS_k / dlambda_i = S_{k-1}(lambda with entry i removed)`.
pub fn elem_sym_grad(lambda: &EigenTuple, k: usize) -> Result<Vec<f64>> {
    check_order(lambda.len(), k)?;
    let v = lambda.values();
    Ok((0..v.len())
        .map(|i| elem_sym_prefix(&without(v, &[i]), k - 1)[k - 1])
        .collect())
}

/// Hessian of `S_k`: off-diagonal entries `S_{k-2}` with entries `i, j`
/// removed, zero diagonal.
pub fn elem_sym_hess(lambda: &EigenTuple, k: usize) -> Result<DMatrix<f64>> {
    check_order(lambda.len(), k)?;
    let v = lambda.values();
    let n = v.len();
    let mut h = DMatrix::zeros(n, n);
    if k < 2 {
        return Ok(h);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = elem_sym_prefix(&without(v, &[i, j]), k - 2)[k - 2];
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeLabel {
    /// Open cone: every `S_j > tol`.
    Interior,
    /// Tolerance band around the boundary of the cone.
    Boundary,
    /// Some `S_j < -tol`.
    Outside,
}

/// Cone membership of an eigenvalue tuple together with the margins `S_1..S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeClass {
    pub label: ConeLabel,
    /// `margins[j - 1] = S_j(lambda)` for `j = 1..=k`.
    pub margins: Vec<f64>,
    pub tol: f64,
}

impl ConeClass {
    pub(crate) fn from_margins(margins: Vec<f64>, tol: f64) -> Self {
        let label = if margins.iter().all(|&m| m > tol) {
            ConeLabel::Interior
        } else if margins.iter().any(|&m| m < -tol) {
            ConeLabel::Outside
        } else {
            ConeLabel::Boundary
        };
        ConeClass { label, margins, tol }
    }

    /// Smallest margin and its order `j`.
    pub fn worst(&self) -> (usize, f64) {
        self.margins
            .iter()
            .enumerate()
            .fold((1, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i + 1, m) } else { acc })
    }

    /// First violated order, if outside.
    pub fn violation(&self) -> Option<(usize, f64)> {
        self.margins
            .iter()
            .enumerate()
            .find(|(_, &m)| m < -self.tol)
            .map(|(i, &m)| (i + 1, m))
    }
}

/// Default cone tolerance `1e-10 (1 + |lambda|_1)`.
pub fn default_cone_tol(values: &[f64]) -> f64 {
    1e-10 * (1.0 + values.iter().map(|v| v.abs()).sum::<f64>())
}

pub fn cone_classify(lambda: &EigenTuple, k: usize, tol: f64) -> Result<ConeClass> {
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("cone tolerance must be >= 0, got {tol}")));
    }
    let s = elem_sym_all(lambda, k)?;
    Ok(ConeClass::from_margins(s[1..].to_vec(), tol))
}

/// Value, gradient and cone class of `f = S_k^{1/k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorJet {
    pub value: f64,
    /// `f_i`. On the boundary band with `k > 1` the entries with a positive
    /// `dS_k/dlambda_i` are infinite.
    pub grad: Vec<f64>,
    pub cone: ConeClass,
}

/// `d f / d S_k = (1/k) S_k^{1/k - 1}`.
pub(crate) fn root_scale(sk: f64, k: usize) -> f64 {
    if k == 1 {
        1.0
    } else if sk > 0.0 {
        sk.powf(1.0 / k as f64 - 1.0) / k as f64
    } else {
        f64::INFINITY
    }
}

pub fn f_eval(lambda: &EigenTuple, k: usize) -> Result<OperatorJet> {
    f_eval_with_tol(lambda, k, default_cone_tol(lambda.values()))
}

pub fn f_eval_with_tol(lambda: &EigenTuple, k: usize, tol: f64) -> Result<OperatorJet> {
    let cone = cone_classify(lambda, k, tol)?;
    if let Some((j, margin)) = cone.violation() {
        return Err(Error::OutsideCone { k, j, margin });
    }
    let sk = cone.margins[k - 1];
    let value = if cone.label == ConeLabel::Boundary && sk <= 0.0 {
        0.0
    } else {
        sk.max(0.0).powf(1.0 / k as f64)
    };
    let scale = root_scale(sk, k);
    let grad = elem_sym_grad(lambda, k)?
        .into_iter()
        .map(|g| if g == 0.0 { 0.0 } else { scale * g })
        .collect();
    Ok(OperatorJet { value, grad, cone })
}

/// Hessian of `f = S_k^{1/k}` in eigenvalue space, strictly inside the cone.
pub fn f_hessian(lambda: &EigenTuple, k: usize) -> Result<DMatrix<f64>> {
    let cone = cone_classify(lambda, k, default_cone_tol(lambda.values()))?;
    if cone.label != ConeLabel::Interior {
        let (j, margin) = cone.worst();
        return Err(Error::OutsideCone { k, j, margin });
    }
    let sk = cone.margins[k - 1];
    let kf = k as f64;
    let g = elem_sym_grad(lambda, k)?;
    let h = elem_sym_hess(lambda, k)?;
    let a = sk.powf(1.0 / kf - 1.0) / kf;
    let b = (1.0 / kf) * (1.0 / kf - 1.0) * sk.powf(1.0 / kf - 2.0);
    let n = lambda.len();
    Ok(DMatrix::from_fn(n, n, |i, j| a * h[(i, j)] + b * g[i] * g[j]))
}

/// Smallest shift `R >= 0` of the last eigenvalue with
/// `f(lambda_1, ..., lambda_n + R) >= target` for every sample, to bisection
/// width `1e-6`.
pub fn find_r(samples: &[EigenTuple], target: f64, k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set for find_r".into()));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target C must be positive, got {target}")));
    }
    let mut worst: f64 = 0.0;
    for s in samples {
        let cone = cone_classify(s, k, default_cone_tol(s.values()))?;
        if cone.label != ConeLabel::Interior {
            let (j, margin) = cone.worst();
            return Err(Error::OutsideCone { k, j, margin });
        }
        let f_at = |r: f64| -> Result<f64> { Ok(f_eval(&s.shift_last(r), k)?.value) };
        if f_at(0.0)? >= target {
            continue;
        }
        let mut hi = 1.0;
        while f_at(hi)? < target {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NonFinite("find_r bracket".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if f_at(mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        worst = worst.max(hi);
    }
    Ok(worst)
}

/// Number of k-subsets of an n-set, as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> EigenTuple {
        EigenTuple::new(v.to_vec()).unwrap()
    }

    /// Subset-enumeration oracle.
    fn sk_subsets(v: &[f64], k: usize) -> f64 {
        let n = v.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| v[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(elem_sym(&t(&[1.0, 1.0, 1.0]), 2).unwrap(), 3.0);
        let v = [1.0, 1.0, -0.4];
        assert!((sk_subsets(&v, 2) - 0.2).abs() < 1e-15);
        assert!((elem_sym(&t(&v), 2).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(elem_sym(&t(&[0.0, 2.5, -3.0, 7.0]), 4).unwrap(), 0.0);
        assert!(matches!(elem_sym(&t(&[1.0, 2.0]), 3), Err(Error::Domain(_))));
        assert!(matches!(elem_sym(&t(&[1.0, 2.0]), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn grad_examples() {
        assert_eq!(elem_sym_grad(&t(&[1.0, 1.0, 1.0]), 2).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(elem_sym_grad(&t(&[3.0, 2.0, 1.0]), 3).unwrap(), vec![2.0, 3.0, 6.0]);
        assert_eq!(elem_sym_grad(&t(&[3.0, -2.0, 1.5, 9.0]), 1).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn grad_matches_central_differences() {
        let v = [1.3, 0.7, -0.2, 2.1];
        for k in 1..=4 {
            let g = elem_sym_grad(&t(&v), k).unwrap();
            for i in 0..4 {
                let h = 1e-5;
                let mut a = v;
                let mut b = v;
                a[i] += h;
                b[i] -= h;
                let fd = (elem_sym(&t(&a), k).unwrap() - elem_sym(&t(&b), k).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "k={k} i={i}");
            }
        }
    }

    #[test]
    fn cone_examples() {
        let c = cone_classify(&t(&[1.0, 1.0, 1.0]), 3, 1e-12).unwrap();
        assert_eq!(c.label, ConeLabel::Interior);
        let c = cone_classify(&t(&[1.0, 1.0, -0.4]), 2, 1e-12).unwrap();
        assert_eq!(c.label, ConeLabel::Interior);
        assert!((c.margins[0] - 1.6).abs() < 1e-15 && (c.margins[1] - 0.2).abs() < 1e-15);
        let c = cone_classify(&t(&[1.0, 1.0, -0.4]), 3, 1e-12).unwrap();
        assert_eq!(c.label, ConeLabel::Outside);
        assert!((c.margins[2] + 0.4).abs() < 1e-15);
        assert_eq!(c.violation().unwrap().0, 3);
        assert!(cone_classify(&t(&[1.0]), 1, -1.0).is_err());
    }

    #[test]
    fn f_eval_examples() {
        for n in 1..=5 {
            for k in 1..=n {
                let j = f_eval(&t(&vec![1.0; n]), k).unwrap();
                assert!((j.value - binomial(n, k).powf(1.0 / k as f64)).abs() < 1e-14);
                assert!(j.grad.iter().all(|&g| g > 0.0));
            }
        }
        let j = f_eval(&t(&[1.0, 1.0, -0.4]), 2).unwrap();
        assert!((j.value - 0.2f64.sqrt()).abs() < 1e-15);
        // S_2(2, 0) = 0 with S_1 = 2 > 0.
        let j = f_eval(&t(&[2.0, 0.0]), 2).unwrap();
        assert_eq!(j.value, 0.0);
        assert_eq!(j.cone.label, ConeLabel::Boundary);
        match f_eval(&t(&[1.0, 1.0, -0.4]), 3) {
            Err(Error::OutsideCone { j: 3, margin, .. }) => assert!((margin + 0.4).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn f_hessian_matches_gradient_differences() {
        let v = [1.5, 0.8, 0.3];
        let k = 2;
        let h = f_hessian(&t(&v), k).unwrap();
        for i in 0..3 {
            let d = 1e-6;
            let mut a = v;
            let mut b = v;
            a[i] += d;
            b[i] -= d;
            let ga = f_eval(&t(&a), k).unwrap().grad;
            let gb = f_eval(&t(&b), k).unwrap().grad;
            for j in 0..3 {
                let fd = (ga[j] - gb[j]) / (2.0 * d);
                assert!((fd - h[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn find_r_examples() {
        let one = vec![t(&[1.0, 1.0, 1.0])];
        assert_eq!(find_r(&one, 3f64.sqrt(), 2).unwrap(), 0.0);
        assert_eq!(find_r(&one, 0.5, 2).unwrap(), 0.0);
        let c = 5.0;
        let r = find_r(&one, c, 2).unwrap();
        assert!(f_eval(&one[0].shift_last(r), 2).unwrap().value >= c);
        assert!(f_eval(&one[0].shift_last(r - 2e-6), 2).unwrap().value < c);
        // f(1,1,1+R)^2 = 3 + 2R  =>  R = (C^2 - 3)/2.
        assert!((r - (c * c - 3.0) / 2.0).abs() < 2e-6);
        assert!(matches!(find_r(&[], 1.0, 2), Err(Error::Empty(_))));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(8, 4), 70.0);
        assert_eq!(binomial(5, 0), 1.0);
    }
}
