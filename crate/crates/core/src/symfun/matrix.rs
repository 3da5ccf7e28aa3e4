use nalgebra::{DMatrix, SymmetricEigen};

use super::{default_cone_tol, f_hessian, root_scale, ConeClass, ConeLabel, EigenTuple};
use crate::error::{Error, Result};

/// Dense symmetric real matrix. Construction checks symmetry to
/// `1e-12 * max(1, max|w|)` and then symmetrizes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Domain(format!("matrix must be square and non-empty, got {}x{}", m.nrows(), m.ncols())));
        }
        if let Some(v) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        let n = m.nrows();
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (m[(i, j)] - m[(j, i)]).abs();
                if gap > 1e-12 * scale {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its transpose without checking.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        if m == m.transpose() {
            return SymMat(m);
        }
        let t = m.transpose();
        SymMat((m + t) * 0.5)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(DMatrix::zeros(n, n))
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `Q^T W Q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrized(q.transpose() * &self.0 * q)
    }

    /// Eigenvalues in descending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let se = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> EigenTuple {
        EigenTuple(self.eigen().0)
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigen().0.last().expect("non-empty")
    }

    /// Spectral norm `max |lambda|`.
    pub fn spectral_norm(&self) -> f64 {
        self.eigen().0.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Sum of absolute values of the entries, the scale used for tolerances.
    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Principal submatrix on `keep` indices.
    pub fn principal(&self, keep: &[usize]) -> SymMat {
        SymMat(DMatrix::from_fn(keep.len(), keep.len(), |i, j| self.0[(keep[i], keep[j])]))
    }
}

/// `[S_0, ..., S_k]` of a symmetric matrix: orthogonal tridiagonal
/// reduction followed by the three-term recurrence for the characteristic
/// coefficients of the leading blocks.
pub fn matrix_elem_sym_all(w: &SymMat, k: usize) -> Result<Vec<f64>> {
    let n = w.dim();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("order k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    Ok(tridiagonal_coefficients(w, k))
}

pub(crate) fn tridiagonal_coefficients(w: &SymMat, k: usize) -> Vec<f64> {
    let n = w.dim();
    let (diag, off): (Vec<f64>, Vec<f64>) = if n <= 2 {
        let d = (0..n).map(|i| w.0[(i, i)]).collect();
        let o = if n == 2 { vec![w.0[(1, 0)]] } else { vec![] };
        (d, o)
    } else {
        let (d, o) = nalgebra::linalg::SymmetricTridiagonal::new(w.0.clone()).unpack_tridiagonal();
        (d.iter().copied().collect(), o.iter().copied().collect())
    };
    // prev2 = coefficients of block j-2, prev = block j-1.
    let mut prev2 = vec![0.0; k + 1];
    let mut prev = vec![0.0; k + 1];
    prev[0] = 1.0;
    prev2[0] = 1.0;
    for j in 0..n {
        let a = diag[j];
        let b2 = if j > 0 { off[j - 1] * off[j - 1] } else { 0.0 };
        let mut cur = vec![0.0; k + 1];
        cur[0] = 1.0;
        for s in 1..=k {
            let mut v = prev[s] + a * prev[s - 1];
            if s >= 2 && j > 0 {
                v -= b2 * prev2[s - 2];
            }
            cur[s] = v;
        }
        prev2 = std::mem::replace(&mut prev, cur);
    }
    prev
}

/// Sum of the principal `k x k` minors of `W`.
pub fn matrix_sk(w: &SymMat, k: usize) -> Result<f64> {
    Ok(matrix_elem_sym_all(w, k)?[k])
}

/// `dS_k / dW = sum_{m=0}^{k-1} (-1)^m S_{k-1-m}(W) W^m`, evaluated by
/// Horner's rule. A polynomial in `W`, so it has no trouble with repeated
/// eigenvalues.
pub fn sk_derivative_matrix(w: &SymMat, k: usize) -> Result<SymMat> {
    let s = matrix_elem_sym_all(w, k)?;
    Ok(sk_derivative_from(w, &s, k))
}

pub(crate) fn sk_derivative_from(w: &SymMat, s: &[f64], k: usize) -> SymMat {
    let n = w.dim();
    let mut acc = DMatrix::identity(n, n) * s[0];
    for &sj in s.iter().take(k).skip(1) {
        acc = DMatrix::identity(n, n) * sj - &w.0 * acc;
    }
    SymMat::symmetrized(acc)
}

/// `F(W) = S_k(W)^{1/k}` and `F^{ij} = dF/dw_ij`.
///
/// `F^{ij}` is unbounded where `S_k` vanishes and `k > 1`; that case is
/// reported as a domain error.
pub fn matrix_f_grad(w: &SymMat, k: usize) -> Result<(f64, SymMat)> {
    let s = matrix_elem_sym_all(w, k)?;
    let cone = ConeClass::from_margins(s[1..].to_vec(), default_cone_tol_matrix(w));
    if let Some((j, margin)) = cone.violation() {
        return Err(Error::OutsideCone { k, j, margin });
    }
    let sk = s[k];
    if k > 1 && sk <= 0.0 {
        return Err(Error::Domain(format!("F^ij unbounded: S_{k} = {sk:e} on the cone boundary")));
    }
    let value = sk.max(0.0).powf(1.0 / k as f64);
    let d = sk_derivative_from(w, &s, k);
    let scale = root_scale(sk, k);
    Ok((value, SymMat::symmetrized(d.0 * scale)))
}

pub(crate) fn default_cone_tol_matrix(w: &SymMat) -> f64 {
    // |lambda|_1 <= sqrt(n) |W|_F
    let n = w.dim() as f64;
    1e-10 * (1.0 + n.sqrt() * w.0.norm())
}

/// Cone class of the spectrum of `W` without an eigendecomposition.
pub fn matrix_cone_classify(w: &SymMat, k: usize, tol: f64) -> Result<ConeClass> {
    let s = matrix_elem_sym_all(w, k)?;
    Ok(ConeClass::from_margins(s[1..].to_vec(), tol))
}

/// Second derivative `F^{ij,kl} eta_ij eta_kl` of `F = S_k^{1/k}` at `W`
/// along the symmetric direction `eta`, evaluated in the eigenframe of `W`.
///
/// Near-coincident eigenvalues (gap below `1e-8 (1 + rho(W))`) use the limit
/// `(f_ii + f_jj)/2 - f_ij` of the divided difference.
pub fn andrews_form(w: &SymMat, eta: &SymMat, k: usize) -> Result<f64> {
    let n = w.dim();
    if eta.dim() != n {
        return Err(Error::Domain(format!("direction is {}x{}, expected {n}x{n}", eta.dim(), eta.dim())));
    }
    let (vals, vecs) = w.eigen();
    let lambda = EigenTuple(vals.clone());
    let cone = super::cone_classify(&lambda, k, default_cone_tol(&vals))?;
    if cone.label != ConeLabel::Interior {
        let (j, margin) = cone.worst();
        return Err(Error::OutsideCone { k, j, margin });
    }
    if k == 1 {
        return Ok(0.0);
    }
    let grad = super::f_eval(&lambda, k)?.grad;
    let hess = f_hessian(&lambda, k)?;
    let rotated = eta.congruence(&vecs);
    let e = rotated.matrix();
    let rho = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gap_floor = 1e-8 * (1.0 + rho);
    let mut diag_part = 0.0;
    for i in 0..n {
        for j in 0..n {
            diag_part += hess[(i, j)] * e[(i, i)] * e[(j, j)];
        }
    }
    let mut off_part = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let gap = vals[i] - vals[j];
            let q = if gap.abs() < gap_floor {
                0.5 * (hess[(i, i)] + hess[(j, j)]) - hess[(i, j)]
            } else {
                (grad[i] - grad[j]) / gap
            };
            off_part += q * e[(i, j)] * e[(i, j)];
        }
    }
    Ok(diag_part + off_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rotation3(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        let rx = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos()]);
        let ry = DMatrix::from_row_slice(3, 3, &[b.cos(), 0.0, b.sin(), 0.0, 1.0, 0.0, -b.sin(), 0.0, b.cos()]);
        let rz = DMatrix::from_row_slice(3, 3, &[c.cos(), -c.sin(), 0.0, c.sin(), c.cos(), 0.0, 0.0, 0.0, 1.0]);
        rx * ry * rz
    }

    #[test]
    fn symmat_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(SymMat::new(m), Err(Error::NotSymmetric { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(SymMat::new(m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn matrix_sk_examples() {
        assert!((matrix_sk(&SymMat::identity(3), 2).unwrap() - 3.0).abs() < 1e-14);
        let d = SymMat::diag(&[1.0, 1.0, -0.4]).unwrap();
        assert!((matrix_sk(&d, 2).unwrap() - 0.2).abs() < 1e-14);
        let q = rotation3(0.3, -1.1, 2.0);
        let r = SymMat::symmetrized(q.transpose() * d.matrix() * &q);
        for k in 1..=3 {
            let a = matrix_sk(&d, k).unwrap();
            let b = matrix_sk(&r, k).unwrap();
            assert!((a - b).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn f_grad_examples() {
        let w = SymMat::from_fn(3, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 }).unwrap();
        let (_, f) = matrix_f_grad(&w, 1).unwrap();
        assert!((f.matrix() - DMatrix::identity(3, 3)).norm() < 1e-15);

        let lam = [3.0, 1.5, 0.5];
        let (v, f) = matrix_f_grad(&SymMat::diag(&lam).unwrap(), 2).unwrap();
        let jet = super::super::f_eval(&EigenTuple(lam.to_vec()), 2).unwrap();
        assert!((v - jet.value).abs() < 1e-14);
        for i in 0..3 {
            assert!((f.get(i, i) - jet.grad[i]).abs() < 1e-14);
            for j in 0..3 {
                if i != j {
                    assert_eq!(f.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn f_grad_positive_definite_inside_cone() {
        let w = SymMat::diag(&[2.0, 1.0, -0.3]).unwrap();
        let q = rotation3(0.7, 0.2, -0.4);
        let w = w.congruence(&q);
        let (_, f) = matrix_f_grad(&w, 2).unwrap();
        assert!(f.min_eigenvalue() > 0.0);
    }

    #[test]
    fn derivative_is_degeneracy_safe() {
        // Triple eigenvalue: dS_2/dW = S_1 I - W = 2I for W = I.
        let d = sk_derivative_matrix(&SymMat::identity(3), 2).unwrap();
        assert!((d.matrix() - DMatrix::identity(3, 3) * 2.0).norm() < 1e-15);
    }

    #[test]
    fn andrews_k1_vanishes() {
        let w = SymMat::diag(&[2.0, 1.0, 0.5]).unwrap();
        let eta = SymMat::from_fn(3, |i, j| (i + j) as f64 - 1.0).unwrap();
        assert_eq!(andrews_form(&w, &eta, 1).unwrap(), 0.0);
    }

    #[test]
    fn andrews_diagonal_direction_reduces_to_lambda_hessian() {
        let lam = [2.0, 1.0, 0.5];
        let w = SymMat::diag(&lam).unwrap();
        let d = [0.3, -1.0, 0.8];
        let eta = SymMat::diag(&d).unwrap();
        let h = f_hessian(&EigenTuple(lam.to_vec()), 2).unwrap();
        let mut expect = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                expect += h[(i, j)] * d[i] * d[j];
            }
        }
        assert!((andrews_form(&w, &eta, 2).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn andrews_rejects_dimension_mismatch() {
        let w = SymMat::identity(3);
        assert!(andrews_form(&w, &SymMat::identity(2), 2).is_err());
    }
}
