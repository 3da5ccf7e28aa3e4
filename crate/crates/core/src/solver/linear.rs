use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear sub-solve strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearMethod {
    /// Sparse LU for 2-d grids up to 257^2 nodes, GMRES otherwise.
    Auto,
    Direct,
    Iterative,
}

/// Compressed sparse rows with duplicate entries summed.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    n: usize,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in trip {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); trip.len()];
        for &(r, c, v) in trip {
            entries[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut ptr = vec![0];
        let (mut col, mut val) = (Vec::new(), Vec::new());
        for r in 0..n {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col.len() > *ptr.last().unwrap() && *col.last().unwrap() == c {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                }
            }
            ptr.push(col.len());
        }
        Csr { n, ptr, col, val }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for e in self.ptr[r]..self.ptr[r + 1] {
                s += self.val[e] * x[self.col[e]];
            }
            y[r] = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| (self.ptr[r]..self.ptr[r + 1]).find(|&e| self.col[e] == r).map_or(0.0, |e| self.val[e]))
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `A x = b` from triplets. `dim` is the spatial dimension and only
/// steers the automatic choice.
pub(crate) fn solve_triplets(
    n: usize,
    trip: &[(usize, usize, f64)],
    b: &[f64],
    method: LinearMethod,
    dim: usize,
    rtol: f64,
) -> Result<Vec<f64>> {
    let direct = match method {
        LinearMethod::Direct => true,
        LinearMethod::Iterative => false,
        LinearMethod::Auto => dim <= 2 && n <= 257 * 257,
    };
    if direct {
        sparse_lu(n, trip, b)
    } else {
        gmres(&Csr::from_triplets(n, trip), b, rtol, 80, 20_000)
    }
}

fn sparse_lu(n: usize, trip: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = trip.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::LinearSolveFailure(format!("matrix assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::LinearSolveFailure(format!("sparse LU: {e:?}")))?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolveFailure("sparse LU produced non-finite values (singular matrix?)".into()));
    }
    Ok(out)
}

/// Restarted GMRES with right Jacobi preconditioning. Stops when
/// `|b - A x| <= rtol |b|`.
pub(crate) fn gmres(a: &Csr, b: &[f64], rtol: f64, restart: usize, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let target = rtol * bnorm;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut iters = 0;
    loop {
        a.matvec(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let beta = norm(&r);
        if beta <= target {
            return Ok(x);
        }
        if iters >= max_iter {
            return Err(Error::LinearSolveFailure(format!(
                "GMRES stalled after {iters} iterations, relative residual {:e}",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut hcol: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut used = 0;
        for j in 0..restart {
            iters += 1;
            let z: Vec<f64> = v[j].iter().zip(&dinv).map(|(a, d)| a * d).collect();
            let mut w = vec![0.0; n];
            a.matvec(&z, &mut w);
            let mut hj = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let dot: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                hj[i] = dot;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= dot * vk;
                }
            }
            let wn = norm(&w);
            hj[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * hj[i] + sn[i] * hj[i + 1];
                hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
                hj[i] = t;
            }
            let d = (hj[j] * hj[j] + hj[j + 1] * hj[j + 1]).sqrt();
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (hj[j] / d, hj[j + 1] / d) };
            cs.push(c);
            sn.push(s);
            hj[j] = d;
            hj[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            hcol.push(hj);
            used = j + 1;
            if g[j + 1].abs() <= 0.5 * target || wn == 0.0 || iters >= max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in (i + 1)..used {
                s -= hcol[l][i] * y[l];
            }
            y[i] = s / hcol[i][i];
        }
        for (l, yl) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yl * v[l][i] * dinv[i];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure("GMRES produced non-finite values".into()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.3));
            }
        }
        t
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 1, 4.0)]);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![3.0, 5.0]);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let n = 60;
        let t = laplace_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = solve_triplets(n, &t, &b, LinearMethod::Direct, 2, 1e-13).unwrap();
        let x2 = solve_triplets(n, &t, &b, LinearMethod::Iterative, 3, 1e-13).unwrap();
        let mut r = vec![0.0; n];
        Csr::from_triplets(n, &t).matvec(&x1, &mut r);
        assert!(r.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(x1.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
