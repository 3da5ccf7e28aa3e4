use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solver::GridField;

/// First-derivative weights `(offset, weight)` at index `i` of an axis with
/// `m` points: central inside, second-order one-sided at either end.
pub(crate) fn first(i: usize, m: usize, h: f64) -> Vec<(isize, f64)> {
    let c = 1.0 / (2.0 * h);
    if i > 0 && i + 1 < m {
        vec![(-1, -c), (1, c)]
    } else if i == 0 {
        vec![(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
    } else {
        vec![(0, 3.0 * c), (-1, -4.0 * c), (-2, c)]
    }
}

/// Second-derivative weights: three-point inside, `(2, -5, 4, -1) / h^2` at
/// the ends.
pub(crate) fn second(i: usize, m: usize, h: f64) -> Vec<(isize, f64)> {
    let c = 1.0 / (h * h);
    if i > 0 && i + 1 < m {
        vec![(-1, c), (0, -2.0 * c), (1, c)]
    } else {
        let s: isize = if i == 0 { 1 } else { -1 };
        vec![(0, 2.0 * c), (s, -5.0 * c), (2 * s, 4.0 * c), (3 * s, -c)]
    }
}

pub(crate) fn require_one_sided(u: &GridField) -> Result<()> {
    if u.m.iter().any(|&m| m < 4) {
        return Err(Error::GridMismatch(format!("one-sided stencils need at least 4 points per axis, got {:?}", u.m)));
    }
    Ok(())
}

/// Gradient and Hessian at any node. Interior nodes get the solver's central
/// stencils; boundary nodes get one-sided stencils along the axes on which
/// they sit, and mixed entries are tensor products of first-derivative rules.
pub(crate) fn derivatives_at(u: &GridField, node: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = u.n;
    let (h, st) = (u.h(), u.strides());
    let idx = u.multi_index(node);
    let at = |offs: &[(usize, isize)]| -> f64 {
        let mut flat = node as isize;
        for &(d, o) in offs {
            flat += o * st[d] as isize;
        }
        u.values[flat as usize]
    };
    let mut du = vec![0.0; n];
    let mut d2 = DMatrix::zeros(n, n);
    for d in 0..n {
        du[d] = first(idx[d], u.m[d], h[d]).iter().map(|&(o, w)| w * at(&[(d, o)])).sum();
        d2[(d, d)] = second(idx[d], u.m[d], h[d]).iter().map(|&(o, w)| w * at(&[(d, o)])).sum();
        for e in (d + 1)..n {
            let fd = first(idx[d], u.m[d], h[d]);
            let fe = first(idx[e], u.m[e], h[e]);
            let mut s = 0.0;
            for &(od, wd) in &fd {
                for &(oe, we) in &fe {
                    s += wd * we * at(&[(d, od), (e, oe)]);
                }
            }
            d2[(d, e)] = s;
            d2[(e, d)] = s;
        }
    }
    (du, d2)
}
