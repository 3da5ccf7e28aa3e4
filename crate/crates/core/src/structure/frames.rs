use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampling::gaussian;
use crate::error::{Error, Result};
use crate::model::BoxDomain;

/// Boundary point with unit outer normal `gamma`, orthonormal tangents, the
/// derivative `dgamma[(m, l)] = D_m gamma_l` of a unit extension of the
/// normal, and the curvature matrix `c_ab = xi^a_m xi^b_l D_m gamma_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFrame {
    pub x: Vec<f64>,
    pub normal: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
    pub dgamma: DMatrix<f64>,
    pub curvature: DMatrix<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BoundaryFrame {
    pub fn new(x: Vec<f64>, normal: Vec<f64>, tangents: Vec<Vec<f64>>, dgamma: DMatrix<f64>) -> Result<Self> {
        let n = x.len();
        let bad = |what: String| Err(Error::Domain(format!("degenerate boundary frame at {x:?}: {what}")));
        if normal.len() != n || tangents.len() + 1 != n || dgamma.shape() != (n, n) {
            return bad("inconsistent dimensions".into());
        }
        if (dot(&normal, &normal) - 1.0).abs() > 1e-10 {
            return bad(format!("|gamma| = {}", dot(&normal, &normal).sqrt()));
        }
        for (a, ta) in tangents.iter().enumerate() {
            if ta.len() != n || dot(ta, &normal).abs() > 1e-10 {
                return bad(format!("tangent {a} not orthogonal to the normal"));
            }
            for (b, tb) in tangents.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                if (dot(ta, tb) - want).abs() > 1e-10 {
                    return bad("tangents not orthonormal".into());
                }
            }
        }
        let curvature = tangential(&dgamma, &tangents);
        Ok(BoundaryFrame { x, normal, tangents, dgamma, curvature })
    }
}

/// `xi^a_m M_ml xi^b_l`.
pub(crate) fn tangential(m: &DMatrix<f64>, tangents: &[Vec<f64>]) -> DMatrix<f64> {
    let t = tangents.len();
    let n = m.nrows();
    DMatrix::from_fn(t, t, |a, b| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += tangents[a][i] * m[(i, j)] * tangents[b][j];
            }
        }
        s
    })
}

/// Orthonormal basis of the complement of a unit vector.
fn complement(normal: &[f64]) -> Vec<Vec<f64>> {
    let n = normal.len();
    let mut basis: Vec<Vec<f64>> = vec![normal.to_vec()];
    for e in 0..n {
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            for i in 0..n {
                v[i] -= c * b[i];
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-8 {
            basis.push(v.iter().map(|a| a / nv).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.split_off(1)
}

/// Frames on the sphere `|x - c| = r`. In two dimensions the points are
/// equally spaced in angle; otherwise they are seeded uniform draws.
pub fn sphere_frames(center: &[f64], radius: f64, count: usize, seed: u64) -> Result<Vec<BoundaryFrame>> {
    let n = center.len();
    if n < 2 || !(radius > 0.0) || count == 0 {
        return Err(Error::Domain(format!("sphere sampler needs n >= 2, r > 0, count >= 1 (n = {n}, r = {radius})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let dir: Vec<f64> = if n == 2 {
            let th = 2.0 * PI * i as f64 / count as f64;
            vec![th.cos(), th.sin()]
        } else {
            let g = gaussian(&mut rng, n);
            let ng = dot(&g, &g).sqrt();
            g.iter().map(|v| v / ng).collect()
        };
        let x = center.iter().zip(&dir).map(|(c, d)| c + radius * d).collect();
        let g = nalgebra::DVector::from_column_slice(&dir);
        let dgamma = (DMatrix::identity(n, n) - &g * g.transpose()) / radius;
        out.push(BoundaryFrame::new(x, dir.clone(), complement(&dir), dgamma)?);
    }
    Ok(out)
}

/// Frames on the ellipse `(x/a)^2 + (y/b)^2 = 1`, equally spaced in the
/// parameter angle.
pub fn ellipse_frames(a: f64, b: f64, count: usize) -> Result<Vec<BoundaryFrame>> {
    if !(a > 0.0 && b > 0.0) || count == 0 {
        return Err(Error::Domain(format!("ellipse sampler needs a, b > 0 and count >= 1 (a = {a}, b = {b})")));
    }
    (0..count)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / count as f64;
            let (s, c) = th.sin_cos();
            let x = vec![a * c, b * s];
            let nn = (b * b * c * c + a * a * s * s).sqrt();
            let normal = vec![b * c / nn, a * s / nn];
            let tangent = vec![-a * s / nn, b * c / nn];
            let kappa = a * b / nn.powi(3);
            let t = nalgebra::DVector::from_column_slice(&tangent);
            let dgamma = &t * t.transpose() * kappa;
            BoundaryFrame::new(x, normal, vec![tangent], dgamma)
        })
        .collect()
}

/// Frames on every face of a box: `per_axis` evenly spaced points along each
/// tangent direction (interior of the face), flat normal field.
pub fn box_face_frames(domain: &BoxDomain, per_axis: usize) -> Result<Vec<BoundaryFrame>> {
    let n = domain.dim();
    if per_axis == 0 {
        return Err(Error::Domain("box face sampler needs per_axis >= 1".into()));
    }
    let mut out = Vec::new();
    for axis in 0..n {
        for side in [-1.0, 1.0] {
            let others: Vec<usize> = (0..n).filter(|&d| d != axis).collect();
            let total = per_axis.pow(others.len() as u32);
            for flat in 0..total {
                let mut x = domain.center();
                x[axis] = if side < 0.0 { domain.lo[axis] } else { domain.hi[axis] };
                let mut rest = flat;
                for &d in &others {
                    let j = rest % per_axis;
                    rest /= per_axis;
                    let frac = (j as f64 + 1.0) / (per_axis as f64 + 1.0);
                    x[d] = domain.lo[d] + frac * (domain.hi[d] - domain.lo[d]);
                }
                let mut normal = vec![0.0; n];
                normal[axis] = side;
                let tangents = others
                    .iter()
                    .map(|&d| {
                        let mut t = vec![0.0; n];
                        t[d] = 1.0;
                        t
                    })
                    .collect();
                out.push(BoundaryFrame::new(x, normal, tangents, DMatrix::zeros(n, n))?);
            }
        }
    }
    Ok(out)
}
