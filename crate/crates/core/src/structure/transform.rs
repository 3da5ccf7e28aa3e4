use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoxDomain, CoefficientA, ProblemSpec, ScalarField, SourceB};
use crate::solver::GridField;

/// Rigid change of coordinates `x^ = x + x0` or `x^ = Q x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Translate(Vec<f64>),
    /// Row-major orthogonal matrix.
    Rotate(Vec<Vec<f64>>),
}

impl Motion {
    pub fn rotation(q: &DMatrix<f64>) -> Motion {
        Motion::Rotate((0..q.nrows()).map(|i| q.row(i).iter().copied().collect()).collect())
    }

    pub fn matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Motion::Translate(_) => None,
            Motion::Rotate(rows) => {
                let n = rows.len();
                Some(DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN)))
            }
        }
    }

    /// Image of a point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Motion::Translate(x0) => x.iter().zip(x0).map(|(a, b)| a + b).collect(),
            Motion::Rotate(rows) => rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect(),
        }
    }

    /// Image of a vector (gradient, direction); translations leave it fixed.
    pub fn apply_vector(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Motion::Translate(_) => v.to_vec(),
            Motion::Rotate(_) => self.apply(v),
        }
    }

    pub fn inverse(&self) -> Motion {
        match self {
            Motion::Translate(x0) => Motion::Translate(x0.iter().map(|v| -v).collect()),
            Motion::Rotate(_) => Motion::rotation(&self.matrix().expect("rotation").transpose()),
        }
    }

    fn validate(&self, n: usize) -> Result<Option<DMatrix<f64>>> {
        match self {
            Motion::Translate(x0) => {
                if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("translation vector must have {n} finite entries")));
                }
                Ok(None)
            }
            Motion::Rotate(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Domain(format!("rotation must be {n}x{n}")));
                }
                let q = self.matrix().expect("rotation");
                check_orthogonal(&q)?;
                Ok(Some(q))
            }
        }
    }
}

/// `|Q^T Q - I|_max <= 1e-12`.
pub fn check_orthogonal(q: &DMatrix<f64>) -> Result<()> {
    if !q.is_square() {
        return Err(Error::NotOrthogonal(f64::INFINITY));
    }
    let gap = (q.transpose() * q - DMatrix::identity(q.nrows(), q.nrows())).amax();
    if !(gap <= 1e-12) {
        return Err(Error::NotOrthogonal(gap));
    }
    Ok(())
}

/// `(perm, sign)` with `Q[i][perm[i]] = sign[i]` when `Q` is a signed
/// permutation.
pub fn signed_permutation(q: &DMatrix<f64>) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = q.nrows();
    let mut perm = Vec::with_capacity(n);
    let mut sign = Vec::with_capacity(n);
    for i in 0..n {
        let nz: Vec<usize> = (0..n).filter(|&j| q[(i, j)] != 0.0).collect();
        if nz.len() != 1 || q[(i, nz[0])].abs() != 1.0 {
            return None;
        }
        perm.push(nz[0]);
        sign.push(q[(i, nz[0])]);
    }
    let mut seen = perm.clone();
    seen.sort_unstable();
    seen.dedup();
    (seen.len() == n).then_some((perm, sign))
}

pub fn transform_coefficient(a: &CoefficientA, motion: &Motion, n: usize) -> Result<CoefficientA> {
    Ok(match (motion, motion.validate(n)?) {
        (Motion::Translate(x0), _) => a.translated(&x0.iter().map(|v| -v).collect::<Vec<_>>()),
        (_, Some(q)) => a.rotated(&q),
        _ => unreachable!(),
    })
}

pub fn transform_source(b: &SourceB, motion: &Motion, n: usize) -> Result<SourceB> {
    Ok(match (motion, motion.validate(n)?) {
        (Motion::Translate(x0), _) => b.translated(&x0.iter().map(|v| -v).collect::<Vec<_>>()),
        (_, Some(q)) => b.rotated(&q),
        _ => unreachable!(),
    })
}

pub fn transform_scalar(f: &ScalarField, motion: &Motion, n: usize) -> Result<ScalarField> {
    Ok(match (motion, motion.validate(n)?) {
        (Motion::Translate(x0), _) => f.translated(&x0.iter().map(|v| -v).collect::<Vec<_>>()),
        (_, Some(q)) => f.rotated(&q),
        _ => unreachable!(),
    })
}

/// Image of the box; rotations must be signed permutations.
pub fn transform_box(domain: &BoxDomain, motion: &Motion) -> Result<BoxDomain> {
    let n = domain.dim();
    match (motion, motion.validate(n)?) {
        (Motion::Translate(x0), _) => BoxDomain::new(
            domain.lo.iter().zip(x0).map(|(a, b)| a + b).collect(),
            domain.hi.iter().zip(x0).map(|(a, b)| a + b).collect(),
        ),
        (_, Some(q)) => {
            let (perm, sign) = signed_permutation(&q).ok_or(Error::RotationBreaksBox)?;
            let lo = (0..n).map(|i| if sign[i] > 0.0 { domain.lo[perm[i]] } else { -domain.hi[perm[i]] }).collect();
            let hi = (0..n).map(|i| if sign[i] > 0.0 { domain.hi[perm[i]] } else { -domain.lo[perm[i]] }).collect();
            BoxDomain::new(lo, hi)
        }
        _ => unreachable!(),
    }
}

/// Problem in the new coordinates: `A^(x^, z, p^) = Q A(Q^T x^, z, Q^T p^) Q^T`,
/// `B^`, `phi^` and the mapped box.
pub fn transform_problem(prob: &ProblemSpec, motion: &Motion) -> Result<ProblemSpec> {
    let n = prob.n;
    let domain = transform_box(&prob.domain, motion)?;
    let mut out = ProblemSpec::new(
        &prob.name,
        prob.k,
        domain,
        transform_coefficient(&prob.a, motion, n)?,
        transform_source(&prob.b, motion, n)?,
        transform_scalar(&prob.phi, motion, n)?,
    )?;
    if let Some(e) = &prob.exact {
        out = out.with_exact(transform_scalar(e, motion, n)?);
    }
    if let Some(s) = &prob.subsolution {
        out = out.with_subsolution(transform_scalar(s, motion, n)?);
    }
    Ok(out)
}

/// Carry a grid field along the motion: `u^(x^) = u(x)`.
pub fn transform_field(u: &GridField, motion: &Motion) -> Result<GridField> {
    let domain = transform_box(&u.domain(), motion)?;
    match motion {
        Motion::Translate(_) => GridField::new(domain.lo, domain.hi, u.m.clone(), u.values.clone()),
        Motion::Rotate(_) => {
            let q = motion.matrix().expect("rotation");
            let (perm, sign) = signed_permutation(&q).ok_or(Error::RotationBreaksBox)?;
            let m: Vec<usize> = perm.iter().map(|&p| u.m[p]).collect();
            let mut out = GridField::new(domain.lo, domain.hi, m, vec![0.0; u.len()])?;
            let mut idx_new = vec![0; u.n];
            for flat in 0..u.len() {
                let idx = u.multi_index(flat);
                for i in 0..u.n {
                    let j = idx[perm[i]];
                    idx_new[i] = if sign[i] > 0.0 { j } else { u.m[perm[i]] - 1 - j };
                }
                let target = out.flat_index(&idx_new);
                out.values[target] = u.values[flat];
            }
            Ok(out)
        }
    }
}
