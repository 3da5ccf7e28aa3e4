use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{DerivMode, ParamValue, ScalarFn};
use crate::error::{Error, Result};
use crate::symfun::SymMat;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum AKind {
    Zero,
    /// `-|p|^2 I / 2 + p (x) p`
    ConformalPrinted,
    /// `|p|^2 I / 2 - p (x) p`
    ConformalSignflip,
    /// `(s/2)(|p|^2 I - p (x) p)`
    SkewProjector { s: f64 },
    /// `c diag(x_1^2, ..., x_n^2)`
    XDiag { c: f64 },
    /// `g(z) I`
    UDiag { g: ScalarFn },
    Constant { m: DMatrix<f64> },
    /// `A(x + shift, z, p)`
    Translated { inner: Box<CoefficientA>, shift: Vec<f64> },
    /// `Q A(Q^T x, z, Q^T p) Q^T`
    Rotated { inner: Box<CoefficientA>, q: DMatrix<f64> },
}

/// Symmetric matrix function `A(x, z, p)` with derivative queries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientA {
    pub id: String,
    pub params: BTreeMap<String, ParamValue>,
    pub(crate) kind: AKind,
    pub mode: DerivMode,
}

/// Derivatives of `A` at one point. Tensors are stored as lists of `n x n`
/// matrices: `dp[k] = dA/dp_k`, `dpp[k * n + l] = d^2 A / dp_k dp_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AJet {
    pub value: SymMat,
    pub dz: Option<DMatrix<f64>>,
    pub dx: Vec<DMatrix<f64>>,
    pub dp: Vec<DMatrix<f64>>,
    pub dpp: Vec<DMatrix<f64>>,
}

impl AJet {
    pub fn dpp(&self, k: usize, l: usize) -> &DMatrix<f64> {
        &self.dpp[k * self.value.dim() + l]
    }

    /// `A_{ij,kl} xi_i xi_j eta_k eta_l`.
    pub fn codim_one_form(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let n = xi.len();
        let mut total = 0.0;
        for k in 0..n {
            for l in 0..n {
                let w = eta[k] * eta[l];
                if w == 0.0 {
                    continue;
                }
                let m = self.dpp(k, l);
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += m[(i, j)] * xi[i] * xi[j];
                    }
                }
                total += w * q;
            }
        }
        total
    }

    /// `sum_k dA/dp_k v_k`.
    pub fn dp_contract(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.value.dim();
        let mut out = DMatrix::zeros(n, n);
        for (k, m) in self.dp.iter().enumerate() {
            out += m * v[k];
        }
        out
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn finite_matrix(m: &DMatrix<f64>, x: &[f64], z: f64, p: &[f64]) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("coefficient A at x = {x:?}, z = {z}, p = {p:?}")))
    }
}

impl CoefficientA {
    pub(crate) fn new(id: &str, params: BTreeMap<String, ParamValue>, kind: AKind) -> Self {
        CoefficientA { id: id.to_string(), params, kind, mode: DerivMode::Analytic }
    }

    pub fn with_mode(mut self, mode: DerivMode) -> Self {
        self.mode = mode;
        self
    }

    /// Whether `A` varies with `z`.
    pub fn depends_on_u(&self) -> bool {
        match &self.kind {
            AKind::UDiag { .. } => true,
            AKind::Translated { inner, .. } | AKind::Rotated { inner, .. } => inner.depends_on_u(),
            _ => false,
        }
    }

    /// Matrix value, not symmetrized.
    pub fn eval_raw(&self, x: &[f64], z: f64, p: &[f64]) -> DMatrix<f64> {
        let n = p.len();
        let p2: f64 = p.iter().map(|v| v * v).sum();
        match &self.kind {
            AKind::Zero => DMatrix::zeros(n, n),
            AKind::ConformalPrinted => DMatrix::from_fn(n, n, |i, j| -0.5 * p2 * delta(i, j) + p[i] * p[j]),
            AKind::ConformalSignflip => DMatrix::from_fn(n, n, |i, j| 0.5 * p2 * delta(i, j) - p[i] * p[j]),
            AKind::SkewProjector { s } => DMatrix::from_fn(n, n, |i, j| 0.5 * s * (p2 * delta(i, j) - p[i] * p[j])),
            AKind::XDiag { c } => DMatrix::from_fn(n, n, |i, j| c * x[i] * x[i] * delta(i, j)),
            AKind::UDiag { g } => DMatrix::identity(n, n) * g.value(z),
            AKind::Constant { m } => m.clone(),
            AKind::Translated { inner, shift } => {
                let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
                inner.eval_raw(&y, z, p)
            }
            AKind::Rotated { inner, q } => {
                let (y, pp) = (rotate_back(q, x), rotate_back(q, p));
                q * inner.eval_raw(&y, z, &pp) * q.transpose()
            }
        }
    }

    pub fn eval(&self, x: &[f64], z: f64, p: &[f64]) -> Result<SymMat> {
        let m = self.eval_raw(x, z, p);
        finite_matrix(&m, x, z, p)?;
        Ok(SymMat::symmetrized(m))
    }

    /// Jet up to `order` (0, 1 or 2). Order 1 fills `dz`, `dx`, `dp`; order
    /// 2 adds `dpp`.
    pub fn jet(&self, x: &[f64], z: f64, p: &[f64], order: u8) -> Result<AJet> {
        if order > 2 {
            return Err(Error::Domain(format!("jet order {order} > 2")));
        }
        let value = self.eval(x, z, p)?;
        let mut jet = AJet { value, dz: None, dx: vec![], dp: vec![], dpp: vec![] };
        if order == 0 {
            return Ok(jet);
        }
        match self.mode {
            DerivMode::Analytic => self.analytic_derivatives(x, z, p, order, &mut jet),
            DerivMode::FiniteDifference { h } => self.fd_derivatives(x, z, p, order, h, &mut jet),
        }
        for m in jet.dx.iter().chain(&jet.dp).chain(&jet.dpp).chain(jet.dz.iter()) {
            finite_matrix(m, x, z, p)?;
        }
        Ok(jet)
    }

    fn analytic_derivatives(&self, x: &[f64], z: f64, p: &[f64], order: u8, jet: &mut AJet) {
        let n = p.len();
        let zero = || DMatrix::<f64>::zeros(n, n);
        match &self.kind {
            AKind::Zero | AKind::Constant { .. } => {
                jet.dz = Some(zero());
                jet.dx = vec![zero(); n];
                jet.dp = vec![zero(); n];
                if order == 2 {
                    jet.dpp = vec![zero(); n * n];
                }
            }
            AKind::ConformalPrinted | AKind::ConformalSignflip | AKind::SkewProjector { .. } => {
                // A = a |p|^2 I + b p (x) p
                let (a, b) = match self.kind {
                    AKind::ConformalPrinted => (-0.5, 1.0),
                    AKind::ConformalSignflip => (0.5, -1.0),
                    AKind::SkewProjector { s } => (0.5 * s, -0.5 * s),
                    _ => unreachable!(),
                };
                jet.dz = Some(zero());
                jet.dx = vec![zero(); n];
                jet.dp = (0..n)
                    .map(|k| {
                        DMatrix::from_fn(n, n, |i, j| {
                            2.0 * a * p[k] * delta(i, j) + b * (delta(i, k) * p[j] + p[i] * delta(j, k))
                        })
                    })
                    .collect();
                if order == 2 {
                    jet.dpp = (0..n * n)
                        .map(|kl| {
                            let (k, l) = (kl / n, kl % n);
                            DMatrix::from_fn(n, n, |i, j| {
                                2.0 * a * delta(k, l) * delta(i, j)
                                    + b * (delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k))
                            })
                        })
                        .collect();
                }
            }
            AKind::XDiag { c } => {
                jet.dz = Some(zero());
                jet.dx = (0..n)
                    .map(|m| DMatrix::from_fn(n, n, |i, j| if i == m && j == m { 2.0 * c * x[m] } else { 0.0 }))
                    .collect();
                jet.dp = vec![zero(); n];
                if order == 2 {
                    jet.dpp = vec![zero(); n * n];
                }
            }
            AKind::UDiag { g } => {
                jet.dz = Some(DMatrix::identity(n, n) * g.derivative(z));
                jet.dx = vec![zero(); n];
                jet.dp = vec![zero(); n];
                if order == 2 {
                    jet.dpp = vec![zero(); n * n];
                }
            }
            AKind::Translated { inner, shift } => {
                let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
                let mut inner_jet = AJet { value: jet.value.clone(), dz: None, dx: vec![], dp: vec![], dpp: vec![] };
                inner.analytic_derivatives(&y, z, p, order, &mut inner_jet);
                jet.dz = inner_jet.dz;
                jet.dx = inner_jet.dx;
                jet.dp = inner_jet.dp;
                jet.dpp = inner_jet.dpp;
            }
            AKind::Rotated { inner, q } => {
                let (y, pp) = (rotate_back(q, x), rotate_back(q, p));
                let mut ij = AJet { value: jet.value.clone(), dz: None, dx: vec![], dp: vec![], dpp: vec![] };
                inner.analytic_derivatives(&y, z, &pp, order, &mut ij);
                let conj = |m: &DMatrix<f64>| q * m * q.transpose();
                jet.dz = ij.dz.as_ref().map(conj);
                // d/dx_k = sum_c Q_kc d/dy_c after conjugation.
                let mix = |list: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
                    (0..n)
                        .map(|k| {
                            let mut acc = DMatrix::zeros(n, n);
                            for c in 0..n {
                                acc += &list[c] * q[(k, c)];
                            }
                            conj(&acc)
                        })
                        .collect()
                };
                jet.dx = mix(&ij.dx);
                jet.dp = mix(&ij.dp);
                if order == 2 {
                    jet.dpp = (0..n * n)
                        .map(|kl| {
                            let (k, l) = (kl / n, kl % n);
                            let mut acc = DMatrix::zeros(n, n);
                            for c in 0..n {
                                for d in 0..n {
                                    let w = q[(k, c)] * q[(l, d)];
                                    if w != 0.0 {
                                        acc += &ij.dpp[c * n + d] * w;
                                    }
                                }
                            }
                            conj(&acc)
                        })
                        .collect();
                }
            }
        }
    }

    fn fd_derivatives(&self, x: &[f64], z: f64, p: &[f64], order: u8, h_fd: f64, jet: &mut AJet) {
        let n = p.len();
        let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = h_fd * (1.0 + pnorm);
        let hx = h_fd * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let hz = h_fd * (1.0 + z.abs());
        let shifted = |v: &[f64], i: usize, d: f64| -> Vec<f64> {
            let mut w = v.to_vec();
            w[i] += d;
            w
        };
        jet.dz = Some((self.eval_raw(x, z + hz, p) - self.eval_raw(x, z - hz, p)) / (2.0 * hz));
        jet.dx = (0..n)
            .map(|m| (self.eval_raw(&shifted(x, m, hx), z, p) - self.eval_raw(&shifted(x, m, -hx), z, p)) / (2.0 * hx))
            .collect();
        jet.dp = (0..n)
            .map(|k| (self.eval_raw(x, z, &shifted(p, k, h)) - self.eval_raw(x, z, &shifted(p, k, -h))) / (2.0 * h))
            .collect();
        if order == 2 {
            // Second differences need a larger step to keep roundoff below truncation.
            let h2 = 10.0 * h;
            let base = self.eval_raw(x, z, p);
            jet.dpp = (0..n * n)
                .map(|kl| {
                    let (k, l) = (kl / n, kl % n);
                    if k == l {
                        (self.eval_raw(x, z, &shifted(p, k, h2)) - &base * 2.0 + self.eval_raw(x, z, &shifted(p, k, -h2)))
                            / (h2 * h2)
                    } else {
                        let pp = shifted(&shifted(p, k, h2), l, h2);
                        let pm = shifted(&shifted(p, k, h2), l, -h2);
                        let mp = shifted(&shifted(p, k, -h2), l, h2);
                        let mm = shifted(&shifted(p, k, -h2), l, -h2);
                        (self.eval_raw(x, z, &pp) - self.eval_raw(x, z, &pm) - self.eval_raw(x, z, &mp)
                            + self.eval_raw(x, z, &mm))
                            / (4.0 * h2 * h2)
                    }
                })
                .collect();
        }
    }

    pub fn translated(&self, shift: &[f64]) -> CoefficientA {
        CoefficientA {
            id: format!("translate({})", self.id),
            params: self.params.clone(),
            kind: AKind::Translated { inner: Box::new(self.clone()), shift: shift.to_vec() },
            mode: self.mode,
        }
    }

    /// `Q A(Q^T x, z, Q^T p) Q^T` for orthogonal `Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> CoefficientA {
        CoefficientA {
            id: format!("rotate({})", self.id),
            params: self.params.clone(),
            kind: AKind::Rotated { inner: Box::new(self.clone()), q: q.clone() },
            mode: self.mode,
        }
    }
}

/// `Q^T v`.
pub(crate) fn rotate_back(q: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|c| (0..n).map(|k| q[(k, c)] * v[k]).sum()).collect()
}
