use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::coefficient::rotate_back;
use super::ParamValue;
use crate::error::{Error, Result};

/// Pointwise scalar function of `x` (boundary data, exact solutions,
/// manufactured sources).
#[derive(Clone)]
pub struct ScalarField {
    pub id: String,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl ScalarField {
    pub fn new(id: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { id: id.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `x -> f(x + shift)`
    pub fn translated(&self, shift: &[f64]) -> ScalarField {
        let inner = self.clone();
        let shift = shift.to_vec();
        ScalarField::new(format!("translate({})", self.id), move |x| {
            let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
            inner.eval(&y)
        })
    }

    /// `x -> f(Q^T x)`
    pub fn rotated(&self, q: &DMatrix<f64>) -> ScalarField {
        let inner = self.clone();
        let q = q.clone();
        ScalarField::new(format!("rotate({})", self.id), move |x| inner.eval(&rotate_back(&q, x)))
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.id)
    }
}

/// Smooth field with analytic gradient and Hessian.
#[derive(Clone)]
pub struct ManufacturedField {
    pub id: String,
    pub value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub hess: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

impl fmt::Debug for ManufacturedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ManufacturedField({})", self.id)
    }
}

impl ManufacturedField {
    /// `1/2 sum_i c_i x_i^2`.
    pub fn diagonal_quadratic(c: Vec<f64>) -> Self {
        let (c1, c2, c3) = (c.clone(), c.clone(), c.clone());
        ManufacturedField {
            id: format!("diag_quadratic{c:?}"),
            value: Arc::new(move |x| 0.5 * x.iter().zip(&c1).map(|(x, c)| c * x * x).sum::<f64>()),
            grad: Arc::new(move |x| x.iter().zip(&c2).map(|(x, c)| c * x).collect()),
            hess: Arc::new(move |x| DMatrix::from_diagonal(&DVector::from_column_slice(&c3[..x.len()]))),
        }
    }

    /// `exp(|x|^2 / 2)`.
    pub fn exp_half_norm_sq() -> Self {
        let e = |x: &[f64]| (0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp();
        ManufacturedField {
            id: "exp_half_norm_sq".into(),
            value: Arc::new(e),
            grad: Arc::new(move |x| {
                let v = e(x);
                x.iter().map(|xi| v * xi).collect()
            }),
            hess: Arc::new(move |x| {
                let v = e(x);
                let n = x.len();
                DMatrix::from_fn(n, n, |i, j| v * (if i == j { 1.0 } else { 0.0 } + x[i] * x[j]))
            }),
        }
    }

    /// `a exp(b . x)` summed with `1/2 mu |x|^2`: used for the strictness perturbation.
    pub fn quadratic_plus_exp(mu: f64, a: f64, b: Vec<f64>) -> Self {
        let (b1, b2, b3) = (b.clone(), b.clone(), b.clone());
        let ex = move |x: &[f64], b: &[f64]| a * x.iter().zip(b).map(|(x, b)| x * b).sum::<f64>().exp();
        ManufacturedField {
            id: format!("quad({mu})+{a}exp(b.x)"),
            value: Arc::new(move |x| 0.5 * mu * x.iter().map(|v| v * v).sum::<f64>() + ex(x, &b1)),
            grad: Arc::new(move |x| {
                let e = ex(x, &b2);
                x.iter().zip(&b2).map(|(xi, bi)| mu * xi + e * bi).collect()
            }),
            hess: Arc::new(move |x| {
                let e = ex(x, &b3);
                let n = x.len();
                DMatrix::from_fn(n, n, |i, j| if i == j { mu } else { 0.0 } + e * b3[i] * b3[j])
            }),
        }
    }

    pub fn as_scalar_field(&self) -> ScalarField {
        let v = self.value.clone();
        ScalarField::new(self.id.clone(), move |x| v(x))
    }
}

/// Scalar function of `z` used by the u-dependent catalog entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    /// `c e^z`
    Exp { c: f64 },
    /// `c z`
    Linear { c: f64 },
}

impl ScalarFn {
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            ScalarFn::Exp { c } => c * z.exp(),
            ScalarFn::Linear { c } => c * z,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            ScalarFn::Exp { c } => c * z.exp(),
            ScalarFn::Linear { c } => c,
        }
    }
}

/// Value lookup on the nodes of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalTable {
    pub lo: Vec<f64>,
    pub h: Vec<f64>,
    pub m: Vec<usize>,
    pub values: Vec<f64>,
}

impl NodalTable {
    fn lookup(&self, x: &[f64]) -> Result<f64> {
        let mut flat = 0usize;
        for d in 0..self.m.len() {
            let s = (x[d] - self.lo[d]) / self.h[d];
            let i = s.round();
            if (s - i).abs() > 1e-6 || i < 0.0 || i as usize >= self.m[d] {
                return Err(Error::GridMismatch(format!("point {x:?} is not a node of the source table")));
            }
            flat = flat * self.m[d] + i as usize;
        }
        Ok(self.values[flat])
    }
}

#[derive(Clone)]
pub(crate) enum BKind {
    Const { c: f64 },
    /// `b0 (1 + |p|^2)^t`
    Power { b0: f64, t: f64 },
    /// `c e^z`
    ExpU { c: f64 },
    /// `(f0/g0) exp(beta |x - p|^2 / 2)`
    OtQuadratic { scale: f64, beta: f64 },
    Pointwise { f: Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync> },
    Nodal { table: Arc<NodalTable> },
    Translated { inner: Box<SourceB>, shift: Vec<f64> },
    Rotated { inner: Box<SourceB>, q: DMatrix<f64> },
}

/// Positive scalar source `B(x, z, p)`.
#[derive(Clone)]
pub struct SourceB {
    pub id: String,
    pub params: BTreeMap<String, ParamValue>,
    pub(crate) kind: BKind,
}

impl fmt::Debug for SourceB {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceB").field("id", &self.id).field("params", &self.params).finish()
    }
}

/// `B` and its derivatives at a point: value, `D_p B`, `D_pp B`, `D_z B`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBJet {
    pub value: f64,
    pub dp: DVector<f64>,
    pub dpp: DMatrix<f64>,
    pub dz: f64,
}

/// `B~ = B^{1/k}` with its derivatives, plus the underlying `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BtildeJet {
    pub b: f64,
    pub value: f64,
    pub dp: DVector<f64>,
    pub dpp: DMatrix<f64>,
    pub dz: f64,
}

impl SourceB {
    pub(crate) fn new(id: &str, params: BTreeMap<String, ParamValue>, kind: BKind) -> Self {
        SourceB { id: id.to_string(), params, kind }
    }

    /// Source given pointwise in `x` alone.
    pub fn pointwise(id: &str, f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static) -> Self {
        SourceB::new(id, BTreeMap::new(), BKind::Pointwise { f: Arc::new(f) })
    }

    /// Source tabulated on grid nodes.
    pub fn nodal(id: &str, table: NodalTable) -> Self {
        SourceB::new(id, BTreeMap::new(), BKind::Nodal { table: Arc::new(table) })
    }

    pub fn depends_on_u(&self) -> bool {
        match &self.kind {
            BKind::ExpU { .. } => true,
            BKind::Translated { inner, .. } | BKind::Rotated { inner, .. } => inner.depends_on_u(),
            _ => false,
        }
    }

    pub fn depends_on_p(&self) -> bool {
        match &self.kind {
            BKind::Power { .. } | BKind::OtQuadratic { .. } => true,
            BKind::Translated { inner, .. } | BKind::Rotated { inner, .. } => inner.depends_on_p(),
            _ => false,
        }
    }

    pub fn eval(&self, x: &[f64], z: f64, p: &[f64]) -> Result<f64> {
        Ok(self.raw_jet(x, z, p, 0)?.value)
    }

    /// Derivatives of `B` itself up to `order`.
    pub fn raw_jet(&self, x: &[f64], z: f64, p: &[f64], order: u8) -> Result<RawBJet> {
        let n = p.len();
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let mut jet = RawBJet { value: 0.0, dp: DVector::zeros(n), dpp: DMatrix::zeros(n, n), dz: 0.0 };
        let pv = DVector::from_column_slice(p);
        match &self.kind {
            BKind::Const { c } => jet.value = *c,
            BKind::Power { b0, t } => {
                let s = 1.0 + p2;
                jet.value = b0 * s.powf(*t);
                if order >= 1 {
                    jet.dp = &pv * (2.0 * b0 * t * s.powf(t - 1.0));
                }
                if order >= 2 {
                    jet.dpp = DMatrix::identity(n, n) * (2.0 * b0 * t * s.powf(t - 1.0))
                        + &pv * pv.transpose() * (4.0 * b0 * t * (t - 1.0) * s.powf(t - 2.0));
                }
            }
            BKind::ExpU { c } => {
                jet.value = c * z.exp();
                jet.dz = jet.value;
            }
            BKind::OtQuadratic { scale, beta } => {
                let d = DVector::from_fn(n, |i, _| p[i] - x[i]);
                jet.value = scale * (0.5 * beta * d.norm_squared()).exp();
                if order >= 1 {
                    jet.dp = &d * (jet.value * beta);
                }
                if order >= 2 {
                    jet.dpp = (DMatrix::identity(n, n) * *beta + &d * d.transpose() * (beta * beta)) * jet.value;
                }
            }
            BKind::Pointwise { f } => jet.value = f(x)?,
            BKind::Nodal { table } => jet.value = table.lookup(x)?,
            BKind::Translated { inner, shift } => {
                let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a + b).collect();
                jet = inner.raw_jet(&y, z, p, order)?;
            }
            BKind::Rotated { inner, q } => {
                let inner_jet = inner.raw_jet(&rotate_back(q, x), z, &rotate_back(q, p), order)?;
                jet.value = inner_jet.value;
                jet.dz = inner_jet.dz;
                jet.dp = q * inner_jet.dp;
                jet.dpp = q * inner_jet.dpp * q.transpose();
            }
        }
        if !jet.value.is_finite() || jet.dp.iter().chain(jet.dpp.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("source B at x = {x:?}, z = {z}, p = {p:?}")));
        }
        Ok(jet)
    }

    /// `B~ = B^{1/k}` and chain-rule derivatives. `B <= 0` is a hypothesis
    /// breach and is reported as an error.
    pub fn btilde_jet(&self, k: usize, x: &[f64], z: f64, p: &[f64], order: u8) -> Result<BtildeJet> {
        if order > 2 {
            return Err(Error::Domain(format!("jet order {order} > 2")));
        }
        let raw = self.raw_jet(x, z, p, order)?;
        let b = raw.value;
        if !(b > 0.0) {
            return Err(Error::NonPositiveSource { value: b, x: x.to_vec(), z, p: p.to_vec() });
        }
        let kf = k as f64;
        let value = b.powf(1.0 / kf);
        let d1 = value / (kf * b); // (1/k) B^{1/k - 1}
        let d2 = (1.0 / kf) * (1.0 / kf - 1.0) * value / (b * b);
        let dp = &raw.dp * d1;
        let dpp = &raw.dpp * d1 + &raw.dp * raw.dp.transpose() * d2;
        Ok(BtildeJet { b, value, dp, dpp, dz: raw.dz * d1 })
    }

    pub fn translated(&self, shift: &[f64]) -> SourceB {
        SourceB::new(
            &format!("translate({})", self.id),
            self.params.clone(),
            BKind::Translated { inner: Box::new(self.clone()), shift: shift.to_vec() },
        )
    }

    /// `B(Q^T x, z, Q^T p)`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> SourceB {
        SourceB::new(
            &format!("rotate({})", self.id),
            self.params.clone(),
            BKind::Rotated { inner: Box::new(self.clone()), q: q.clone() },
        )
    }
}
