use crate::error::{Error, Result};
use crate::model::{BoxDomain, ScalarField};

/// Scalar field on a uniform tensor grid over a box. Nodes are stored in
/// lexicographic order with the first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub n: usize,
    pub m: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, m: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let domain = BoxDomain::new(lo, hi)?;
        if m.len() != domain.dim() {
            return Err(Error::GridMismatch(format!("{} node counts for a {}-d box", m.len(), domain.dim())));
        }
        if let Some(d) = m.iter().position(|&c| c < 2) {
            return Err(Error::GridMismatch(format!("axis {d} has {} nodes, need at least 2", m[d])));
        }
        let total: usize = m.iter().product();
        if values.len() != total {
            return Err(Error::GridMismatch(format!("{} values for {total} nodes", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at node {i}")));
        }
        Ok(GridField { n: m.len(), m, lo: domain.lo, hi: domain.hi, values })
    }

    pub fn from_fn(domain: &BoxDomain, m: &[usize], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut g = GridField::zeros(domain, m)?;
        for i in 0..g.len() {
            g.values[i] = f(&g.coord(i));
        }
        if let Some(i) = g.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value at node {i}")));
        }
        Ok(g)
    }

    pub fn from_scalar(domain: &BoxDomain, m: &[usize], f: &ScalarField) -> Result<Self> {
        GridField::from_fn(domain, m, |x| f.eval(x))
    }

    pub fn zeros(domain: &BoxDomain, m: &[usize]) -> Result<Self> {
        let total = m.iter().product();
        GridField::new(domain.lo.clone(), domain.hi.clone(), m.to_vec(), vec![0.0; total])
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridField::new(self.lo.clone(), self.hi.clone(), self.m.clone(), values)
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain { lo: self.lo.clone(), hi: self.hi.clone() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> Vec<f64> {
        (0..self.n).map(|d| (self.hi[d] - self.lo[d]) / (self.m[d] - 1) as f64).collect()
    }

    /// Flat-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.n];
        for d in (0..self.n.saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.m[d + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for d in (0..self.n).rev() {
            idx[d] = flat % self.m[d];
            flat /= self.m[d];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.m).fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn coord_of(&self, idx: &[usize]) -> Vec<f64> {
        let h = self.h();
        (0..self.n).map(|d| self.lo[d] + idx[d] as f64 * h[d]).collect()
    }

    pub fn coord(&self, flat: usize) -> Vec<f64> {
        self.coord_of(&self.multi_index(flat))
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().zip(&self.m).any(|(&i, &m)| i == 0 || i + 1 == m)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.m == other.m && self.lo == other.lo && self.hi == other.hi
    }

    pub fn require_same_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grids differ: m = {:?} vs {:?}, lo = {:?} vs {:?}, hi = {:?} vs {:?}",
                self.m, other.m, self.lo, other.lo, self.hi, other.hi
            )))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Max norm of the difference, after checking the grids agree.
    pub fn max_diff(&self, other: &GridField) -> Result<f64> {
        self.require_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |a, (x, y)| a.max((x - y).abs())))
    }

    /// Overwrite boundary nodes with samples of `phi`.
    pub fn set_boundary(&mut self, phi: &ScalarField) {
        for i in self.boundary_nodes() {
            self.values[i] = phi.eval(&self.coord(i));
        }
    }
}
