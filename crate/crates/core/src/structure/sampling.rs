use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BoxDomain;

/// Sample counts for structural checks. The `x` samples are the box centre
/// followed by uniform draws; `z` is an even grid on `[z_lo, z_hi]`; `p` is
/// the origin followed by uniform draws from the ball of radius `p_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub x_count: usize,
    pub z_count: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub p_count: usize,
    pub p_radius: f64,
    /// Orthonormal `(xi, eta)` pairs per point.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec { x_count: 6, z_count: 3, z_lo: -1.0, z_hi: 1.0, p_count: 24, p_radius: 2.0, pairs: 12, seed: 0 }
    }
}

/// One `(x, z, p)` query point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub z: f64,
    pub p: Vec<f64>,
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gram-Schmidt on a pair; `None` if degenerate.
pub(crate) fn orthonormal_pair(a: &[f64], b: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    let na = a.norm();
    if !(na > 1e-12) {
        return None;
    }
    let xi = a / na;
    let e = &b - &xi * xi.dot(&b);
    let ne = e.norm();
    if !(ne > 1e-12) {
        return None;
    }
    let eta = e / ne;
    Some((xi.iter().copied().collect(), eta.iter().copied().collect()))
}

impl SamplingSpec {
    pub fn with_seed(seed: u64) -> Self {
        SamplingSpec { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| Err(Error::InvalidParameter { name: name.into(), reason: reason.into() });
        if self.x_count == 0 || self.z_count == 0 || self.p_count == 0 || self.pairs == 0 {
            return bad("samples", "all sample counts must be >= 1");
        }
        if !(self.p_radius > 0.0) || !self.p_radius.is_finite() {
            return bad("p_radius", "must be a positive number");
        }
        if !(self.z_lo <= self.z_hi) || !self.z_lo.is_finite() || !self.z_hi.is_finite() {
            return bad("z_lo", "need finite z_lo <= z_hi");
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn z_values(&self) -> Vec<f64> {
        if self.z_count == 1 {
            return vec![self.z_lo];
        }
        (0..self.z_count)
            .map(|i| self.z_lo + (self.z_hi - self.z_lo) * i as f64 / (self.z_count - 1) as f64)
            .collect()
    }

    pub(crate) fn x_values(&self, domain: &BoxDomain, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut xs = vec![domain.center()];
        for _ in 1..self.x_count {
            xs.push(domain.lo.iter().zip(&domain.hi).map(|(a, b)| rng.random_range(*a..=*b)).collect());
        }
        xs
    }

    pub(crate) fn p_values(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut ps = vec![vec![0.0; n]];
        while ps.len() < self.p_count {
            let g = gaussian(rng, n);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let r = self.p_radius * rng.random::<f64>().powf(1.0 / n as f64);
            ps.push(g.iter().map(|v| v * r / norm).collect());
        }
        ps
    }

    /// Cartesian product of the `x`, `z` and `p` samples.
    pub fn points(&self, domain: &BoxDomain) -> Result<Vec<Sample>> {
        self.validate()?;
        Ok(self.points_with(domain, &mut self.rng()))
    }

    pub(crate) fn points_with(&self, domain: &BoxDomain, rng: &mut ChaCha8Rng) -> Vec<Sample> {
        let xs = self.x_values(domain, rng);
        let ps = self.p_values(domain.dim(), rng);
        let zs = self.z_values();
        let mut out = Vec::with_capacity(xs.len() * zs.len() * ps.len());
        for x in &xs {
            for &z in &zs {
                for p in &ps {
                    out.push(Sample { x: x.clone(), z, p: p.clone() });
                }
            }
        }
        out
    }

    /// `count` random orthonormal pairs per point, drawn after the points
    /// from the same stream.
    pub(crate) fn pairs_for(&self, n: usize, points: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<(Vec<f64>, Vec<f64>)>> {
        (0..points)
            .map(|_| {
                let mut v = Vec::with_capacity(self.pairs);
                while v.len() < self.pairs {
                    let (a, b) = (gaussian(rng, n), gaussian(rng, n));
                    if let Some(pair) = orthonormal_pair(&a, &b) {
                        v.push(pair);
                    }
                }
                v
            })
            .collect()
    }
}
