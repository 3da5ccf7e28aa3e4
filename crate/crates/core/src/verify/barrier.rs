use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::{assemble_linearized, discrete_jet, GridField, LinearizedOperator, OperatorVariant};
use crate::structure::{argmin, CertificateReport, Witness};
use crate::symfun::{matrix_cone_classify, ConeLabel};

/// Barrier constants. The interior barrier uses `K`, `eps1`; the boundary
/// barrier adds `mu`, `N`, `delta`, `M`; the auxiliary-function probe uses
/// `a`, `b`, `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub eps1: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub delta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams { k: 1.0, eps1: 0.1, c: 0.0, mu: 1.0, n: 1.0, delta: 0.1, m: 1.0, a: 1.0, b: 1.0, theta: 1.0 / 3.0 }
    }
}

impl BarrierParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("K", self.k, false),
            ("eps1", self.eps1, true),
            ("C", self.c, true),
            ("mu", self.mu, false),
            ("N", self.n, false),
            ("delta", self.delta, false),
            ("M", self.m, false),
            ("a", self.a, false),
            ("b", self.b, false),
        ];
        for (name, v, zero_ok) in fields {
            if !v.is_finite() || v < 0.0 || (!zero_ok && v == 0.0) {
                let want = if zero_ok { ">= 0" } else { "> 0" };
                return Err(Error::InvalidParameter { name: name.into(), reason: format!("must be finite and {want}, got {v}") });
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter { name: "theta".into(), reason: format!("must lie in (0, 1), got {}", self.theta) });
        }
        Ok(())
    }
}

pub const DEFAULT_K_LIST: [f64; 9] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];
pub const DEFAULT_EPS1_LIST: [f64; 7] = [0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0];
pub const DEFAULT_C_CAP: f64 = 1e3;

/// One `(K, eps1)` cell: `C = max(0, max_nodes(eps1 sum F^{ii} - L phi))`
/// and `margin = C_cap - C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorEntry {
    #[serde(rename = "K")]
    pub k: f64,
    pub eps1: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Flat index of the node attaining `C`.
    pub worst_node_index: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorAudit {
    pub entries: Vec<InteriorEntry>,
    pub c_cap: f64,
    /// Some entry has `eps1 > 0` and `C <= C_cap`.
    pub informative: bool,
    /// Entry with the largest `eps1`, then smallest `C`, among informative ones.
    pub best: Option<usize>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl InteriorAudit {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("K,eps1,C,worst_node_index,margin\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{},{}\n", fmt(e.k), fmt(e.eps1), fmt(e.c), e.worst_node_index, fmt(e.margin)));
        }
        s
    }
}

/// Open-cone membership of `W_h(u_sub)` at every interior node.
pub(crate) fn require_strict(u_sub: &GridField, prob: &ProblemSpec) -> Result<()> {
    let jet = discrete_jet(u_sub, prob)?;
    for (i, &node) in jet.nodes.iter().enumerate() {
        let cone = matrix_cone_classify(&jet.w[i], prob.k, 0.0)?;
        if cone.label != ConeLabel::Interior {
            let (j, margin) = cone.worst();
            return Err(Error::InadmissibleAt { x: u_sub.coord(node), j, margin });
        }
    }
    Ok(())
}

fn check_lists(k_list: &[f64], eps1_list: &[f64], c_cap: f64) -> Result<()> {
    if k_list.is_empty() || eps1_list.is_empty() {
        return Err(Error::Empty("K and eps1 lists".into()));
    }
    if let Some(&k) = k_list.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidParameter { name: "K_list".into(), reason: format!("entries must be > 0, got {k}") });
    }
    if let Some(&e) = eps1_list.iter().find(|&&e| !(e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter { name: "eps1_list".into(), reason: format!("entries must be >= 0, got {e}") });
    }
    if !(c_cap >= 0.0) {
        return Err(Error::InvalidParameter { name: "C_cap".into(), reason: format!("must be >= 0, got {c_cap}") });
    }
    Ok(())
}

/// `phi = exp(K (u_sub - u))` on the whole grid.
fn barrier_field(u: &GridField, u_sub: &GridField, k: f64) -> Vec<f64> {
    u.values.iter().zip(&u_sub.values).map(|(a, b)| (k * (b - a)).exp()).collect()
}

/// Pareto table of `C(K, eps1)` with `L phi >= eps1 sum F^{ii} - C`, where
/// `L` includes the `B~_p` drift.
pub fn interior_barrier_audit(
    u: &GridField,
    u_sub: &GridField,
    prob: &ProblemSpec,
    k_list: &[f64],
    eps1_list: &[f64],
    c_cap: f64,
) -> Result<InteriorAudit> {
    check_lists(k_list, eps1_list, c_cap)?;
    u_sub.require_same_grid(u)?;
    let op = assemble_linearized(u, prob, OperatorVariant::Drift)?;
    require_strict(u_sub, prob)?;
    let cells: Vec<(f64, f64)> = k_list.iter().flat_map(|&k| eps1_list.iter().map(move |&e| (k, e))).collect();
    let entries: Vec<InteriorEntry> = cells
        .par_iter()
        .map(|&(k, eps1)| {
            let lphi = op.apply(&barrier_field(u, u_sub, k));
            let gap: Vec<f64> = lphi.iter().zip(&op.trace_f).map(|(l, t)| eps1 * t - l).collect();
            let w = argmax(&gap).expect("interior nodes");
            let c = gap[w].max(0.0);
            InteriorEntry { k, eps1, c, worst_node_index: op.nodes[w], margin: c_cap - c }
        })
        .collect();
    if let Some(e) = entries.iter().find(|e| !e.c.is_finite()) {
        return Err(Error::NonFinite(format!("barrier constant at K = {}, eps1 = {}", e.k, e.eps1)));
    }
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if e.eps1 > 0.0 && e.c <= c_cap {
            let better = match best {
                None => true,
                Some(b) => e.eps1 > entries[b].eps1 || (e.eps1 == entries[b].eps1 && e.c < entries[b].c),
            };
            if better {
                best = Some(i);
            }
        }
    }
    Ok(InteriorAudit { entries, c_cap, informative: best.is_some(), best })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lo,
    Hi,
}

/// Box face `x_axis = lo_axis` or `x_axis = hi_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn distance(&self, u: &GridField, node: usize) -> f64 {
        let x = u.coord(node)[self.axis];
        match self.side {
            Side::Lo => x - u.lo[self.axis],
            Side::Hi => u.hi[self.axis] - x,
        }
    }

    fn layer(&self, u: &GridField, node: usize) -> usize {
        let i = u.multi_index(node)[self.axis];
        match self.side {
            Side::Lo => i,
            Side::Hi => u.m[self.axis] - 1 - i,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.axis >= n {
            return Err(Error::InvalidParameter { name: "face".into(), reason: format!("axis {} out of range for n = {n}", self.axis) });
        }
        Ok(())
    }
}

/// Slab nodes and the nodes on the slab's outer boundary.
struct Slab {
    inner: Vec<usize>,
    rim: Vec<usize>,
}

fn slab(u: &GridField, face: Face, delta: f64) -> Result<Slab> {
    let h = u.h()[face.axis];
    let width = u.hi[face.axis] - u.lo[face.axis];
    if !(delta < width) {
        return Err(Error::InvalidParameter { name: "delta".into(), reason: format!("slab width {delta} exceeds the box width {width}") });
    }
    // Layers 1..cut lie inside the slab (d < delta); layer `cut` is its inner face.
    let cut = (1..u.m[face.axis]).find(|&j| j as f64 * h >= delta * (1.0 - 1e-12)).unwrap_or(u.m[face.axis] - 1);
    let mut inner = Vec::new();
    let mut rim = Vec::new();
    for node in 0..u.len() {
        let layer = face.layer(u, node);
        if layer > cut {
            continue;
        }
        if layer == 0 || layer == cut || u.is_boundary(node) {
            rim.push(node);
        } else {
            inner.push(node);
        }
    }
    if inner.is_empty() {
        return Err(Error::Empty(format!("slab of width {delta} contains no interior nodes at h = {h}")));
    }
    Ok(Slab { inner, rim })
}

/// Operator data shared by every parameter set of one boundary audit.
pub struct BoundaryContext<'a> {
    u: &'a GridField,
    u_sub: &'a GridField,
    face: Face,
    op: LinearizedOperator,
    row_of: Vec<usize>,
}

impl<'a> BoundaryContext<'a> {
    pub fn new(u: &'a GridField, u_sub: &'a GridField, prob: &ProblemSpec, face: Face) -> Result<Self> {
        face.validate(u.n)?;
        u_sub.require_same_grid(u)?;
        let op = assemble_linearized(u, prob, OperatorVariant::Drift)?;
        require_strict(u_sub, prob)?;
        let mut row_of = vec![usize::MAX; u.len()];
        for (r, &node) in op.nodes.iter().enumerate() {
            row_of[node] = r;
        }
        Ok(BoundaryContext { u, u_sub, face, op, row_of })
    }

    /// `psi = 1 - exp(K [(u_sub - u) - mu d + N d^2])`.
    fn psi(&self, p: &BarrierParams) -> Vec<f64> {
        (0..self.u.len())
            .map(|i| {
                let d = self.face.distance(self.u, i);
                1.0 - (p.k * ((self.u_sub.values[i] - self.u.values[i]) - p.mu * d + p.n * d * d)).exp()
            })
            .collect()
    }

    /// Worst margins of `L psi <= -(eps1 / 2) sum F^{ii} - M` on the slab and
    /// `psi >= 0` on its rim, with the nodes attaining them.
    fn margins(&self, p: &BarrierParams) -> Result<(f64, usize, f64, usize, usize)> {
        let s = slab(self.u, self.face, p.delta)?;
        let psi = self.psi(p);
        let lpsi = self.op.apply(&psi);
        let op_m: Vec<f64> = s
            .inner
            .iter()
            .map(|&node| {
                let r = self.row_of[node];
                -0.5 * p.eps1 * self.op.trace_f[r] - p.m - lpsi[r]
            })
            .collect();
        let pos_m: Vec<f64> = s.rim.iter().map(|&node| psi[node]).collect();
        let wo = argmin(&op_m).expect("slab non-empty");
        let wp = argmin(&pos_m).expect("rim non-empty");
        Ok((op_m[wo], s.inner[wo], pos_m[wp], s.rim[wp], s.inner.len()))
    }

    pub fn audit(&self, p: &BarrierParams, tol: f64) -> Result<CertificateReport> {
        p.validate()?;
        let (mo, no, mp, np, count) = self.margins(p)?;
        let node = if mo <= mp { no } else { np };
        let witness = Witness { x: Some(self.u.coord(node)), node: Some(self.u.multi_index(node)), ..Default::default() };
        Ok(CertificateReport::from_margin("boundary_barrier", mo.min(mp), Some(witness), tol, count)
            .with_extra("margin_operator", mo)
            .with_extra("margin_positivity", mp)
            .with_extra("K", p.k)
            .with_extra("N", p.n)
            .with_extra("mu", p.mu)
            .with_extra("delta", p.delta)
            .with_extra("eps1", p.eps1)
            .with_extra("M", p.m))
    }
}

pub fn boundary_barrier_audit(
    u: &GridField,
    u_sub: &GridField,
    prob: &ProblemSpec,
    params: &BarrierParams,
    face: Face,
    tol: f64,
) -> Result<CertificateReport> {
    BoundaryContext::new(u, u_sub, prob, face)?.audit(params, tol)
}

/// Parameter grid for the boundary barrier; `delta_steps` are slab widths
/// in units of the mesh width normal to the face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySweep {
    #[serde(rename = "K_list")]
    pub k_list: Vec<f64>,
    #[serde(rename = "N_list")]
    pub n_list: Vec<f64>,
    pub mu_list: Vec<f64>,
    pub delta_steps: Vec<usize>,
}

impl Default for BoundarySweep {
    fn default() -> Self {
        BoundarySweep {
            k_list: DEFAULT_K_LIST.to_vec(),
            n_list: vec![1.0, 4.0, 16.0, 64.0, 256.0],
            mu_list: vec![0.25, 1.0, 4.0],
            delta_steps: vec![2, 4, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub mu: f64,
    pub delta: f64,
    pub margin_operator: f64,
    pub margin_positivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySweepResult {
    pub face: Face,
    pub eps1: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub entries: Vec<BoundaryEntry>,
    /// First entry with both margins `>= 0`.
    pub feasible: Option<usize>,
}

impl BoundarySweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("K,N,mu,delta,margin_operator,margin_positivity\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(e.k),
                fmt(e.n),
                fmt(e.mu),
                fmt(e.delta),
                fmt(e.margin_operator),
                fmt(e.margin_positivity)
            ));
        }
        s
    }
}

pub fn boundary_barrier_sweep(
    u: &GridField,
    u_sub: &GridField,
    prob: &ProblemSpec,
    face: Face,
    eps1: f64,
    m: f64,
    sweep: &BoundarySweep,
) -> Result<BoundarySweepResult> {
    let ctx = BoundaryContext::new(u, u_sub, prob, face)?;
    let h = u.h()[face.axis];
    let mut cells = Vec::new();
    for &k in &sweep.k_list {
        for &n in &sweep.n_list {
            for &mu in &sweep.mu_list {
                for &steps in &sweep.delta_steps {
                    cells.push(BarrierParams { k, n, mu, delta: steps as f64 * h, eps1, m, ..Default::default() });
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Empty("boundary sweep lists".into()));
    }
    let entries: Vec<BoundaryEntry> = cells
        .par_iter()
        .map(|p| {
            p.validate()?;
            let (mo, _, mp, _, _) = ctx.margins(p)?;
            Ok(BoundaryEntry { k: p.k, n: p.n, mu: p.mu, delta: p.delta, margin_operator: mo, margin_positivity: mp })
        })
        .collect::<Result<_>>()?;
    let feasible = entries.iter().position(|e| e.margin_operator >= 0.0 && e.margin_positivity >= 0.0);
    Ok(BoundarySweepResult { face, eps1, m, entries, feasible })
}
