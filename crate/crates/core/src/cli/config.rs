use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::de::{self, DeserializeSeed, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    boundary_catalog, catalog_instantiate, problem_preset, BoxDomain, Params, ProblemSpec, PRESET_NAMES,
};
use crate::solver::SolveOptions;
use crate::structure::{SamplingSpec, DEFAULT_TOL};
use crate::verify::{BoundarySweep, Face, Side, DEFAULT_C_CAP, DEFAULT_EPS1_LIST, DEFAULT_K_LIST};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Structure,
    Solve,
    Verify,
    Sweep,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Structure => "structure",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        [Command::Structure, Command::Solve, Command::Verify, Command::Sweep, Command::Selftest]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// Problem assembled from separately named coefficient, source and
/// boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(rename = "A")]
    pub a: Component,
    #[serde(rename = "B")]
    pub b: Component,
    pub phi: Component,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsolution: Option<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomProblem>,
    pub n: usize,
    pub k: usize,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxConfig>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub m: Vec<usize>,
}

/// Sample counts for structural checks; the seed lives in `checks.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    pub x_count: usize,
    pub z_count: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub p_count: usize,
    pub p_radius: f64,
    pub pairs: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        let s = SamplingSpec::default();
        SampleCounts {
            x_count: s.x_count,
            z_count: s.z_count,
            z_lo: s.z_lo,
            z_hi: s.z_hi,
            p_count: s.p_count,
            p_radius: s.p_radius,
            pairs: s.pairs,
        }
    }
}

impl SampleCounts {
    pub fn with_seed(&self, seed: u64) -> SamplingSpec {
        SamplingSpec {
            x_count: self.x_count,
            z_count: self.z_count,
            z_lo: self.z_lo,
            z_hi: self.z_hi,
            p_count: self.p_count,
            p_radius: self.p_radius,
            pairs: self.pairs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub seed: Option<u64>,
    pub samples: SampleCounts,
    pub tol: f64,
    /// Also certify strict regularity with lower bound `c0`.
    pub strict: bool,
    pub c0: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { seed: None, samples: SampleCounts::default(), tol: DEFAULT_TOL, strict: false, c0: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub face: Face,
    /// Explicit barrier constants; when all four are set a single audit is
    /// run alongside the sweep.
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    /// `eps1` for the boundary inequality; defaults to the best informative
    /// interior entry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    pub sweep: BoundarySweep,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            face: Face { axis: 0, side: Side::Lo },
            k: None,
            delta: None,
            mu: None,
            n: None,
            m: 1.0,
            eps1: None,
            sweep: BoundarySweep::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(rename = "K_list")]
    pub k_list: Vec<f64>,
    pub eps1_list: Vec<f64>,
    #[serde(rename = "C_cap")]
    pub c_cap: f64,
    /// Coefficient `c` of the fallback subsolution `u - c (R^2 - |x - x_c|^2)`
    /// used when the problem supplies none.
    pub bump: f64,
    /// Budget for `|S_k - B|` in the boundary decomposition check.
    pub decomposition_budget: f64,
    pub boundary: BoundaryConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            k_list: DEFAULT_K_LIST.to_vec(),
            eps1_list: DEFAULT_EPS1_LIST.to_vec(),
            c_cap: DEFAULT_C_CAP,
            bump: 0.1,
            decomposition_budget: 1e-1,
            boundary: BoundaryConfig::default(),
        }
    }
}

/// Solves over a list of values of one parameter; `param = "m"` varies the
/// grid size on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into() }
    }
}

/// Fully validated run configuration. `output` and `workers` describe the
/// run environment and are left out of the canonical echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

/// Visitor that walks a JSON document and rejects repeated object keys.
struct NoDuplicates;

impl<'de> DeserializeSeed<'de> for NoDuplicates {
    type Value = ();
    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<(), D::Error> {
        d.deserialize_any(self)
    }
}

impl<'de> Visitor<'de> for NoDuplicates {
    type Value = ();
    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("any JSON value")
    }
    fn visit_bool<E>(self, _: bool) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_i64<E>(self, _: i64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_u64<E>(self, _: u64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_f64<E>(self, _: f64) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_str<E>(self, _: &str) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_unit<E>(self) -> std::result::Result<(), E> {
        Ok(())
    }
    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<(), A::Error> {
        while seq.next_element_seed(NoDuplicates)?.is_some() {}
        Ok(())
    }
    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<(), A::Error> {
        let mut seen = HashSet::new();
        while let Some(key) = map.next_key::<String>()? {
            if !seen.insert(key.clone()) {
                return Err(de::Error::custom(format!("duplicate key `{key}`")));
            }
            map.next_value_seed(NoDuplicates)?;
        }
        Ok(())
    }
}

fn schema(pointer: &str, reason: impl Into<String>) -> Error {
    Error::ConfigSchema { pointer: pointer.to_string(), reason: reason.into() }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    NoDuplicates.deserialize(&mut de).map_err(|e| Error::ConfigParse(e.to_string()))?;
    de.end().map_err(|e| Error::ConfigParse(e.to_string()))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = json_pointer(e.path());
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::ConfigParse(inner.to_string())
        } else {
            schema(&pointer, inner.to_string())
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    /// Bare configuration for `selftest` without a file.
    pub fn empty(command: Command) -> RunConfig {
        RunConfig {
            command: Some(command),
            problem: None,
            grid: None,
            solver: SolveOptions::default(),
            checks: ChecksConfig::default(),
            verify: VerifyConfig::default(),
            sweep: None,
            output: OutputConfig::default(),
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_problem = !matches!(self.command, Some(Command::Selftest) | None);
        if let Some(p) = &self.problem {
            if p.n == 0 {
                return Err(schema("/problem/n", "must be >= 1"));
            }
            if p.k == 0 || p.k > p.n {
                return Err(schema("/problem/k", format!("must satisfy 1 <= k <= n = {}, got {}", p.n, p.k)));
            }
            match (&p.catalog, &p.custom) {
                (Some(_), Some(_)) => return Err(schema("/problem", "give either `catalog` or `custom`, not both")),
                (None, None) => return Err(schema("/problem", "missing `catalog` or `custom`")),
                (Some(name), None) if !PRESET_NAMES.contains(&name.as_str()) => {
                    return Err(schema("/problem/catalog", format!("unknown preset `{name}`, expected one of {PRESET_NAMES:?}")))
                }
                _ => {}
            }
            if let Some(b) = &p.domain {
                if b.lo.len() != p.n || b.hi.len() != p.n {
                    return Err(schema("/problem/box", format!("lo and hi must have {} entries", p.n)));
                }
                if b.lo.iter().zip(&b.hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
                    return Err(schema("/problem/box", "need finite lo < hi on every axis"));
                }
            }
        } else if needs_problem {
            return Err(schema("/problem", "required for this command"));
        }
        if let Some(g) = &self.grid {
            let n = self.problem.as_ref().map_or(g.m.len(), |p| p.n);
            if g.m.len() != n {
                return Err(schema("/grid/m", format!("need {n} entries, got {}", g.m.len())));
            }
            if let Some(i) = g.m.iter().position(|&m| m < 3) {
                return Err(schema(&format!("/grid/m/{i}"), "need at least 3 points per axis"));
            }
        } else if matches!(self.command, Some(Command::Solve | Command::Verify | Command::Sweep)) {
            return Err(schema("/grid", "required for this command"));
        }
        if !(self.solver.rtol > 0.0) {
            return Err(schema("/solver/rtol", "must be > 0"));
        }
        if !(self.checks.tol >= 0.0) {
            return Err(schema("/checks/tol", "must be >= 0"));
        }
        if self.command == Some(Command::Sweep) {
            let s = self.sweep.as_ref().ok_or_else(|| schema("/sweep", "required for the sweep command"))?;
            if s.values.is_empty() {
                return Err(schema("/sweep/values", "must be non-empty"));
            }
            if s.param == "m" {
                if let Some(i) = s.values.iter().position(|v| !(v.fract() == 0.0 && *v >= 3.0)) {
                    return Err(schema(&format!("/sweep/values/{i}"), "grid sizes must be integers >= 3"));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(schema("/workers", "must be >= 1"));
        }
        Ok(())
    }

    /// Seed for sampling commands: mandatory.
    pub fn seed(&self) -> Result<u64> {
        self.checks.seed.ok_or_else(|| schema("/checks/seed", "a seed is required for sampling checks"))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = self.problem.as_ref().ok_or_else(|| schema("/problem", "required"))?;
        let domain = match &p.domain {
            Some(b) => BoxDomain::new(b.lo.clone(), b.hi.clone())?,
            None => BoxDomain::cube(p.n, -1.0, 1.0),
        };
        if let Some(name) = &p.catalog {
            return problem_preset(name, p.n, p.k, Some(domain), &p.params);
        }
        let c = p.custom.as_ref().expect("validated");
        let a = catalog_instantiate(&c.a.name, &c.a.params, p.n)?
            .a
            .ok_or_else(|| schema("/problem/custom/A/name", format!("`{}` is not a coefficient", c.a.name)))?;
        let b = catalog_instantiate(&c.b.name, &c.b.params, p.n)?
            .b
            .ok_or_else(|| schema("/problem/custom/B/name", format!("`{}` is not a source", c.b.name)))?;
        let phi = boundary_catalog(&c.phi.name, &c.phi.params)?;
        let name = format!("custom({}, {}, {})", c.a.name, c.b.name, c.phi.name);
        let mut spec = ProblemSpec::new(&name, p.k, domain, a, b, phi)?;
        if let Some(s) = &c.subsolution {
            spec = spec.with_subsolution(boundary_catalog(&s.name, &s.params)?);
        }
        Ok(spec)
    }

    pub fn grid_m(&self) -> Result<Vec<usize>> {
        Ok(self.grid.as_ref().ok_or_else(|| schema("/grid", "required"))?.m.clone())
    }
}
