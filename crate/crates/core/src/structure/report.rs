use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default absolute tolerance on margins.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No sampled margin below `-tol`. Sampled evidence only.
    Holds,
    Fails,
    Inconclusive,
}

/// Where the worst margin was found.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub condition: String,
    pub verdict: Verdict,
    /// Worst margin; negative below `-tol` means the condition fails.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub tol: f64,
    pub seed: Option<u64>,
    pub samples: usize,
    /// Condition-specific diagnostics.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CertificateReport {
    /// Verdict from the worst margin: fails below `-tol`, holds otherwise.
    pub fn from_margin(condition: &str, margin: f64, witness: Option<Witness>, tol: f64, samples: usize) -> Self {
        let verdict = if !margin.is_finite() && samples == 0 {
            Verdict::Inconclusive
        } else if margin < -tol {
            Verdict::Fails
        } else {
            Verdict::Holds
        };
        CertificateReport {
            condition: condition.to_string(),
            verdict,
            margin,
            witness,
            tol,
            seed: None,
            samples,
            extra: BTreeMap::new(),
            note: None,
        }
    }

    pub fn inconclusive(condition: &str, tol: f64, note: impl Into<String>) -> Self {
        CertificateReport {
            condition: condition.to_string(),
            verdict: Verdict::Inconclusive,
            margin: f64::NAN,
            witness: None,
            tol,
            seed: None,
            samples: 0,
            extra: BTreeMap::new(),
            note: Some(note.into()),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn fails(&self) -> bool {
        self.verdict == Verdict::Fails
    }
}

/// Index of the smallest margin, first one on ties. Independent of how the
/// margins were computed, so parallel evaluation reduces deterministically.
pub(crate) fn argmin(margins: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &m) in margins.iter().enumerate() {
        match best {
            Some(b) if !(m < margins[b]) => {}
            _ => best = Some(i),
        }
    }
    best
}
