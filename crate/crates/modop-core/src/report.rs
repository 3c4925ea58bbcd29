//! Shared report vocabulary: named residuals with thresholds and verdicts.
//!
//! Residuals are stored normalized — each check divides by its stated scale
//! (documented at the site that computes it) so values compare directly to
//! their thresholds.

use serde::{Deserialize, Serialize};

/// One named residual with its threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ResidualCheck {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            threshold,
            pass: residual <= threshold,
        }
    }
}

/// A bundle of named residual checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub checks: Vec<ResidualCheck>,
    pub pass: bool,
}

impl ResidualReport {
    pub fn new(checks: Vec<ResidualCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { checks, pass }
    }

    pub fn push(&mut self, check: ResidualCheck) {
        self.checks.push(check);
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0, |a, c| a.max(c.residual))
    }

    pub fn get(&self, name: &str) -> Option<&ResidualCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Three-valued verdict for boolean properties decided by residuals close to
/// a threshold: residuals inside the indeterminate band are not trusted as
/// either true or false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

impl Verdict {
    /// Decides from a normalized residual and the (low, high) band around
    /// the threshold.
    pub fn from_residual(residual: f64, band: (f64, f64)) -> Self {
        let (low, high) = band;
        if residual <= low {
            Verdict::Holds
        } else if residual >= high {
            Verdict::Fails
        } else {
            Verdict::Indeterminate
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::Holds => Some(true),
            Verdict::Fails => Some(false),
            Verdict::Indeterminate => None,
        }
    }
}
