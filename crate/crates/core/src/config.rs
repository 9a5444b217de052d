//! Tolerances and run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DeltaSchedule, SampleBudget, Strategy};

/// Numerical tolerances shared by all analyses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Maximal width of a bracket that counts as collapsed.
    pub collapse_tol: f64,
    /// Threshold for "tends to 0" and "converges to c" verdicts.
    pub accept_tol: f64,
    /// Threshold for vanishing density ratios.
    pub density_tol: f64,
    /// Maximal generalized-Jacobian diameter counted as a singleton.
    pub strict_tol: f64,
    /// Support-function tolerance for set inclusions and equalities.
    pub hull_tol: f64,
    /// Tail threshold for sequences indexed by k.
    pub weak_tol: f64,
    /// ε values for approximate-limit tests.
    pub eps_grid: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            collapse_tol: 1e-2,
            accept_tol: 1e-2,
            density_tol: 2e-2,
            strict_tol: 1e-2,
            hull_tol: 3e-2,
            weak_tol: 2e-2,
            eps_grid: vec![0.3, 0.1, 0.03, 0.01],
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.collapse_tol,
            self.accept_tol,
            self.density_tol,
            self.strict_tol,
            self.hull_tol,
            self.weak_tol,
        ];
        if all.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("all tolerances must be positive"));
        }
        if self.eps_grid.is_empty() || self.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("the ε grid must be nonempty and positive"));
        }
        Ok(())
    }
}

/// Everything that determines the output of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: DeltaSchedule,
    pub budget: SampleBudget,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schedule: DeltaSchedule::default(),
            budget: SampleBudget {
                points_per_scale: 200_000,
                seed: 0,
                strategy: Strategy::QuasiMc,
            },
            tolerances: Tolerances::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.budget.validate()?;
        self.tolerances.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
