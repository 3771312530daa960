use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by projections, residual checks and verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Inner-solver accuracy for iterative projections.
    pub proj: f64,
    /// Distance below which a point counts as inside a set.
    pub feas: f64,
    /// Slack on the projection inequalities.
    pub ineq: f64,
    /// Slack on the inequality residual of a trajectory.
    pub res: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            proj: 1e-10,
            feas: 1e-8,
            ineq: 1e-8,
            res: 1e-6,
        }
    }
}
