//! LP relaxation, branch-and-bound, an enumeration oracle and a file-based
//! adapter for external solvers.

mod bnb;
mod brute;
mod external;
pub mod lp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mip::MipError;

pub use bnb::{solve_mip, solve_mip_with_start};
pub use brute::brute_force;
pub use external::{external_solve, parse_solution_file, write_solution_file};
pub use lp::{solve_lp, LpFailure, LpSolution, LpStatus, VarStatus};

/// Distance to the nearest whole number below which a value counts as integral.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Lp(#[from] LpFailure),
    #[error("invalid solve limits: {0}")]
    Limits(String),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("enumeration needs {needed} assignments, budget is {budget}")]
    EnumerationBudget { needed: f64, budget: u64 },
    #[error("integer variable {0} has an infinite bound; cannot enumerate")]
    UnboundedInteger(usize),
    #[error("external solver process failed: {0}")]
    Process(String),
    #[error("external solver timed out after {0:.3}s")]
    Timeout(f64),
    #[error("cannot parse solution file: {0}")]
    SolutionParse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Seconds, or node ticks under the deterministic clock.
    pub time: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub best_solution: Option<Vec<f64>>,
    /// Sense-worst infinity when no incumbent exists.
    pub best_objective: f64,
    /// Dual bound in the instance's sense.
    pub bound: f64,
    pub trace: Vec<TraceEntry>,
    pub node_count: u64,
    /// Clock reading when the solve stopped.
    pub elapsed: f64,
}

impl MipResult {
    pub fn has_incumbent(&self) -> bool {
        self.best_solution.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    /// Seconds, or node ticks when `deterministic_clock` is set.
    pub time_limit: f64,
    pub rel_gap: f64,
    pub node_limit: Option<u64>,
    pub deterministic_clock: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit: 600.0,
            rel_gap: 0.01,
            node_limit: None,
            deterministic_clock: false,
        }
    }
}

impl SolveLimits {
    pub fn ticks(time_limit: f64) -> Self {
        SolveLimits {
            time_limit,
            deterministic_clock: true,
            ..Default::default()
        }
    }

    /// Unlimited exact solve on the tick clock.
    pub fn exact() -> Self {
        SolveLimits {
            time_limit: f64::INFINITY,
            rel_gap: 0.0,
            node_limit: None,
            deterministic_clock: true,
        }
    }

    pub fn check(&self) -> Result<(), SolveError> {
        if !(self.time_limit > 0.0) {
            return Err(SolveError::Limits(format!(
                "time_limit must be positive, got {}",
                self.time_limit
            )));
        }
        if !(0.0..1.0).contains(&self.rel_gap) {
            return Err(SolveError::Limits(format!(
                "rel_gap must be in [0,1), got {}",
                self.rel_gap
            )));
        }
        Ok(())
    }
}

/// Relative gap between incumbent and bound used for the MIP stopping test.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    let diff = (incumbent - bound).abs();
    if diff <= 1e-12 {
        return 0.0;
    }
    diff / incumbent.abs().max(bound.abs()).max(1e-10)
}
