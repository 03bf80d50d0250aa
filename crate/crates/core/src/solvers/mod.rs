//! Minimization of the `ℓ¹` penalty function over `A × (ℝ^m)^S`.
//!
//! Two solvers share one descent engine: [`codiff_descent`] applies it to
//! the penalty function directly, [`dca_solve`] applies it to the convex
//! subproblems of the difference-of-convex algorithm.

mod dc;
mod descent;

use serde::{Deserialize, Serialize};

use crate::model::Point;

pub use crate::hull::min_norm_point;
pub use dc::{dc_decompose, dca_solve, DcDecomposition};
pub use descent::{codiff_descent, convex_subsolve, ConvexObjective};
pub(crate) use descent::selections;

/// Largest number of penalty escalations.
pub const MAX_ESCALATIONS: usize = 5;
/// Factor applied to `c` on each escalation.
pub const ESCALATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    VertexCap,
    /// Converged after increasing `c` this many times.
    PenaltyEscalated(usize),
    /// No step along any candidate direction passed the line search.
    Stalled,
}

impl SolveStatus {
    pub fn is_success(&self) -> bool {
        matches!(self, SolveStatus::Converged | SolveStatus::PenaltyEscalated(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// `Φ_c` at the iterate.
    pub value: f64,
    /// Penalty term at the iterate.
    pub phi: f64,
    /// Weighted distance from the previous iterate.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub iterates: usize,
    pub final_point: Point,
    pub final_value: f64,
    pub final_phi: f64,
    pub status: SolveStatus,
    /// Penalty parameter in effect at termination.
    pub c: f64,
    /// Starting point first, then one entry per iteration.
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// DCA: stop when the decrease of `Φ_c` falls below this.
    pub tol_obj: f64,
    /// DCA: stop when the step falls below this.
    pub tol_step: f64,
    /// Outer iteration cap; `None` selects 500 for DCA and 1000 for descent.
    pub max_iter: Option<usize>,
    /// Penalty term above which the result counts as infeasible.
    pub tol_feas: f64,
    /// Multiply `c` by 10 (at most 5 times) while the result is infeasible.
    pub escalate: bool,
    /// Descent: stationarity threshold on the minimum-norm element.
    pub tol_stat: f64,
    /// Descent: hyperdifferential vertices with offset up to this are selected.
    pub hyper_offset_cap: f64,
    /// Armijo sufficient-decrease constant.
    pub sigma: f64,
    pub max_halvings: usize,
    /// Iteration cap of each DCA subproblem.
    pub inner_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_obj: 1e-8,
            tol_step: 1e-8,
            max_iter: None,
            tol_feas: 1e-6,
            escalate: false,
            tol_stat: 1e-6,
            hyper_offset_cap: 0.0,
            sigma: 1e-4,
            max_halvings: 50,
            inner_max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dca,
    #[serde(rename = "cd")]
    CodiffDescent,
}
