//! Codifferential calculus, penalty reformulations and solvers for two-stage
//! stochastic programs with nonsmooth integrands.

pub mod cli;
pub mod codiff;
pub mod error;
pub mod expectation;
pub mod expr;
pub mod generate;
pub mod hull;
pub mod model;
pub mod optimality;
pub mod par;
pub mod penalty;
pub mod solvers;

pub use codiff::{codiff, AugVector, CodiffPair, QuasidiffPair};
pub use error::{Error, Result, VarBlock};
pub use expr::{Args, Dims, Expr, ExprRef};
pub use hull::min_norm_point;
pub use model::{load_problem, FeasibilityReport, FirstStageSet, Point, ScenarioSpace, TwoStageProblem};
pub use optimality::{check_optimality, inf_stationarity_measure, smooth_kkt_check, Certificate};
