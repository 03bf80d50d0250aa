use thiserror::Error;

/// Variable block of an integrand's argument list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBlock {
    /// First-stage decision `x`.
    X,
    /// Recourse decision `y`.
    Y,
    /// Scenario parameter `θ`.
    Theta,
    /// Joint `(x, y)` block addressed by quadratic atoms.
    XY,
}

impl std::fmt::Display for VarBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            VarBlock::X => "x",
            VarBlock::Y => "y",
            VarBlock::Theta => "theta",
            VarBlock::XY => "(x, y)",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch in block {block}: expected {expected}, found {found}")]
    DimMismatch {
        block: VarBlock,
        expected: usize,
        found: usize,
    },

    #[error("scenario probabilities sum to {sum}, expected 1")]
    ProbSum { sum: f64 },

    #[error("scenario {scenario} has non-positive probability {prob}")]
    ProbNonPositive { scenario: usize, prob: f64 },

    #[error("child of a dc node is not structurally convex ({which})")]
    DcNotConvex { which: &'static str },

    #[error("quadratic atom flagged psd has a negative eigenvalue {eigenvalue}")]
    NotPsd { eigenvalue: f64 },

    #[error("invalid first-stage set: {0}")]
    InvalidSet(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("non-finite value encountered in scenario {scenario}")]
    NonFinite { scenario: usize },

    #[error("vertex count {count} exceeds the cap {cap}; simplify the expression or prune")]
    VertexCap { count: usize, cap: usize },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("feasible set geometry admits no exact projection: {0}")]
    Unprojectable(String),

    #[error("integrand admits no verified DC decomposition: {0}")]
    NotDc(String),

    #[error("integrand is not smooth: {0}")]
    NotSmooth(String),

    #[error("candidate point violates the constraints by {violation} (scenario {scenario}, constraint {constraint:?})")]
    InfeasibleCandidate {
        violation: f64,
        scenario: usize,
        constraint: Option<usize>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "PARSE",
            Error::DimMismatch { .. } => "DIM_MISMATCH",
            Error::ProbSum { .. } => "PROB_SUM",
            Error::ProbNonPositive { .. } => "PROB_NONPOSITIVE",
            Error::DcNotConvex { .. } => "DC_NOT_CONVEX",
            Error::NotPsd { .. } => "NOT_PSD",
            Error::InvalidSet(_) => "INVALID_SET",
            Error::InvalidValue(_) => "INVALID_VALUE",
            Error::NonFinite { .. } => "NONFINITE",
            Error::VertexCap { .. } => "VERTEX_CAP",
            Error::Inconsistent(_) => "INCONSISTENT",
            Error::Unprojectable(_) => "UNPROJECTABLE",
            Error::NotDc(_) => "NOT_DC",
            Error::NotSmooth(_) => "NOT_SMOOTH",
            Error::InfeasibleCandidate { .. } => "INFEASIBLE_CANDIDATE",
            Error::Io(_) => "IO",
        }
    }

    /// Errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::VertexCap { .. } | Error::Inconsistent(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
