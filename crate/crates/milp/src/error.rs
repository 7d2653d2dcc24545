use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: String, lower: f64, upper: f64 },
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("constraint {constraint} references unknown variable #{index}")]
    UnknownVariable { constraint: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solve_lp called on a model with binary variables; use solve_milp")]
    HasBinaries,
    #[error("simplex broke down after {iterations} iterations: {reason}")]
    Numerical { iterations: usize, reason: String },
    #[error("node limit of {limit} reached without an integer-feasible solution")]
    NodeLimit { limit: usize },
}
