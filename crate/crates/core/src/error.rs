use thiserror::Error;

use crate::ode::StepError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `g1d = 0` forces `V0 = 0` and `mu = 1`; a balanced family cannot be
    /// parametrized by the atoms per well.
    #[error("balance condition infeasible: {0}")]
    BalanceInfeasible(String),

    #[error("no balanced solution: {0}")]
    NoBalancedSolution(String),

    #[error("modulus singularity: R = {r} with J0 = {j0} at xi = {xi}")]
    Singularity { r: f64, j0: f64, xi: f64 },

    #[error("integration failed: {0}")]
    Integration(#[from] StepError),

    #[error("orbit terminated early ({reason}) after {periods} periods")]
    EarlyTermination { reason: String, periods: usize },

    #[error("tangent vector overflow at xi = {xi}")]
    TangentOverflow { xi: f64 },

    #[error("field blow-up at step {step} (t = {t})")]
    BlowUp { step: usize, t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sweep of {cells} cells exceeds the budget of {budget}")]
    BudgetExceeded { cells: usize, budget: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },

    #[error("conflicting inputs: {0}")]
    Conflict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
