use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} is outside the trajectory domain [{t0}, {limit}]")]
    OutOfDomain { t: f64, t0: f64, limit: f64 },

    /// A predecessor was queried past its terminal time without a long
    /// enough constant-speed hold.
    #[error("predecessor not evaluable at t={t}: terminal time {t_m}, hold until {hold_until:?}")]
    AssumptionBreach { t: f64, t_m: f64, hold_until: Option<f64> },

    #[error("{what}: no feasible root (candidates: {candidates:?})")]
    NoFeasibleRoot { what: &'static str, candidates: Vec<f64> },

    #[error("singular linear system at t1={t1}")]
    SingularSystem { t1: f64 },

    #[error("trajectory invariant violated: {0}")]
    Discontinuity(String),

    #[error("planner infeasible: {0}")]
    Infeasible(String),

    #[error("collocation did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
