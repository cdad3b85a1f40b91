use thiserror::Error;

/// Errors shared across the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("emerging part is identically zero (bump {0})")]
    EmptyBump(usize),

    #[error("emerging mass outside the prescribed balls: {0}")]
    EmergingOutsideBalls(String),

    #[error("|b|_inf = {have} exceeds the admissible threshold B1 = {limit}")]
    ThresholdViolated { have: f64, limit: f64 },

    #[error("bump {bump} collapsed: sup {sup} fell below delta/10 = {floor}")]
    BumpCollapse { bump: usize, sup: f64, floor: f64 },

    #[error("inner solve did not converge within {sweeps} sweeps (last decrease {last_decrease})")]
    NotConverged { sweeps: usize, last_decrease: f64 },

    #[error("ground-state probe indeterminate: {0}")]
    IndeterminateVerdict(String),
}

pub type Result<T> = std::result::Result<T, Error>;
