use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{func}: domain error: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("unstable queue: offered load r = {r} must be below server count c = {c}")]
    Unstable { r: f64, c: u32 },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("no server count in [1, {c_max}] reaches confidence {beta} (best probability {best})")]
    InfeasibleWithinCap { c_max: u32, beta: f64, best: f64 },

    #[error("constraint probability decreased from {prev} at c = {c_prev} to {next} at c = {c_next}")]
    NonMonotone { c_prev: u32, prev: f64, c_next: u32, next: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
