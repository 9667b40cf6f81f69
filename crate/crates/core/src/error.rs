use thiserror::Error;

use crate::frames::VehicleState;

/// Invalid physical parameter.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter `{key}`: {reason}")]
pub struct ParamError {
    pub key: String,
    pub reason: String,
}

impl ParamError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ParamError { key: key.into(), reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropulsionError {
    #[error("infeasible operating point: {voltage:.3} V required, supply limit is {v_max:.3} V")]
    Infeasible { voltage: f64, v_max: f64 },
    #[error("no feasible operating point in the requested range")]
    NoFeasiblePoint,
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Configuration parse or validation failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    /// One-based line number, when the offending key could be located.
    pub line: Option<usize>,
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: `{}`: {}", self.key, self.reason),
            None => write!(f, "`{}`: {}", self.key, self.reason),
        }
    }
}

impl From<ParamError> for ConfigError {
    fn from(e: ParamError) -> Self {
        ConfigError { line: None, key: e.key, reason: e.reason }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite wrench at t = {time:.4} s")]
    NonFiniteWrench { time: f64 },
    #[error("state diverged at t = {time:.4} s: {state:?}")]
    NonFiniteState { time: f64, state: Box<VehicleState> },
    #[error("invalid simulation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation fault: {0}")]
    Sim(#[from] SimError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("telemetry format error: {0}")]
    Telemetry(String),
}

impl RunError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RunError::Io { path: path.as_ref().display().to_string(), source }
    }
}
