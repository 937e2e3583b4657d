use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("longitudinal velocity must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StyleError {
    #[error("unknown driving style `{0}` (expected aggressive, normal or conservative)")]
    Unknown(String),
    #[error("style `{name}`: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("no feasible ego action in the decision grid")]
    NoFeasibleAction,
    #[error("empty action grid: {0}")]
    EmptyGrid(&'static str),
    #[error("cost tensor shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("station {station:.3} m is outside the road domain [0, {length:.3}]")]
    OffRoad { station: f64, length: f64 },
    #[error("invalid road geometry: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("vehicle model: {0}")]
    Model(#[from] ModelError),
    #[error("decision game: {0}")]
    Game(#[from] GameError),
    #[error("potential field: {0}")]
    Field(#[from] FieldError),
    #[error("motion planner: {0}")]
    Plan(#[from] PlanError),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("style: {0}")]
    Style(#[from] StyleError),
    #[error("simulation aborted at t = {time:.2} s: {reason}")]
    Aborted { time: f64, reason: String },
}
