use thiserror::Error;

use crate::steps::Trajectory;

pub type Result<T, E = SddError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SddError {
    #[error("argument {theta} outside the initial interval [{lo}, 0]")]
    OutOfDomain { theta: f64, lo: f64 },

    #[error("initial function does not cover {theta}")]
    NotCovered { theta: f64 },

    #[error("delay g({x}) = {value} outside [0, {bound}]")]
    DelayRange { x: f64, value: f64, bound: f64 },

    #[error("delay is not differentiable at x = {x}")]
    NonDifferentiable { x: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },

    #[error("invalid initial function: {0}")]
    InvalidInitialFunction(String),

    #[error("history requested at s = {s}, below -h = {lo}")]
    BelowHorizon { s: f64, lo: f64 },

    #[error("history at s = {s} is not available (trajectory covers [{t0}, {t_last}])")]
    HistoryUnavailable { s: f64, t0: f64, t_last: f64 },

    #[error("t = {t} outside the solution range [{lo}, {hi}]")]
    OutsideRange { t: f64, lo: f64, hi: f64 },

    #[error("integration aborted at t = {t}: {cause}")]
    Aborted {
        t: f64,
        cause: Box<SddError>,
        partial: Box<Trajectory>,
    },

    #[error("transformed integration aborted at s = {s}: {cause}")]
    TransformedAborted {
        s: f64,
        cause: Box<SddError>,
        partial: Box<crate::unicity::TransformedTrajectory>,
    },

    #[error("singular transformation at (s, w) = ({s}, {w}): 1 - g'(w) F = {denominator}")]
    Singular { s: f64, w: f64, denominator: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SddError {
    pub(crate) fn param(name: impl Into<String>, value: f64, reason: impl Into<String>) -> Self {
        SddError::InvalidParameter {
            name: name.into(),
            value,
            reason: reason.into(),
        }
    }
}
