use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    ModelValidation(String),

    #[error("steady state is not unique (second-smallest Liouvillian eigenvalue magnitude {second_smallest:.3e})")]
    NonUniqueSteadyState { second_smallest: f64 },

    #[error("steady state is rank deficient (pi_min = {pi_min:.3e}); entropy functionals are undefined")]
    RankDeficientSteadyState { pi_min: f64 },

    #[error("cannot resolve absolute rates: {0}")]
    RateResolution(String),

    #[error("time step too coarse: total jump probability {probability:.3} per step exceeds 0.5")]
    StepSize { probability: f64 },

    #[error("time {tau} is not on the sampled grid; interpolation refused")]
    InterpolationRefused { tau: f64 },

    #[error("eigenstate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("trajectory has no final measurement")]
    MissingFinalMeasurement,

    #[error("trajectory already carries a final measurement")]
    AlreadyMeasured,

    #[error("series covers [0, {available}] but the stopping rule needs [0, {needed}]")]
    InsufficientHorizon { needed: f64, available: f64 },

    #[error("channel {channel} has no declared detailed-balance partner")]
    NoBackwardModel { channel: usize },

    #[error("enumeration of {paths} paths exceeds the limit of {limit}")]
    EnumerationLimit { paths: u128, limit: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
