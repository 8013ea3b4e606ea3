use thiserror::Error;

/// Errors produced by the solver, the noise model and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// The right-hand side returned a non-finite value.
    #[error("non-finite right-hand side at step {step} (t = {t}, y = {y:?})")]
    Integration { step: usize, t: f64, y: Vec<f64> },

    /// Evaluation point outside the trajectory interval.
    #[error("time {t} outside interval [{a}, {b}]")]
    Domain { t: f64, a: f64, b: f64 },

    /// Noise kind not available for the requested configuration.
    #[error("unsupported corruption kind `{kind}`: {reason}")]
    UnsupportedKind { kind: &'static str, reason: String },

    /// Non-finite value while estimating assumption constants.
    #[error("non-finite right-hand side value at t = {t}, y = {y:?}")]
    Evaluation { t: f64, y: Vec<f64> },

    /// Study setup that cannot be run (resource guard, bad ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// Misuse of an API, e.g. comparing trajectories on different intervals.
    #[error("usage error: {0}")]
    Usage(String),

    /// Not enough usable rows to fit a rate.
    #[error("fit error: {0}")]
    Fit(String),

    /// Experiment config could not be parsed or names an invalid field.
    #[error("invalid config field `{field}`: {reason}")]
    ConfigField { field: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A Monte Carlo replica failed.
    #[error("replica {replica}: {source}")]
    Replica {
        replica: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
