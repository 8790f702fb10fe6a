use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("window [{start}, {end}) is outside the series span [{series_start}, {series_end})")]
    WindowOutOfRange {
        start: i64,
        end: i64,
        series_start: i64,
        series_end: i64,
    },

    #[error("series has {0} missing values; repair gaps first")]
    MissingValues(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid horizon {0}: must be within 1..=24")]
    InvalidHorizon(usize),

    #[error("non-stationary autoregressive polynomial")]
    Stationarity,

    #[error("no candidate model could be fitted")]
    NoModel,

    #[error("model state unavailable: {0}")]
    State(String),

    #[error("degenerate normalization range: min == max == {0}")]
    DegenerateScale(f64),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl ForecastError {
    pub(crate) fn insufficient(needed: usize, got: usize) -> Self {
        Self::InsufficientData { needed, got }
    }

    /// True for failures that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::Divergence { .. } | Self::NoModel | Self::Stationarity
        )
    }
}

impl From<std::io::Error> for ForecastError {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err.to_string())
    }
}

pub type Result<T, E = ForecastError> = std::result::Result<T, E>;
