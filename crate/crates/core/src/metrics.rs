//! RMSE and wall-clock accounting.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub rmse: f64,
    pub n: usize,
}

/// Root mean squared error between predictions and actuals.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<ErrorSummary> {
    if predicted.len() != actual.len() {
        return Err(ForecastError::Shape(format!(
            "{} predictions vs {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(ForecastError::EmptyInput("rmse of zero points".into()));
    }
    if predicted.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(ForecastError::Shape("rmse inputs must be finite".into()));
    }
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, x)| (y - x) * (y - x))
        .sum();
    let n = predicted.len();
    Ok(ErrorSummary {
        rmse: (sse / n as f64).sqrt(),
        n,
    })
}

/// Arithmetic mean of the `rmse` fields.
pub fn mean_of(errors: &[ErrorSummary]) -> Result<f64> {
    if errors.is_empty() {
        return Err(ForecastError::EmptyInput(
            "mean of zero error summaries".into(),
        ));
    }
    Ok(errors.iter().map(|e| e.rmse).sum::<f64>() / errors.len() as f64)
}

/// Build and predict durations in seconds, at millisecond resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub build_seconds: f64,
    pub predict_seconds: f64,
}

impl TimingRecord {
    pub fn total(&self) -> f64 {
        self.build_seconds + self.predict_seconds
    }
}

/// Truncates a duration to whole milliseconds, expressed in seconds.
pub fn millis(d: Duration) -> f64 {
    d.as_millis() as f64 / 1000.0
}

/// Runs `f` and returns its output with the elapsed monotonic time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}
