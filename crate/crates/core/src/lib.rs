//! Short-horizon forecasting of hourly pollutant concentrations.
//!
//! Three model families are provided: exponential smoothing ([`es`]), seasonal
//! ARIMA ([`sarima`]) and an LSTM network ([`lstm`]). The [`harness`] compares
//! them under rolling-origin evaluation, refitting at every forecast origin the
//! way a live sensor feed would.

pub mod error;
pub mod es;
pub mod harness;
pub mod lstm;
pub mod metrics;
pub mod optim;
pub mod sarima;
pub mod series;
pub mod synth;

pub use error::{ForecastError, Result};

/// Longest forecast horizon any model produces, in hours.
pub const MAX_HORIZON: usize = 24;
