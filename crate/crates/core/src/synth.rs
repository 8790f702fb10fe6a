//! Synthetic PM2.5-like series: diurnal and weekly sinusoids on a base level
//! plus AR(1) noise, clamped at zero.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

/// 2018-01-01T00:00:00Z in hours since the epoch.
pub const DEFAULT_START_HOUR: i64 = 420_768;

const NOISE_STREAM: u64 = 1;
const MISSING_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub hours: usize,
    pub base: f64,
    pub diurnal_amp: f64,
    pub weekly_amp: f64,
    pub ar_coeff: f64,
    pub noise_sd: f64,
    pub missing_rate: f64,
    pub seed: u64,
    pub start_hour: i64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            hours: 20_000,
            base: 30.0,
            diurnal_amp: 12.0,
            weekly_amp: 6.0,
            ar_coeff: 0.8,
            noise_sd: 4.0,
            missing_rate: 0.0,
            seed: 42,
            start_hour: DEFAULT_START_HOUR,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.hours == 0 {
            Some("hours must be at least 1")
        } else if !(self.ar_coeff > -1.0 && self.ar_coeff < 1.0) {
            Some("ar_coeff must lie in (-1, 1)")
        } else if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            Some("noise_sd must be finite and non-negative")
        } else if !(0.0..1.0).contains(&self.missing_rate) {
            Some("missing_rate must lie in [0, 1)")
        } else if ![self.base, self.diurnal_amp, self.weekly_amp]
            .iter()
            .all(|v| v.is_finite())
        {
            Some("levels and amplitudes must be finite")
        } else {
            None
        };
        match problem {
            Some(msg) => Err(ForecastError::InvalidConfig(msg.into())),
            None => Ok(()),
        }
    }

    /// Noise-free value at hour offset `t`, before clamping.
    pub fn seasonal(&self, t: usize) -> f64 {
        let t = t as f64;
        self.base
            + self.diurnal_amp * (TAU * t / 24.0).sin()
            + self.weekly_amp * (TAU * t / 168.0).sin()
    }
}

pub fn generate(spec: &SynthSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(NOISE_STREAM);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    mask_rng.set_stream(MISSING_STREAM);
    let normal = Normal::new(0.0, spec.noise_sd).expect("validated sd");

    let mut e = 0.0;
    let values = (0..spec.hours)
        .map(|t| {
            e = spec.ar_coeff * e + normal.sample(&mut noise_rng);
            let v = (spec.seasonal(t) + e).max(0.0);
            let missing = spec.missing_rate > 0.0 && mask_rng.random::<f64>() < spec.missing_rate;
            (!missing).then_some(v)
        })
        .collect();
    TimeSeries::new("pm25", spec.start_hour, values)
}
