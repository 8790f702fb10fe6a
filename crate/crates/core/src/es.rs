//! Exponential smoothing: simple, Holt linear trend and additive Holt-Winters.
//!
//! ```text
//! level    l_t = α (y_t − s_{t−m}) + (1 − α)(l_{t−1} + b_{t−1})
//! trend    b_t = β (l_t − l_{t−1}) + (1 − β) b_{t−1}
//! season   s_t = γ (y_t − l_t) + (1 − γ) s_{t−m}
//! forecast ŷ_{t+h} = l_t + h b_t + s_{t+h−m}
//! ```
//!
//! Simple drops trend and season, Holt drops the season. Smoothing weights
//! are fitted by minimizing the one-step-ahead in-sample SSE: an exhaustive
//! grid with step 0.1 per weight, then Nelder-Mead from the best grid point.

use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::series::TimeSeries;
use crate::MAX_HORIZON;

/// Diurnal season used by Holt-Winters.
pub const SEASON_HOURS: usize = 24;

/// Grid resolution per smoothing weight.
const GRID_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EsKind {
    Simple,
    Holt,
    HoltWintersAdditive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EsVariant {
    pub kind: EsKind,
    pub season_length: usize,
}

impl EsVariant {
    pub fn simple() -> Self {
        Self {
            kind: EsKind::Simple,
            season_length: SEASON_HOURS,
        }
    }

    pub fn holt() -> Self {
        Self {
            kind: EsKind::Holt,
            season_length: SEASON_HOURS,
        }
    }

    pub fn holt_winters() -> Self {
        Self {
            kind: EsKind::HoltWintersAdditive,
            season_length: SEASON_HOURS,
        }
    }

    /// Number of smoothing weights the variant fits.
    pub fn weight_count(&self) -> usize {
        match self.kind {
            EsKind::Simple => 1,
            EsKind::Holt => 2,
            EsKind::HoltWintersAdditive => 3,
        }
    }

    pub fn min_train_len(&self) -> usize {
        match self.kind {
            EsKind::HoltWintersAdditive => 2 * self.season_length,
            _ => 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == EsKind::HoltWintersAdditive && self.season_length != SEASON_HOURS {
            return Err(ForecastError::InvalidConfig(format!(
                "Holt-Winters season must be {SEASON_HOURS} hours, got {}",
                self.season_length
            )));
        }
        Ok(())
    }
}

impl Default for EsVariant {
    fn default() -> Self {
        Self::holt_winters()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub initial_level: f64,
    pub initial_trend: f64,
    /// Empty unless the variant is seasonal. Index `k` is the seasonal offset
    /// for the observation at position `k` of the first cycle.
    pub initial_season: Vec<f64>,
}

impl EsParams {
    /// Default initial state for `variant` computed from the training data.
    /// Holt-Winters takes the first cycle's mean as the level, the change
    /// between the first two cycle means per step as the trend, and each
    /// hour's deviation from its cycle mean, averaged over all complete
    /// cycles, as the season. The non-seasonal variants anchor the level on
    /// the first observation.
    pub fn initial_state(y: &[f64], variant: &EsVariant) -> Result<Self> {
        variant.validate()?;
        let needed = variant.min_train_len();
        if y.len() < needed {
            return Err(ForecastError::insufficient(needed, y.len()));
        }
        let m = variant.season_length;
        let params = match variant.kind {
            EsKind::Simple => Self::with_state(y[0], 0.0, Vec::new()),
            EsKind::Holt => {
                let k = m.min(y.len() - 1);
                Self::with_state(y[0], (y[k] - y[0]) / k as f64, Vec::new())
            }
            EsKind::HoltWintersAdditive => {
                let cycles = y.len() / m;
                let means: Vec<f64> = (0..cycles)
                    .map(|c| y[c * m..(c + 1) * m].iter().sum::<f64>() / m as f64)
                    .collect();
                let level = means[0];
                let trend = if cycles > 1 {
                    (means[1] - means[0]) / m as f64
                } else {
                    0.0
                };
                let season = (0..m)
                    .map(|k| {
                        (0..cycles).map(|c| y[c * m + k] - means[c]).sum::<f64>() / cycles as f64
                    })
                    .collect();
                Self::with_state(level, trend, season)
            }
        };
        Ok(params)
    }

    fn with_state(level: f64, trend: f64, season: Vec<f64>) -> Self {
        Self {
            alpha: 0.5,
            beta: 0.1,
            gamma: 0.1,
            initial_level: level,
            initial_trend: trend,
            initial_season: season,
        }
    }

    /// Copy with smoothing weights `[alpha, beta, gamma]`; trailing entries may be
    /// omitted for variants that do not use them.
    pub fn with_weights(&self, w: &[f64]) -> Self {
        let mut p = self.clone();
        p.alpha = w[0];
        if let Some(&b) = w.get(1) {
            p.beta = b;
        }
        if let Some(&g) = w.get(2) {
            p.gamma = g;
        }
        p
    }
}

/// Smoothed state after the last training observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsState {
    pub level: f64,
    pub trend: f64,
    /// Seasonal offsets by phase: `season[t % m]` belongs to observation `t`.
    pub season: Vec<f64>,
    /// Number of observations consumed.
    pub consumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsModel {
    pub variant: EsVariant,
    pub params: EsParams,
    pub final_state: EsState,
    pub train_sse: f64,
}

impl EsModel {
    /// Runs the recurrences over `y` with fixed parameters.
    pub fn with_params(y: &[f64], variant: EsVariant, params: EsParams) -> Result<Self> {
        variant.validate()?;
        if y.is_empty() {
            return Err(ForecastError::insufficient(1, 0));
        }
        if variant.kind == EsKind::HoltWintersAdditive
            && params.initial_season.len() != variant.season_length
        {
            return Err(ForecastError::Shape(format!(
                "initial season has {} entries, expected {}",
                params.initial_season.len(),
                variant.season_length
            )));
        }
        let (train_sse, final_state) = smooth(y, &variant, &params);
        if !train_sse.is_finite() {
            return Err(ForecastError::Divergence { epoch: 0 });
        }
        Ok(Self {
            variant,
            params,
            final_state,
            train_sse,
        })
    }

    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        forecast_es(self, horizon)
    }
}

/// One-step-ahead SSE and the final state.
fn smooth(y: &[f64], variant: &EsVariant, p: &EsParams) -> (f64, EsState) {
    let m = variant.season_length;
    let mut level = p.initial_level;
    let mut trend = if variant.kind == EsKind::Simple {
        0.0
    } else {
        p.initial_trend
    };
    let seasonal = variant.kind == EsKind::HoltWintersAdditive;
    let mut season = if seasonal {
        p.initial_season.clone()
    } else {
        Vec::new()
    };
    let mut sse = 0.0;

    for (t, &obs) in y.iter().enumerate() {
        match variant.kind {
            EsKind::Simple => {
                let err = obs - level;
                sse += err * err;
                level = p.alpha * obs + (1.0 - p.alpha) * level;
            }
            EsKind::Holt => {
                let err = obs - (level + trend);
                sse += err * err;
                let prev = level;
                level = p.alpha * obs + (1.0 - p.alpha) * (level + trend);
                trend = p.beta * (level - prev) + (1.0 - p.beta) * trend;
            }
            EsKind::HoltWintersAdditive => {
                let phase = t % m;
                let s_old = season[phase];
                let err = obs - (level + trend + s_old);
                sse += err * err;
                let prev = level;
                level = p.alpha * (obs - s_old) + (1.0 - p.alpha) * (level + trend);
                trend = p.beta * (level - prev) + (1.0 - p.beta) * trend;
                season[phase] = p.gamma * (obs - level) + (1.0 - p.gamma) * s_old;
            }
        }
    }
    let state = EsState {
        level,
        trend,
        season,
        consumed: y.len(),
    };
    (sse, state)
}

/// Fits smoothing weights by grid search followed by bounded Nelder-Mead.
pub fn fit_es(train: &TimeSeries, variant: EsVariant) -> Result<EsModel> {
    let y = train.dense()?;
    let init = EsParams::initial_state(&y, &variant)?;
    let sse_at = |w: &[f64]| smooth(&y, &variant, &init.with_weights(w)).0;

    let k = variant.weight_count();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * GRID_STEP).collect();
    let mut best_w = vec![0.0; k];
    let mut best_sse = f64::INFINITY;
    let mut probe = vec![0.0; k];
    for idx in 0..grid.len().pow(k as u32) {
        let mut rem = idx;
        for slot in probe.iter_mut() {
            *slot = grid[rem % grid.len()];
            rem /= grid.len();
        }
        let sse = sse_at(&probe);
        // strict comparison keeps the first grid point among ties
        if sse < best_sse {
            best_sse = sse;
            best_w.copy_from_slice(&probe);
        }
    }
    if !best_sse.is_finite() {
        return Err(ForecastError::Divergence { epoch: 0 });
    }

    let config = NelderMeadConfig {
        max_iter: 500,
        xtol: 1e-6,
        ftol: 1e-6,
        initial_step: vec![0.05; k],
        bounds: Some(vec![(0.0, 1.0); k]),
    };
    let refined = nelder_mead(sse_at, &best_w, &config);
    let weights = if refined.value < best_sse {
        refined.x
    } else {
        best_w
    };
    EsModel::with_params(&y, variant, init.with_weights(&weights))
}

/// Point forecasts for hours `1..=horizon` after the training block, clamped at 0.
pub fn forecast_es(model: &EsModel, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(ForecastError::InvalidHorizon(horizon));
    }
    let st = &model.final_state;
    let m = model.variant.season_length;
    let out = (1..=horizon)
        .map(|h| {
            let hf = h as f64;
            let v = match model.variant.kind {
                EsKind::Simple => st.level,
                EsKind::Holt => st.level + hf * st.trend,
                EsKind::HoltWintersAdditive => {
                    // observation index consumed + h - 1 shares its phase with
                    // the last season update in that slot
                    st.level + hf * st.trend + st.season[(st.consumed + h - 1) % m]
                }
            };
            v.max(0.0)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::from_values("y", 0, v).unwrap()
    }

    fn model(kind: EsKind, level: f64, trend: f64) -> EsModel {
        let variant = EsVariant {
            kind,
            season_length: SEASON_HOURS,
        };
        EsModel {
            variant,
            params: EsParams::with_state(level, trend, Vec::new()),
            final_state: EsState {
                level,
                trend,
                season: Vec::new(),
                consumed: 10,
            },
            train_sse: 0.0,
        }
    }

    #[test]
    fn constant_series_forecasts_constant() {
        let m = fit_es(&ts(&[5.0; 30]), EsVariant::simple()).unwrap();
        assert_eq!(m.forecast(3).unwrap(), vec![5.0; 3]);
        assert_eq!(m.train_sse, 0.0);
    }

    #[test]
    fn single_recurrence_step() {
        let params = EsParams {
            alpha: 0.5,
            initial_level: 10.0,
            ..EsParams::with_state(10.0, 0.0, Vec::new())
        };
        let m = EsModel::with_params(&[10.0, 20.0], EsVariant::simple(), params).unwrap();
        assert_eq!(m.final_state.level, 15.0);
    }

    #[test]
    fn noiseless_diurnal_signal_is_fitted_almost_exactly() {
        let y: Vec<f64> = (0..240)
            .map(|t| 10.0 + 5.0 * (2.0 * PI * t as f64 / 24.0).sin())
            .collect();
        let m = fit_es(&ts(&y), EsVariant::holt_winters()).unwrap();
        assert!(m.train_sse < 1e-2 * y.len() as f64, "sse {}", m.train_sse);
        let f = m.forecast(24).unwrap();
        for (h, v) in f.iter().enumerate() {
            let t = (240 + h) as f64;
            let truth = 10.0 + 5.0 * (2.0 * PI * t / 24.0).sin();
            assert!((v - truth).abs() < 1e-6, "h={} {v} vs {truth}", h + 1);
        }
    }

    #[test]
    fn forecast_shapes() {
        assert_eq!(
            model(EsKind::Simple, 15.0, 0.0).forecast(3).unwrap(),
            vec![15.0; 3]
        );
        assert_eq!(
            model(EsKind::Holt, 10.0, 2.0).forecast(3).unwrap(),
            vec![12.0, 14.0, 16.0]
        );
        assert_eq!(
            model(EsKind::Holt, 1.0, -2.0).forecast(2).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn horizon_limits() {
        let m = model(EsKind::Simple, 1.0, 0.0);
        assert_eq!(m.forecast(0), Err(ForecastError::InvalidHorizon(0)));
        assert_eq!(m.forecast(25), Err(ForecastError::InvalidHorizon(25)));
    }

    #[test]
    fn too_short_training_data() {
        assert!(matches!(
            fit_es(&ts(&[1.0, 2.0]), EsVariant::simple()),
            Err(ForecastError::InsufficientData { needed: 3, got: 2 })
        ));
        assert!(matches!(
            fit_es(&ts(&[1.0; 47]), EsVariant::holt_winters()),
            Err(ForecastError::InsufficientData {
                needed: 48,
                got: 47
            })
        ));
    }

    #[test]
    fn alpha_one_reproduces_last_observation() {
        let y = [3.2, 7.9, 1.4, 12.25, 6.0];
        let init = EsParams::initial_state(&y, &EsVariant::simple()).unwrap();
        let m = EsModel::with_params(&y, EsVariant::simple(), init.with_weights(&[1.0])).unwrap();
        assert_eq!(m.forecast(1).unwrap(), vec![6.0]);
    }

    #[test]
    fn fitted_sse_beats_every_grid_probe() {
        let y: Vec<f64> = (0..96)
            .map(|t| 20.0 + 0.1 * t as f64 + 4.0 * (t as f64 * 0.7).sin() + ((t * 7) % 5) as f64)
            .collect();
        for variant in [
            EsVariant::simple(),
            EsVariant::holt(),
            EsVariant::holt_winters(),
        ] {
            let m = fit_es(&ts(&y), variant).unwrap();
            let init = EsParams::initial_state(&y, &variant).unwrap();
            let k = variant.weight_count();
            for idx in 0..11usize.pow(k as u32) {
                let w: Vec<f64> = (0..k)
                    .map(|j| ((idx / 11usize.pow(j as u32)) % 11) as f64 * 0.1)
                    .collect();
                let sse = smooth(&y, &variant, &init.with_weights(&w)).0;
                assert!(
                    m.train_sse <= sse,
                    "{variant:?} {w:?}: {} > {sse}",
                    m.train_sse
                );
            }
        }
    }

    #[test]
    fn initial_season_is_mean_centred() {
        let y: Vec<f64> = (0..48).map(|t| (t % 24) as f64 * 1.5 + 3.0).collect();
        let p = EsParams::initial_state(&y, &EsVariant::holt_winters()).unwrap();
        assert!(p.initial_season.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn initial_season_averages_complete_cycles() {
        // zero-sum disturbances that flip sign between the two complete cycles
        let shape: Vec<f64> = (0..24).map(|k| (k as f64 - 11.5) * 0.5).collect();
        let mut y = Vec::new();
        for (c, sign) in [(0.0, 1.0), (24.0, -1.0), (48.0, 1.0)] {
            let bump = |k: usize| match k {
                0 => sign,
                1 => -sign,
                _ => 0.0,
            };
            y.extend((0..24).map(|k| 10.0 + c + shape[k] + bump(k)));
        }
        y.truncate(60);
        let p = EsParams::initial_state(&y, &EsVariant::holt_winters()).unwrap();
        assert!((p.initial_level - 10.0).abs() < 1e-12);
        assert!((p.initial_trend - 1.0).abs() < 1e-12);
        for k in 0..24 {
            assert!((p.initial_season[k] - shape[k]).abs() < 1e-12, "{k}");
        }
    }

    proptest! {
        #[test]
        fn shifting_data_shifts_forecasts(
            y in prop::collection::vec(0.0..100.0f64, 5..60),
            c in -50.0..50.0f64,
            alpha in 0.0..=1.0f64,
            beta in 0.0..=1.0f64,
        ) {
            let shifted: Vec<f64> = y.iter().map(|v| v + c + 200.0).collect();
            let base: Vec<f64> = y.iter().map(|v| v + 200.0).collect();
            for variant in [EsVariant::simple(), EsVariant::holt()] {
                let run = |data: &[f64]| {
                    let init = EsParams::initial_state(data, &variant).unwrap();
                    EsModel::with_params(data, variant, init.with_weights(&[alpha, beta]))
                        .unwrap()
                        .forecast(24)
                        .unwrap()
                };
                let f0 = run(&base);
                let f1 = run(&shifted);
                for (a, b) in f0.iter().zip(&f1) {
                    if *a > 0.0 && *b > 0.0 {
                        prop_assert!((b - a - c).abs() < 1e-9, "{a} {b} {c}");
                    }
                }
            }
        }

        #[test]
        fn forecasts_are_finite_and_non_negative(
            y in prop::collection::vec(0.0..500.0f64, 48..100),
            h in 1usize..=24,
        ) {
            for variant in [EsVariant::simple(), EsVariant::holt(), EsVariant::holt_winters()] {
                let f = fit_es(&ts(&y), variant).unwrap().forecast(h).unwrap();
                prop_assert_eq!(f.len(), h);
                prop_assert!(f.iter().all(|v| v.is_finite() && *v >= 0.0));
            }
        }
    }
}
