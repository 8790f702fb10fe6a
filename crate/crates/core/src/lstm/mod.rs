//! LSTM forecaster trained from scratch with backpropagation through time.
//!
//! Four network shapes are supported (see [`NetworkKind`]). Inputs are windows
//! of `window_len` min-max scaled observations; the network predicts the next
//! scaled value and multi-step forecasts feed each prediction back as input.

mod cell;
mod checkpoint;
mod network;
mod train;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use cell::{lstm_cell_forward, CellWeights};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{NetworkConfig, NetworkKind, Topology};
pub use train::{gradient_check, train};

use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;
use crate::MAX_HORIZON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmHyperParams {
    pub epochs_max: usize,
    /// Early-stopping patience as a fraction of `epochs_max`.
    pub patience_fraction: f64,
    /// Trailing hours of the training span held out for validation.
    pub validation_hours: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub batch_size: usize,
    /// Carry hidden state across consecutive batches within an epoch.
    pub stateful: bool,
    /// Hidden units per input lag.
    pub units_coefficient: usize,
    /// Trailing hours of history used for training.
    pub train_size: usize,
    pub window_len: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LstmHyperParams {
    fn default() -> Self {
        Self {
            epochs_max: 800,
            patience_fraction: 0.1,
            validation_hours: 72,
            dropout: 0.1,
            recurrent_dropout: 0.3,
            batch_size: 12,
            stateful: true,
            units_coefficient: 3,
            train_size: 8000,
            window_len: 24,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl LstmHyperParams {
    pub fn hidden_units(&self) -> usize {
        self.units_coefficient * self.window_len
    }

    /// Epochs without validation improvement tolerated before stopping.
    pub fn patience(&self) -> usize {
        ((self.patience_fraction * self.epochs_max as f64).round() as usize).max(1)
    }

    /// Shortest series `train` accepts.
    pub fn min_series_len(&self) -> usize {
        self.window_len + self.validation_hours + 1
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..1.0).contains(&r);
        let problem = if !rate_ok(self.dropout) || !rate_ok(self.recurrent_dropout) {
            Some("dropout rates must lie in [0, 1)")
        } else if !rate_ok(self.patience_fraction) {
            Some("patience_fraction must lie in [0, 1)")
        } else if self.batch_size == 0 {
            Some("batch_size must be at least 1")
        } else if self.window_len == 0 {
            Some("window_len must be at least 1")
        } else if self.hidden_units() == 0 {
            Some("hidden units must be at least 1")
        } else if self.epochs_max == 0 {
            Some("epochs_max must be at least 1")
        } else if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            Some("learning_rate must be positive")
        } else {
            None
        };
        match problem {
            Some(msg) => Err(ForecastError::InvalidConfig(msg.into())),
            None => Ok(()),
        }
    }
}

/// Min-max scaling to `[0, 1]` fitted on training values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if values.is_empty() {
            return Err(ForecastError::EmptyInput("no values to normalize".into()));
        }
        if max <= min {
            return Err(ForecastError::DegenerateScale(min));
        }
        Ok(Self { min, max })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * (self.max - self.min) + self.min
    }
}

/// Sliding-window samples: row `i` of `inputs` (`len × window_len`,
/// row-major) is followed by `targets[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedBatch {
    pub window_len: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl SupervisedBatch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.window_len), &self.inputs)
            .expect("inputs hold len × window_len values")
    }

    /// Consecutive chunks of at most `size` samples, in order.
    pub fn chunks(&self, size: usize) -> impl Iterator<Item = SupervisedBatch> + '_ {
        let w = self.window_len;
        self.targets
            .chunks(size)
            .zip(self.inputs.chunks(size * w))
            .map(move |(t, x)| SupervisedBatch {
                window_len: w,
                inputs: x.to_vec(),
                targets: t.to_vec(),
            })
    }

    /// Samples `[from, to)`.
    pub fn range(&self, from: usize, to: usize) -> SupervisedBatch {
        let w = self.window_len;
        SupervisedBatch {
            window_len: w,
            inputs: self.inputs[from * w..to * w].to_vec(),
            targets: self.targets[from..to].to_vec(),
        }
    }
}

/// Windows already-scaled `values` into samples spaced `step` apart.
pub(crate) fn windows(values: &[f64], window_len: usize, step: usize) -> SupervisedBatch {
    let step = step.max(1);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut i = 0;
    while i + window_len < values.len() {
        inputs.extend_from_slice(&values[i..i + window_len]);
        targets.push(values[i + window_len]);
        i += step;
    }
    SupervisedBatch {
        window_len,
        inputs,
        targets,
    }
}

/// Frames a gap-free series as supervised samples scaled by the series' own
/// extrema, in chronological order.
pub fn make_supervised(
    series: &TimeSeries,
    window_len: usize,
    step: usize,
) -> Result<(SupervisedBatch, Normalization)> {
    let values = series.dense()?;
    if window_len == 0 {
        return Err(ForecastError::InvalidConfig(
            "window_len must be at least 1".into(),
        ));
    }
    if values.len() <= window_len {
        return Err(ForecastError::insufficient(window_len + 1, values.len()));
    }
    let norm = Normalization::fit(&values)?;
    let scaled: Vec<f64> = values.iter().map(|v| norm.normalize(*v)).collect();
    Ok((windows(&scaled, window_len, step), norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub config: NetworkConfig,
    pub topology: Topology,
    /// Flat parameter vector laid out by `topology`.
    pub params: Vec<f64>,
    pub normalization: Normalization,
    pub hyper: LstmHyperParams,
    pub trained_epochs: usize,
    pub best_val_loss: f64,
}

impl LstmModel {
    /// Untrained model with freshly initialized weights.
    pub fn initialized(
        config: NetworkConfig,
        hyper: LstmHyperParams,
        normalization: Normalization,
    ) -> Result<Self> {
        use rand::SeedableRng;
        hyper.validate()?;
        let topology = Topology::new(config.kind, hyper.hidden_units());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(hyper.seed);
        let params = topology.init_params(&mut rng);
        Ok(Self {
            config,
            topology,
            params,
            normalization,
            hyper,
            trained_epochs: 0,
            best_val_loss: f64::INFINITY,
        })
    }

    /// Scaled one-step predictions for a batch of scaled windows, without
    /// dropout and from a zero state.
    pub fn predict_scaled(&self, inputs: ArrayView2<'_, f64>) -> Vec<f64> {
        network::forward(&self.topology, &self.params, inputs, None, None).predictions
    }

    /// Mean squared error on a scaled batch, without dropout.
    pub fn evaluate(&self, batch: &SupervisedBatch) -> f64 {
        let pred = self.predict_scaled(batch.inputs_view());
        network::mse_with_grad(&pred, &batch.targets).0
    }

    pub fn forecast(&self, recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        forecast_lstm(self, recent, horizon)
    }
}

/// Recursive multi-step forecast from the last `window_len` observations of
/// `recent`, denormalized and clamped at 0.
pub fn forecast_lstm(model: &LstmModel, recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(ForecastError::InvalidHorizon(horizon));
    }
    let w = model.hyper.window_len;
    let values = recent.dense()?;
    if values.len() < w {
        return Err(ForecastError::insufficient(w, values.len()));
    }
    let norm = model.normalization;
    let mut window: Vec<f64> = values[values.len() - w..]
        .iter()
        .map(|v| norm.normalize(*v))
        .collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let view = ArrayView2::from_shape((1, w), &window).expect("one window");
        let next = model.predict_scaled(view)[0];
        out.push(norm.denormalize(next).max(0.0));
        window.remove(0);
        window.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_hyperparameters() {
        let h = LstmHyperParams::default();
        assert_eq!(h.epochs_max, 800);
        assert_eq!(h.patience(), 80);
        assert_eq!(h.validation_hours, 72);
        assert_eq!(h.batch_size, 12);
        assert_eq!(h.hidden_units(), 72);
        assert_eq!(h.train_size, 8000);
        assert!(h.stateful);
        assert!(h.validate().is_ok());
        let bad = LstmHyperParams { dropout: 1.0, ..h };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn supervised_windows() {
        let s = TimeSeries::from_values("x", 0, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let (batch, norm) = make_supervised(&s, 2, 1).unwrap();
        let raw: Vec<f64> = batch.inputs.iter().map(|v| norm.denormalize(*v)).collect();
        let targets: Vec<f64> = batch.targets.iter().map(|v| norm.denormalize(*v)).collect();
        assert_eq!(raw, vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(targets, vec![3.0, 4.0]);
        assert!(batch
            .inputs
            .iter()
            .chain(&batch.targets)
            .all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn supervised_errors() {
        let flat = TimeSeries::from_values("x", 0, &[3.0; 10]).unwrap();
        assert_eq!(
            make_supervised(&flat, 2, 1).unwrap_err(),
            ForecastError::DegenerateScale(3.0)
        );
        let short = TimeSeries::from_values("x", 0, &[1.0, 2.0]).unwrap();
        assert!(matches!(
            make_supervised(&short, 2, 1),
            Err(ForecastError::InsufficientData { .. })
        ));
    }

    #[test]
    fn chunks_cover_all_samples_in_order() {
        let b = windows(&(0..20).map(f64::from).collect::<Vec<_>>(), 3, 1);
        let parts: Vec<SupervisedBatch> = b.chunks(5).collect();
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[3].len(), 2);
        assert_eq!(parts[1].targets[0], 8.0);
        assert_eq!(parts[1].inputs[..3], [5.0, 6.0, 7.0]);
    }

    #[test]
    fn forecast_shapes_and_errors() {
        let hyper = LstmHyperParams {
            window_len: 4,
            units_coefficient: 1,
            ..Default::default()
        };
        let norm = Normalization {
            min: 0.0,
            max: 10.0,
        };
        let model = LstmModel::initialized(NetworkConfig::default(), hyper, norm).unwrap();
        let recent = TimeSeries::from_values("x", 0, &[1.0, 5.0, 3.0, 4.0, 6.0]).unwrap();
        let one = model.forecast(&recent, 1).unwrap();
        let view = ArrayView2::from_shape((1, 4), &[0.5, 0.3, 0.4, 0.6][..]).unwrap();
        assert_eq!(
            one,
            vec![norm.denormalize(model.predict_scaled(view)[0]).max(0.0)]
        );
        let day = model.forecast(&recent, 24).unwrap();
        assert_eq!(day.len(), 24);
        assert!(day.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(day[0], one[0]);

        let short = TimeSeries::from_values("x", 0, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            model.forecast(&short, 3),
            Err(ForecastError::InsufficientData { .. })
        ));
        assert_eq!(
            model.forecast(&recent, 0),
            Err(ForecastError::InvalidHorizon(0))
        );
    }

    proptest! {
        #[test]
        fn normalization_round_trips(lo in -100.0..100.0f64, span in 1e-3..500.0f64, t in 0.0..=1.0f64) {
            let norm = Normalization { min: lo, max: lo + span };
            let v = lo + t * span;
            prop_assert!((norm.denormalize(norm.normalize(v)) - v).abs() <= 1e-12);
        }
    }
}
