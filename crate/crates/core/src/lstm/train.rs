use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{backward, forward, mse_with_grad, LayerMasks, LayerState};
use super::{windows, LstmHyperParams, LstmModel, NetworkConfig, Normalization, SupervisedBatch};
use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-7;

/// Mask stream, kept apart from weight initialization.
const MASK_STREAM: u64 = 0x6d61_736b;

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let lr_t = self.lr * c2.sqrt() / c1;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Trains a network on the trailing `hyper.train_size` hours of `series`.
///
/// The final `validation_hours` targets are held out; training stops once the
/// validation loss has not improved for `patience()` epochs and the best
/// weights are restored. Batches are visited in chronological order and, in
/// stateful mode, each batch starts from the state the previous one ended in.
pub fn train(
    series: &TimeSeries,
    config: NetworkConfig,
    hyper: &LstmHyperParams,
) -> Result<LstmModel> {
    hyper.validate()?;
    let values = series.dense()?;
    let values = &values[values.len().saturating_sub(hyper.train_size)..];
    if values.len() < hyper.min_series_len() {
        return Err(ForecastError::insufficient(
            hyper.min_series_len(),
            values.len(),
        ));
    }
    let norm = Normalization::fit(values)?;
    let scaled: Vec<f64> = values.iter().map(|v| norm.normalize(*v)).collect();
    let samples = windows(&scaled, hyper.window_len, 1);
    let split = samples.len() - hyper.validation_hours;
    let train_set = samples.range(0, split);
    let val_set = samples.range(split, samples.len());

    let mut model = LstmModel::initialized(config, hyper.clone(), norm)?;
    let topo = model.topology.clone();
    let mut mask_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    mask_rng.set_stream(MASK_STREAM);
    let mut adam = Adam::new(topo.param_count, hyper.learning_rate);
    let masked = hyper.dropout > 0.0 || hyper.recurrent_dropout > 0.0;

    let monitor = |m: &LstmModel| {
        if val_set.is_empty() {
            m.evaluate(&train_set)
        } else {
            m.evaluate(&val_set)
        }
    };
    let mut best_loss = f64::INFINITY;
    let mut best_params = model.params.clone();
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 0..hyper.epochs_max {
        epochs_run = epoch + 1;
        let mut carried: Option<Vec<LayerState>> = None;
        for batch in train_set.chunks(hyper.batch_size) {
            let masks = masked.then(|| {
                topo.layers
                    .iter()
                    .map(|spec| {
                        LayerMasks::sample(
                            &mut mask_rng,
                            batch.len(),
                            spec,
                            hyper.dropout,
                            hyper.recurrent_dropout,
                        )
                    })
                    .collect()
            });
            let init = if hyper.stateful {
                carried.as_deref()
            } else {
                None
            };
            let pass = forward(&topo, &model.params, batch.inputs_view(), init, masks);
            let (loss, d_pred) = mse_with_grad(&pass.predictions, &batch.targets);
            if !loss.is_finite() {
                return Err(ForecastError::Divergence { epoch });
            }
            let grads = backward(&topo, &model.params, &pass, &d_pred);
            adam.step(&mut model.params, &grads);
            if hyper.stateful {
                carried = Some(pass.final_states());
            }
        }

        let loss = monitor(&model);
        if !loss.is_finite() {
            return Err(ForecastError::Divergence { epoch });
        }
        if loss < best_loss {
            best_loss = loss;
            best_params.copy_from_slice(&model.params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hyper.patience() {
                break;
            }
        }
    }
    model.params = best_params;
    model.trained_epochs = epochs_run;
    model.best_val_loss = best_loss;
    Ok(model)
}

/// Largest relative disagreement between the backpropagated gradient of the
/// batch MSE and central finite differences, over all parameters. Dropout is
/// off and the state starts at zero.
pub fn gradient_check(model: &LstmModel, batch: &SupervisedBatch) -> f64 {
    const EPS: f64 = 1e-5;
    let topo = &model.topology;
    let inputs = batch.inputs_view();
    let loss_at = |params: &[f64]| {
        let pass = forward(topo, params, inputs, None, None);
        mse_with_grad(&pass.predictions, &batch.targets).0
    };
    let pass = forward(topo, &model.params, inputs, None, None);
    let (_, d_pred) = mse_with_grad(&pass.predictions, &batch.targets);
    let analytic = backward(topo, &model.params, &pass, &d_pred);

    let mut params = model.params.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = params[i];
        params[i] = orig + EPS;
        let up = loss_at(&params);
        params[i] = orig - EPS;
        let down = loss_at(&params);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * EPS);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

/// Analytic gradient of the batch MSE, for tests.
#[cfg(test)]
pub(crate) fn analytic_gradient(model: &LstmModel, batch: &SupervisedBatch) -> Vec<f64> {
    let pass = forward(
        &model.topology,
        &model.params,
        batch.inputs_view(),
        None,
        None,
    );
    let (_, d_pred) = mse_with_grad(&pass.predictions, &batch.targets);
    backward(&model.topology, &model.params, &pass, &d_pred)
}

/// A stateless forward pass with explicit per-layer starting states, for tests.
#[cfg(test)]
pub(crate) fn predict_from(
    model: &LstmModel,
    batch: &SupervisedBatch,
    init: &[LayerState],
) -> Vec<f64> {
    forward(
        &model.topology,
        &model.params,
        batch.inputs_view(),
        Some(init),
        None,
    )
    .predictions
}
