//! Rolling-origin evaluation.
//!
//! Every window ends at an origin; the model sees `train_len` hours before it
//! and is scored on the `horizon` hours after it. Origins are anchored at the
//! end of the series (the last window's actuals are the final hours), so runs
//! that differ only in training length or method share identical windows.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{ForecastError, Result};
use crate::es::{fit_es, EsModel, EsVariant};
use crate::lstm::{train, LstmHyperParams, LstmModel, NetworkConfig};
use crate::metrics::{rmse, timed};
use crate::sarima::{fit_sarima, grid_search, OrderBounds, SarimaModel};
use crate::series::{window_at, TimeSeries};
use crate::MAX_HORIZON;

pub const ES_CANDIDATES: [usize; 7] = [48, 72, 96, 120, 144, 168, 196];
pub const SARIMA_CANDIDATES: [usize; 7] = [72, 96, 120, 144, 168, 196, 220];

pub const DEFAULT_ES_TRAIN_LEN: usize = 96;
pub const DEFAULT_SARIMA_TRAIN_LEN: usize = 120;
pub const DEFAULT_WINDOW_COUNT: usize = 48;

/// A model fitted on one training window.
pub trait Fitted: Send + Sync {
    /// Forecasts `horizon` hours past the end of `recent`, which holds the
    /// `train_len` hours before the origin.
    fn forecast(&self, recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>>;
}

pub trait Forecaster: Sync {
    fn label(&self) -> &str;

    /// Training interval this method uses by default, in hours.
    fn train_len(&self) -> usize;

    fn build(&self, train: &TimeSeries, seed: u64) -> Result<Box<dyn Fitted>>;

    /// Build once on the data before the first origin and reuse the model for
    /// every window, instead of refitting per window.
    fn shared_model(&self) -> bool {
        false
    }
}

impl Fitted for EsModel {
    fn forecast(&self, _recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        EsModel::forecast(self, horizon)
    }
}

impl Fitted for SarimaModel {
    fn forecast(&self, _recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        SarimaModel::forecast(self, horizon)
    }
}

impl Fitted for LstmModel {
    fn forecast(&self, recent: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        LstmModel::forecast(self, recent, horizon)
    }
}

#[derive(Debug, Clone)]
pub struct EsForecaster {
    pub variant: EsVariant,
    pub train_len: usize,
}

impl Default for EsForecaster {
    fn default() -> Self {
        Self {
            variant: EsVariant::default(),
            train_len: DEFAULT_ES_TRAIN_LEN,
        }
    }
}

impl Forecaster for EsForecaster {
    fn label(&self) -> &str {
        "ES"
    }

    fn train_len(&self) -> usize {
        self.train_len
    }

    fn build(&self, train: &TimeSeries, _seed: u64) -> Result<Box<dyn Fitted>> {
        Ok(Box::new(fit_es(train, self.variant)?))
    }
}

/// Seasonal ARIMA; a single-order `bounds` fits that order directly, anything
/// wider runs the order search in every window.
#[derive(Debug, Clone)]
pub struct SarimaForecaster {
    pub bounds: OrderBounds,
    pub train_len: usize,
}

impl Default for SarimaForecaster {
    fn default() -> Self {
        Self {
            bounds: OrderBounds::default(),
            train_len: DEFAULT_SARIMA_TRAIN_LEN,
        }
    }
}

impl Forecaster for SarimaForecaster {
    fn label(&self) -> &str {
        "SARIMA"
    }

    fn train_len(&self) -> usize {
        self.train_len
    }

    fn build(&self, train: &TimeSeries, _seed: u64) -> Result<Box<dyn Fitted>> {
        match self.bounds.single_order() {
            Some(order) => Ok(Box::new(fit_sarima(train, order)?)),
            None => Ok(Box::new(grid_search(train, &self.bounds)?.best)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LstmForecaster {
    pub network: NetworkConfig,
    pub hyper: LstmHyperParams,
    /// Retrain in every window rather than once per evaluation.
    pub retrain: bool,
}

impl Forecaster for LstmForecaster {
    fn label(&self) -> &str {
        "LSTM"
    }

    fn train_len(&self) -> usize {
        self.hyper.train_size
    }

    fn build(&self, train_span: &TimeSeries, seed: u64) -> Result<Box<dyn Fitted>> {
        let hyper = LstmHyperParams {
            seed,
            ..self.hyper.clone()
        };
        Ok(Box::new(train(train_span, self.network, &hyper)?))
    }

    fn shared_model(&self) -> bool {
        !self.retrain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollingSpec {
    pub train_len: usize,
    pub horizon: usize,
    pub stride: usize,
    pub window_count: usize,
    pub seed: u64,
}

impl Default for RollingSpec {
    fn default() -> Self {
        Self {
            train_len: DEFAULT_ES_TRAIN_LEN,
            horizon: MAX_HORIZON,
            stride: 1,
            window_count: DEFAULT_WINDOW_COUNT,
            seed: 0,
        }
    }
}

impl RollingSpec {
    pub fn with_train_len(&self, train_len: usize) -> Self {
        Self { train_len, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(ForecastError::InvalidHorizon(self.horizon));
        }
        if self.stride == 0 || self.window_count == 0 || self.train_len == 0 {
            return Err(ForecastError::InvalidConfig(
                "stride, window_count and train_len must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Hours of data the evaluation needs.
    pub fn required_len(&self) -> usize {
        self.train_len + self.horizon + (self.window_count - 1) * self.stride
    }

    /// Forecast origins as absolute hours, earliest first.
    pub fn origins(&self, series: &TimeSeries) -> Result<Vec<i64>> {
        self.validate()?;
        if series.len() < self.required_len() {
            return Err(ForecastError::insufficient(
                self.required_len(),
                series.len(),
            ));
        }
        let last = series.end_hour() - self.horizon as i64;
        Ok((0..self.window_count)
            .rev()
            .map(|k| last - (k * self.stride) as i64)
            .collect())
    }
}

/// Seed for the window at `origin`, independent of evaluation order.
pub fn window_seed(seed: u64, origin: i64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(origin as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingReport {
    pub method: String,
    /// Entry `h - 1` is the mean over windows of the absolute error at horizon `h`.
    pub per_horizon_rmse: Vec<f64>,
    /// Mean over windows of each window's RMSE across all horizons.
    pub mean_window_rmse: f64,
    /// Mean wall-clock seconds per model build.
    pub mean_build_seconds: f64,
    /// Mean wall-clock seconds per window forecast.
    pub mean_predict_seconds: f64,
    pub window_count: usize,
    pub builds: usize,
    pub origins: Vec<i64>,
}

struct WindowOutcome {
    abs_errors: Vec<f64>,
    window_rmse: f64,
    build_seconds: Option<f64>,
    predict_seconds: f64,
}

fn score(
    model: &dyn Fitted,
    train: &TimeSeries,
    actual: &TimeSeries,
    horizon: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let (pred, elapsed) = timed(|| model.forecast(train, horizon));
    let pred = pred?;
    let actual = actual.dense()?;
    let abs_errors = pred
        .iter()
        .zip(&actual)
        .map(|(p, a)| rmse(&[*p], &[*a]).map(|e| e.rmse))
        .collect::<Result<Vec<_>>>()?;
    let window_rmse = rmse(&pred, &actual)?.rmse;
    Ok((abs_errors, window_rmse, elapsed.as_secs_f64()))
}

/// Rolling-origin evaluation of one method. Windows run in parallel on the
/// current rayon pool; results are aggregated in origin order and do not
/// depend on the schedule.
pub fn rolling_evaluate(
    series: &TimeSeries,
    method: &dyn Forecaster,
    spec: &RollingSpec,
) -> Result<RollingReport> {
    let origins = spec.origins(series)?;
    let horizon = spec.horizon;

    let shared = if method.shared_model() {
        let (train, _) = window_at(series, origins[0], spec.train_len, horizon)?;
        let (model, elapsed) = timed(|| method.build(&train, window_seed(spec.seed, origins[0])));
        Some((model?, elapsed.as_secs_f64()))
    } else {
        None
    };

    let outcomes = origins
        .par_iter()
        .map(|&origin| -> Result<WindowOutcome> {
            let (train, actual) = window_at(series, origin, spec.train_len, horizon)?;
            let (own, build_seconds) = match &shared {
                Some(_) => (None, None),
                None => {
                    let (m, elapsed) =
                        timed(|| method.build(&train, window_seed(spec.seed, origin)));
                    (Some(m?), Some(elapsed.as_secs_f64()))
                }
            };
            let fitted: &dyn Fitted = match (&own, &shared) {
                (Some(m), _) | (None, Some((m, _))) => m.as_ref(),
                (None, None) => unreachable!("every window has a model"),
            };
            let (abs_errors, window_rmse, predict_seconds) =
                score(fitted, &train, &actual, horizon)?;
            Ok(WindowOutcome {
                abs_errors,
                window_rmse,
                build_seconds,
                predict_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let mut per_horizon_rmse = vec![0.0; horizon];
    for o in &outcomes {
        for (acc, e) in per_horizon_rmse.iter_mut().zip(&o.abs_errors) {
            *acc += e;
        }
    }
    per_horizon_rmse.iter_mut().for_each(|v| *v /= n);
    let mean_window_rmse = outcomes.iter().map(|o| o.window_rmse).sum::<f64>() / n;
    let build_times: Vec<f64> = match &shared {
        Some((_, secs)) => vec![*secs],
        None => outcomes.iter().filter_map(|o| o.build_seconds).collect(),
    };
    Ok(RollingReport {
        method: method.label().to_string(),
        per_horizon_rmse,
        mean_window_rmse,
        mean_build_seconds: build_times.iter().sum::<f64>() / build_times.len() as f64,
        mean_predict_seconds: outcomes.iter().map(|o| o.predict_seconds).sum::<f64>() / n,
        window_count: outcomes.len(),
        builds: build_times.len(),
        origins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub method: String,
    /// `(train_len, mean window RMSE)` in candidate order.
    pub rows: Vec<(usize, f64)>,
    pub best_train_len: usize,
    pub elapsed_seconds: f64,
}

/// Smallest-RMSE candidate; ties go to the shorter interval.
pub fn argmin_train_len(rows: &[(usize, f64)]) -> Option<usize> {
    rows.iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|r| r.0)
}

/// Rolling evaluation at horizon 24 for every candidate training interval.
/// `spec.train_len` and `spec.horizon` are replaced per candidate.
pub fn sweep_training_interval(
    series: &TimeSeries,
    method: &dyn Forecaster,
    candidates: &[usize],
    spec: &RollingSpec,
) -> Result<SweepReport> {
    if candidates.is_empty() {
        return Err(ForecastError::EmptyInput(
            "no candidate training intervals".into(),
        ));
    }
    let started = Instant::now();
    let rows = candidates
        .iter()
        .map(|&len| {
            let run = RollingSpec {
                train_len: len,
                horizon: MAX_HORIZON,
                ..*spec
            };
            rolling_evaluate(series, method, &run).map(|r| (len, r.mean_window_rmse))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        method: method.label().to_string(),
        best_train_len: argmin_train_len(&rows).expect("non-empty"),
        rows,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

/// One row of the merged comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRow {
    pub method: String,
    pub horizon: usize,
    pub rmse: f64,
    pub build_seconds: f64,
    pub predict_seconds: f64,
}

/// Evaluates each method on the same windows, each with its own training
/// interval, and returns the reports in input order.
pub fn compare_methods(
    series: &TimeSeries,
    methods: &[&dyn Forecaster],
    spec: &RollingSpec,
) -> Result<Vec<RollingReport>> {
    let reports = methods
        .iter()
        .map(|m| rolling_evaluate(series, *m, &spec.with_train_len(m.train_len())))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(reports.windows(2).all(|w| w[0].origins == w[1].origins));
    Ok(reports)
}

/// Method-major, horizon-minor rows of all reports.
pub fn merged_table(reports: &[RollingReport]) -> Vec<HorizonRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.per_horizon_rmse
                .iter()
                .enumerate()
                .map(|(i, v)| HorizonRow {
                    method: r.method.clone(),
                    horizon: i + 1,
                    rmse: *v,
                    build_seconds: r.mean_build_seconds,
                    predict_seconds: r.mean_predict_seconds,
                })
        })
        .collect()
}

/// Formats with 6 significant digits, like C's `%g`.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let (mantissa, _) = sci.split_at(sci.find('e').expect("exponent"));
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_report_csv<W: Write>(rows: &[HorizonRow], mut out: W) -> Result<()> {
    writeln!(out, "method,horizon,rmse,build_s,predict_s")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.method,
            r.horizon,
            format_sig(r.rmse),
            format_sig(r.build_seconds),
            format_sig(r.predict_seconds)
        )?;
    }
    Ok(())
}

pub fn write_plot_csv<W: Write>(rows: &[HorizonRow], mut out: W) -> Result<()> {
    writeln!(out, "method,horizon,rmse")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.method, r.horizon, format_sig(r.rmse))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(reports: &[SweepReport], mut out: W) -> Result<()> {
    writeln!(out, "method,train_len,rmse")?;
    for rep in reports {
        for (len, v) in &rep.rows {
            writeln!(out, "{},{},{}", rep.method, len, format_sig(*v))?;
        }
    }
    Ok(())
}
