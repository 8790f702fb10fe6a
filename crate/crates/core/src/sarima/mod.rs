//! Seasonal ARIMA `(p,d,q)(P,D,Q)[24]` estimated by conditional sum of squares.
//!
//! With `w_t = z_t − μ` the mean-adjusted differenced series, the model is
//!
//! ```text
//! φ(B) Φ(B^s) w_t = θ(B) Θ(B^s) e_t
//! ```
//!
//! Residuals are computed recursively from `t = p + P·s` onwards with
//! pre-sample residuals fixed at zero. The mean `μ` is only estimated for
//! undifferenced models; after differencing it is pinned at zero.

mod diff;
mod search;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use diff::{difference, difference_polynomial, undifference};
pub use search::{grid_search, initial_differencing, GridSearchResult, OrderBounds};

use crate::error::{ForecastError, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::series::TimeSeries;
use crate::MAX_HORIZON;

/// Seasonal period in hours.
pub const SEASONAL_PERIOD: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub s: usize,
}

impl SarimaOrder {
    pub fn new(
        (p, d, q): (usize, usize, usize),
        (seasonal_p, seasonal_d, seasonal_q): (usize, usize, usize),
    ) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            s: SEASONAL_PERIOD,
        }
    }

    /// Non-seasonal ARIMA(p, d, q).
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self::new((p, d, q), (0, 0, 0))
    }

    /// Length of the coefficient vector taken by [`css_objective`].
    pub fn param_len(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + 1
    }

    /// The mean is estimated only when no differencing is applied.
    pub fn estimates_mean(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    /// Number of estimated coefficients.
    pub fn estimated_count(&self) -> usize {
        self.param_len() - usize::from(!self.estimates_mean())
    }

    /// Observations lost to differencing.
    pub fn differencing_lag(&self) -> usize {
        self.d + self.seasonal_d * self.s
    }

    /// Longest autoregressive lag of the expanded model.
    pub fn conditioning_lag(&self) -> usize {
        self.p + self.seasonal_p * self.s
    }

    fn ma_lag(&self) -> usize {
        self.q + self.seasonal_q * self.s
    }

    /// Shortest differenced series `fit_sarima` accepts.
    pub fn min_differenced_len(&self) -> usize {
        10 + self.p + self.q + (self.seasonal_p + self.seasonal_q) * self.s
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})[{}]",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

/// Recent history retained for forecasting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTail {
    /// Last `d + D·s` original-scale observations.
    pub levels: Vec<f64>,
    /// Last `p + P·s` mean-adjusted differenced values.
    pub centered: Vec<f64>,
    /// Last `q + Q·s` residuals.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaModel {
    pub order: SarimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub sar_coeffs: Vec<f64>,
    pub sma_coeffs: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub css: f64,
    pub aic: f64,
    pub train_tail: Option<TrainTail>,
}

/// Split view of a flat coefficient vector: `[ar | ma | sar | sma | intercept]`.
struct Coeffs<'a> {
    ar: &'a [f64],
    ma: &'a [f64],
    sar: &'a [f64],
    sma: &'a [f64],
    intercept: f64,
}

impl<'a> Coeffs<'a> {
    fn split(params: &'a [f64], o: &SarimaOrder) -> Self {
        let (ar, rest) = params.split_at(o.p);
        let (ma, rest) = rest.split_at(o.q);
        let (sar, rest) = rest.split_at(o.seasonal_p);
        let (sma, rest) = rest.split_at(o.seasonal_q);
        Self {
            ar,
            ma,
            sar,
            sma,
            intercept: rest[0],
        }
    }
}

/// Expands `(1 + Σ sign·a_i B^i)(1 + Σ sign·A_j B^{js})` and returns the
/// non-zero lags `k ≥ 1` with their coefficient in that product.
fn expand(regular: &[f64], seasonal: &[f64], s: usize, sign: f64) -> Vec<(usize, f64)> {
    let mut dense = vec![0.0; regular.len() + seasonal.len() * s + 1];
    for i in 0..=regular.len() {
        let a = if i == 0 { 1.0 } else { sign * regular[i - 1] };
        for j in 0..=seasonal.len() {
            let b = if j == 0 { 1.0 } else { sign * seasonal[j - 1] };
            dense[i + j * s] += a * b;
        }
    }
    dense
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| *c != 0.0)
        .collect()
}

/// AR lags as `w_t = Σ c_k w_{t−k} + …`.
fn ar_terms(c: &Coeffs<'_>, s: usize) -> Vec<(usize, f64)> {
    expand(c.ar, c.sar, s, -1.0)
        .into_iter()
        .map(|(k, v)| (k, -v))
        .collect()
}

/// MA lags as `… + e_t + Σ c_k e_{t−k}`.
fn ma_terms(c: &Coeffs<'_>, s: usize) -> Vec<(usize, f64)> {
    expand(c.ma, c.sma, s, 1.0)
}

/// Residuals of the model over `z`, with pre-sample values and residuals
/// taken as zero (after removing the intercept).
fn residuals(params: &[f64], z: &[f64], order: &SarimaOrder) -> Vec<f64> {
    let c = Coeffs::split(params, order);
    let ar = ar_terms(&c, order.s);
    let ma = ma_terms(&c, order.s);
    let mut e = vec![0.0; z.len()];
    for t in 0..z.len() {
        let mut v = z[t] - c.intercept;
        for &(k, a) in &ar {
            if k <= t {
                v -= a * (z[t - k] - c.intercept);
            }
        }
        for &(k, m) in &ma {
            if k <= t {
                v -= m * e[t - k];
            }
        }
        e[t] = v;
    }
    e
}

/// Conditional sum of squares of `params` (`[ar | ma | sar | sma | intercept]`)
/// on the differenced series `z`. Returns +inf instead of a non-finite value.
pub fn css_objective(params: &[f64], z: &[f64], order: &SarimaOrder) -> f64 {
    if params.len() != order.param_len() {
        return f64::INFINITY;
    }
    let css: f64 = residuals(params, z, order).iter().map(|e| e * e).sum();
    if css.is_finite() {
        css
    } else {
        f64::INFINITY
    }
}

/// True when `1 − Σ φ_i x^i` has all roots outside the unit circle, decided by
/// stepping the coefficients down to partial autocorrelations.
pub fn is_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&kappa) = a.last() {
        if !kappa.is_finite() || kappa.abs() >= 1.0 {
            return false;
        }
        let k = a.len();
        let denom = 1.0 - kappa * kappa;
        let reduced: Vec<f64> = (0..k - 1)
            .map(|j| (a[j] + kappa * a[k - 2 - j]) / denom)
            .collect();
        a = reduced;
    }
    true
}

/// Fits `order` to a gap-free training series by minimizing the CSS.
pub fn fit_sarima(train: &TimeSeries, order: SarimaOrder) -> Result<SarimaModel> {
    let x = train.dense()?;
    fit_values(&x, order)
}

pub(crate) fn fit_values(x: &[f64], order: SarimaOrder) -> Result<SarimaModel> {
    if order.s == 0 {
        return Err(ForecastError::InvalidConfig(
            "seasonal period must be positive".into(),
        ));
    }
    let lost = order.differencing_lag();
    let needed = order.min_differenced_len();
    if x.len() < lost + needed {
        return Err(ForecastError::insufficient(lost + needed, x.len()));
    }
    let z = difference(x, order.d, order.seasonal_d, order.s)?;
    let n_res = z.len();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64).sqrt();

    let k_coef = order.param_len() - 1;
    let estimate_mean = order.estimates_mean();
    let full = |free: &[f64]| -> Vec<f64> {
        let mut p = free[..k_coef].to_vec();
        p.push(if estimate_mean { free[k_coef] } else { 0.0 });
        p
    };
    let objective = |free: &[f64]| css_objective(&full(free), &z, &order);

    let mut start = vec![0.0; k_coef];
    let mut steps = vec![0.1; k_coef];
    if estimate_mean {
        start.push(mean);
        steps.push((0.1 * sd).max(1e-3));
    }
    let scale = objective(&start).max(1.0);
    let mut config = NelderMeadConfig {
        max_iter: 1000 + 300 * start.len(),
        xtol: 1e-7,
        ftol: 1e-10 * scale,
        initial_step: steps,
        bounds: None,
    };
    let mut best = nelder_mead(objective, &start, &config);
    // restart from the optimum until the simplex stops finding improvements
    for _ in 0..3 {
        config.initial_step = best
            .x
            .iter()
            .map(|v| if v.abs() > 1e-3 { 0.05 * v.abs() } else { 0.01 })
            .collect();
        let again = nelder_mead(objective, &best.x, &config);
        let improved = again.value < best.value - config.ftol;
        if again.value < best.value {
            best = again;
        }
        if !improved {
            break;
        }
    }
    if !best.value.is_finite() {
        return Err(ForecastError::NoModel);
    }

    let params = full(&best.x);
    let c = Coeffs::split(&params, &order);
    if !is_stationary(c.ar) || !is_stationary(c.sar) {
        return Err(ForecastError::Stationarity);
    }
    let css = best.value;
    let sigma2 = (css / n_res as f64).max(f64::MIN_POSITIVE);
    let aic = n_res as f64 * sigma2.ln() + 2.0 * (order.estimated_count() + 1) as f64;

    let e = residuals(&params, &z, &order);
    let tail = |v: &[f64], n: usize| v[v.len() - n..].to_vec();
    let centered: Vec<f64> = z.iter().map(|v| v - c.intercept).collect();
    let train_tail = TrainTail {
        levels: tail(x, lost),
        centered: tail(&centered, order.conditioning_lag()),
        residuals: tail(&e, order.ma_lag()),
    };

    Ok(SarimaModel {
        order,
        ar_coeffs: c.ar.to_vec(),
        ma_coeffs: c.ma.to_vec(),
        sar_coeffs: c.sar.to_vec(),
        sma_coeffs: c.sma.to_vec(),
        intercept: c.intercept,
        sigma2,
        css,
        aic,
        train_tail: Some(train_tail),
    })
}

impl SarimaModel {
    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.order.param_len());
        p.extend(&self.ar_coeffs);
        p.extend(&self.ma_coeffs);
        p.extend(&self.sar_coeffs);
        p.extend(&self.sma_coeffs);
        p.push(self.intercept);
        p
    }

    pub fn forecast(&self, horizon: usize) -> Result<Vec<f64>> {
        forecast_sarima(self, horizon)
    }
}

/// Multi-step forecast with future innovations set to zero, returned on the
/// original scale and clamped at 0.
pub fn forecast_sarima(model: &SarimaModel, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(ForecastError::InvalidHorizon(horizon));
    }
    let order = &model.order;
    let tail = model
        .train_tail
        .as_ref()
        .ok_or_else(|| ForecastError::State("model carries no training tail".into()))?;
    let (p_lag, q_lag) = (order.conditioning_lag(), order.ma_lag());
    if tail.centered.len() < p_lag
        || tail.residuals.len() < q_lag
        || tail.levels.len() < order.differencing_lag()
    {
        return Err(ForecastError::State(
            "training tail is shorter than the model lags".into(),
        ));
    }
    let params = model.params();
    let c = Coeffs::split(&params, order);
    let ar = ar_terms(&c, order.s);
    let ma = ma_terms(&c, order.s);

    let mut w = tail.centered[tail.centered.len() - p_lag..].to_vec();
    let mut e = tail.residuals[tail.residuals.len() - q_lag..].to_vec();
    let mut diffs = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (tw, te) = (w.len(), e.len());
        let mut v = 0.0;
        for &(k, a) in &ar {
            v += a * w[tw - k];
        }
        for &(k, m) in &ma {
            v += m * e[te - k];
        }
        w.push(v);
        e.push(0.0);
        diffs.push(v + c.intercept);
    }
    let levels = undifference(&diffs, &tail.levels, order.d, order.seasonal_d, order.s)?;
    Ok(levels.into_iter().map(|v| v.max(0.0)).collect())
}
