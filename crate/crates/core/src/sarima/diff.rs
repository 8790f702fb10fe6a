//! Regular and seasonal differencing and its inverse.

use crate::error::{ForecastError, Result};

/// Coefficients of `(1 − B)^d (1 − B^s)^D` as a dense vector indexed by lag,
/// with `coeffs[0] == 1`.
pub fn difference_polynomial(d: usize, seasonal_d: usize, s: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut multiply = |lag: usize| {
        let mut next = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + lag] -= c;
        }
        poly = next;
    };
    (0..d).for_each(|_| multiply(1));
    (0..seasonal_d).for_each(|_| multiply(s));
    poly
}

/// Lags of the single differences [`difference`] applies, in order.
fn stages(d: usize, seasonal_d: usize, s: usize) -> Vec<usize> {
    let mut lags = vec![s; seasonal_d];
    lags.extend(std::iter::repeat_n(1, d));
    lags
}

fn apply_lag(x: &[f64], lag: usize) -> Vec<f64> {
    x.windows(lag + 1).map(|w| w[lag] - w[0]).collect()
}

/// Applies `(1 − B)^d (1 − B^s)^D`. The output is `d + D·s` shorter than `x`.
pub fn difference(x: &[f64], d: usize, seasonal_d: usize, s: usize) -> Result<Vec<f64>> {
    let lost = d + seasonal_d * s;
    if x.len() <= lost {
        return Err(ForecastError::insufficient(lost + 1, x.len()));
    }
    Ok(stages(d, seasonal_d, s)
        .into_iter()
        .fold(x.to_vec(), |acc, lag| apply_lag(&acc, lag)))
}

/// Inverts [`difference`]: rebuilds the original-scale values that follow
/// `history` from their differenced values. Only the last `d + D·s` entries of
/// `history` are used.
///
/// The differences are undone one at a time, last first, each continuing the
/// matching intermediate series of `history`. Since those intermediates are
/// computed exactly as [`difference`] computes them, each step usually lands
/// back on the original value bit for bit and rounding error does not build up.
pub fn undifference(
    diffs: &[f64],
    history: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
) -> Result<Vec<f64>> {
    let lag_count = d + seasonal_d * s;
    if history.len() < lag_count {
        return Err(ForecastError::insufficient(lag_count, history.len()));
    }
    let lags = stages(d, seasonal_d, s);
    // levels[j] is the history after the first j differences
    let mut levels = vec![history[history.len() - lag_count..].to_vec()];
    for &lag in &lags {
        let next = apply_lag(levels.last().expect("non-empty"), lag);
        levels.push(next);
    }
    let mut out = diffs.to_vec();
    for (j, &lag) in lags.iter().enumerate().rev() {
        let prior = &levels[j];
        let mut buf = prior[prior.len() - lag..].to_vec();
        buf.reserve(out.len());
        for &w in &out {
            let v = buf[buf.len() - lag] + w;
            buf.push(v);
        }
        out = buf.split_off(lag);
    }
    Ok(out)
}
