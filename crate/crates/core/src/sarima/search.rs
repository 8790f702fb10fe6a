//! Stepwise AIC search over SARIMA orders.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{difference, fit_values, SarimaModel, SarimaOrder, SEASONAL_PERIOD};
use crate::error::{ForecastError, Result};
use crate::series::TimeSeries;

/// A differencing step is taken only when it shrinks the variance below this
/// fraction of the variance before the step.
pub const VARIANCE_REDUCTION: f64 = 0.5;

/// Inclusive `(min, max)` ranges for each order component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderBounds {
    pub p: (usize, usize),
    pub d: (usize, usize),
    pub q: (usize, usize),
    pub seasonal_p: (usize, usize),
    pub seasonal_d: (usize, usize),
    pub seasonal_q: (usize, usize),
}

impl Default for OrderBounds {
    /// The widest admissible ranges.
    fn default() -> Self {
        Self::LIMITS
    }
}

impl OrderBounds {
    pub const LIMITS: OrderBounds = OrderBounds {
        p: (0, 6),
        d: (0, 2),
        q: (0, 5),
        seasonal_p: (0, 3),
        seasonal_d: (0, 1),
        seasonal_q: (0, 2),
    };

    /// Bounds admitting exactly one order.
    pub fn single(order: SarimaOrder) -> Self {
        Self {
            p: (order.p, order.p),
            d: (order.d, order.d),
            q: (order.q, order.q),
            seasonal_p: (order.seasonal_p, order.seasonal_p),
            seasonal_d: (order.seasonal_d, order.seasonal_d),
            seasonal_q: (order.seasonal_q, order.seasonal_q),
        }
    }

    /// The order these bounds pin down, if they admit only one.
    pub fn single_order(&self) -> Option<SarimaOrder> {
        let fixed = |(lo, hi): (usize, usize)| (lo == hi).then_some(lo);
        Some(SarimaOrder::new(
            (fixed(self.p)?, fixed(self.d)?, fixed(self.q)?),
            (
                fixed(self.seasonal_p)?,
                fixed(self.seasonal_d)?,
                fixed(self.seasonal_q)?,
            ),
        ))
    }

    fn ranges(&self) -> [(&'static str, (usize, usize), (usize, usize)); 6] {
        let l = Self::LIMITS;
        [
            ("p", self.p, l.p),
            ("d", self.d, l.d),
            ("q", self.q, l.q),
            ("P", self.seasonal_p, l.seasonal_p),
            ("D", self.seasonal_d, l.seasonal_d),
            ("Q", self.seasonal_q, l.seasonal_q),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi), (_, limit)) in self.ranges() {
            if lo > hi || hi > limit {
                return Err(ForecastError::InvalidConfig(format!(
                    "{name} range {lo}..={hi} must be ordered and within 0..={limit}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, o: &SarimaOrder) -> bool {
        let within = |v: usize, (lo, hi): (usize, usize)| (lo..=hi).contains(&v);
        within(o.p, self.p)
            && within(o.d, self.d)
            && within(o.q, self.q)
            && within(o.seasonal_p, self.seasonal_p)
            && within(o.seasonal_d, self.seasonal_d)
            && within(o.seasonal_q, self.seasonal_q)
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: SarimaModel,
    /// Every successfully fitted order with its AIC, in order of evaluation.
    pub evaluated: Vec<(SarimaOrder, f64)>,
    /// Orders whose fit failed (too short, non-stationary, ...).
    pub failed: usize,
    pub elapsed_seconds: f64,
}

fn variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64
}

/// Picks `(d, D)` within bounds: starting from the lower bounds, each extra
/// regular then seasonal difference is taken while it cuts the variance of the
/// series below [`VARIANCE_REDUCTION`] times its current value.
pub fn initial_differencing(x: &[f64], bounds: &OrderBounds) -> (usize, usize) {
    let s = SEASONAL_PERIOD;
    let (mut d, mut sd) = (bounds.d.0, bounds.seasonal_d.0);
    let var_at = |d: usize, sd: usize| {
        difference(x, d, sd, s)
            .ok()
            .filter(|z| z.len() >= 2)
            .map(|z| variance(&z))
    };
    let Some(mut current) = var_at(d, sd) else {
        return (d, sd);
    };
    while d < bounds.d.1 {
        match var_at(d + 1, sd) {
            Some(v) if v < VARIANCE_REDUCTION * current => {
                d += 1;
                current = v;
            }
            _ => break,
        }
    }
    while sd < bounds.seasonal_d.1 {
        match var_at(d, sd + 1) {
            Some(v) if v < VARIANCE_REDUCTION * current => {
                sd += 1;
                current = v;
            }
            _ => break,
        }
    }
    (d, sd)
}

/// Ranking key: AIC, then parameter count, then `(p, q, P, Q)`.
fn rank_key(order: &SarimaOrder, aic: f64) -> (f64, usize, [usize; 4]) {
    (
        aic,
        order.estimated_count(),
        [order.p, order.q, order.seasonal_p, order.seasonal_q],
    )
}

fn better(a: &(SarimaOrder, f64), b: &(SarimaOrder, f64)) -> bool {
    let (ka, kb) = (rank_key(&a.0, a.1), rank_key(&b.0, b.1));
    match ka.0.total_cmp(&kb.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => (ka.1, ka.2) < (kb.1, kb.2),
    }
}

/// Stepwise neighbourhood search: starts at `(1,d*,1)(1,D*,1)` clipped to the
/// bounds, repeatedly moves to the best ±1 neighbour in `p`, `q`, `P` or `Q`
/// that lowers the AIC and stops at a local optimum. Neighbours are fitted in
/// parallel; the outcome does not depend on scheduling.
pub fn grid_search(train: &TimeSeries, bounds: &OrderBounds) -> Result<GridSearchResult> {
    bounds.validate()?;
    let started = Instant::now();
    let x = train.dense()?;
    let (d, sd) = initial_differencing(&x, bounds);
    let clip = |v: usize, (lo, hi): (usize, usize)| v.clamp(lo, hi);
    let start = SarimaOrder::new(
        (clip(1, bounds.p), d, clip(1, bounds.q)),
        (clip(1, bounds.seasonal_p), sd, clip(1, bounds.seasonal_q)),
    );

    let mut fits: BTreeMap<SarimaOrder, Option<SarimaModel>> = BTreeMap::new();
    let mut evaluated = Vec::new();
    let mut fit_batch =
        |orders: Vec<SarimaOrder>, fits: &mut BTreeMap<SarimaOrder, Option<SarimaModel>>| {
            let fresh: Vec<SarimaOrder> = orders
                .into_iter()
                .filter(|o| !fits.contains_key(o))
                .collect();
            let results: Vec<Option<SarimaModel>> =
                fresh.par_iter().map(|o| fit_values(&x, *o).ok()).collect();
            for (o, m) in fresh.into_iter().zip(results) {
                if let Some(model) = &m {
                    evaluated.push((o, model.aic));
                }
                fits.insert(o, m);
            }
        };

    fit_batch(vec![start], &mut fits);
    let mut current: Option<(SarimaOrder, f64)> = fits[&start].as_ref().map(|m| (start, m.aic));

    // If the start order cannot be fitted, fall back to its neighbours and the
    // plain (0,d,0)(0,D,0) model before giving up.
    if current.is_none() {
        let mut seeds = neighbours(&start, bounds);
        let plain = SarimaOrder::new(
            (bounds.p.0, d, bounds.q.0),
            (bounds.seasonal_p.0, sd, bounds.seasonal_q.0),
        );
        seeds.push(plain);
        fit_batch(seeds.clone(), &mut fits);
        current = best_of(
            seeds
                .iter()
                .filter_map(|o| fits.get(o).and_then(|m| m.as_ref()).map(|m| (*o, m.aic))),
        );
    }
    let Some(mut current) = current else {
        return Err(ForecastError::NoModel);
    };

    loop {
        let around = neighbours(&current.0, bounds);
        fit_batch(around.clone(), &mut fits);
        let candidate = best_of(
            around
                .iter()
                .filter_map(|o| fits.get(o).and_then(|m| m.as_ref()).map(|m| (*o, m.aic))),
        );
        match candidate {
            Some(c) if better(&c, &current) => current = c,
            _ => break,
        }
    }

    let failed = fits.values().filter(|m| m.is_none()).count();
    let best = fits
        .remove(&current.0)
        .flatten()
        .ok_or(ForecastError::NoModel)?;
    Ok(GridSearchResult {
        best,
        evaluated,
        failed,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

fn best_of(items: impl Iterator<Item = (SarimaOrder, f64)>) -> Option<(SarimaOrder, f64)> {
    items.fold(None, |acc, item| match acc {
        Some(a) if !better(&item, &a) => Some(a),
        _ => Some(item),
    })
}

fn neighbours(o: &SarimaOrder, bounds: &OrderBounds) -> Vec<SarimaOrder> {
    let mut out = Vec::new();
    for delta in [-1i64, 1] {
        let shift = |v: usize| v.checked_add_signed(delta as isize);
        let variants = [
            shift(o.p).map(|p| SarimaOrder { p, ..*o }),
            shift(o.q).map(|q| SarimaOrder { q, ..*o }),
            shift(o.seasonal_p).map(|seasonal_p| SarimaOrder { seasonal_p, ..*o }),
            shift(o.seasonal_q).map(|seasonal_q| SarimaOrder { seasonal_q, ..*o }),
        ];
        out.extend(
            variants
                .into_iter()
                .flatten()
                .filter(|n| bounds.contains(n)),
        );
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        let mut out: Vec<f64> = (0..n + 100)
            .map(|_| {
                x = phi * x + noise.sample(&mut rng);
                x
            })
            .collect();
        out.drain(..100);
        out
    }

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::from_values("x", 0, v).unwrap()
    }

    #[test]
    fn single_order_round_trips() {
        let o = SarimaOrder::new((2, 1, 0), (1, 0, 1));
        assert_eq!(OrderBounds::single(o).single_order(), Some(o));
        assert_eq!(OrderBounds::LIMITS.single_order(), None);
    }

    #[test]
    fn table_limits_are_the_default() {
        let b = OrderBounds::default();
        assert_eq!(b.p, (0, 6));
        assert_eq!(b.d, (0, 2));
        assert_eq!(b.q, (0, 5));
        assert_eq!(b.seasonal_p, (0, 3));
        assert_eq!(b.seasonal_d, (0, 1));
        assert_eq!(b.seasonal_q, (0, 2));
        assert!(b.validate().is_ok());
        let wide = OrderBounds { p: (0, 7), ..b };
        assert!(wide.validate().is_err());
    }

    #[test]
    fn ar1_data_selects_undifferenced_autoregression() {
        let x = ar1(500, 0.7, 17);
        let r = grid_search(&ts(&x), &OrderBounds::default()).unwrap();
        assert_eq!(r.best.order.d, 0, "{}", r.best.order);
        assert!(r.best.order.p >= 1, "{}", r.best.order);
    }

    #[test]
    fn trending_data_is_differenced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..200)
            .map(|t| 5.0 + 0.5 * t as f64 + noise.sample(&mut rng))
            .collect();
        let (d, _) = initial_differencing(&x, &OrderBounds::default());
        assert!(d >= 1);
        let r = grid_search(&ts(&x), &OrderBounds::default()).unwrap();
        assert!(r.best.order.d >= 1);
    }

    #[test]
    fn collapsed_bounds_fit_one_order() {
        let x = ar1(300, 0.5, 2);
        let order = SarimaOrder::arima(2, 0, 1);
        let r = grid_search(&ts(&x), &OrderBounds::single(order)).unwrap();
        assert_eq!(r.evaluated.len(), 1);
        assert_eq!(r.best.order, order);
    }

    #[test]
    fn best_aic_is_minimal_among_evaluated() {
        let x = ar1(400, 0.6, 8);
        let r = grid_search(&ts(&x), &OrderBounds::default()).unwrap();
        assert!(r.evaluated.len() > 1);
        assert!(r.evaluated.iter().all(|(_, aic)| r.best.aic <= *aic));
    }

    #[test]
    fn unfittable_bounds_report_no_model() {
        let x = ar1(40, 0.5, 1);
        let order = SarimaOrder::new((0, 0, 0), (3, 1, 2));
        assert!(matches!(
            grid_search(&ts(&x), &OrderBounds::single(order)),
            Err(ForecastError::NoModel)
        ));
    }

    #[test]
    fn tie_break_prefers_fewer_parameters() {
        let small = (SarimaOrder::arima(1, 0, 0), 10.0);
        let large = (SarimaOrder::arima(1, 0, 1), 10.0);
        assert!(better(&small, &large));
        assert!(!better(&large, &small));
        let a = (SarimaOrder::arima(1, 0, 0), 10.0);
        let b = (SarimaOrder::arima(0, 0, 1), 10.0);
        assert!(better(&b, &a));
    }
}
