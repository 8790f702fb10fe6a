//! Derivative-free minimization with the Nelder-Mead simplex method.
//!
//! Optional box bounds are enforced by projecting every trial point onto the
//! box before it is evaluated.

/// Stopping and shape parameters for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    /// Converged when every vertex lies within `xtol` (max-norm) of the best one...
    pub xtol: f64,
    /// ...and every vertex value lies within `ftol` of the best value.
    pub ftol: f64,
    /// Per-coordinate offset used to build the initial simplex. Falls back to
    /// 5% of the coordinate (or 0.1 for zeros) when empty.
    pub initial_step: Vec<f64>,
    /// Inclusive box constraints per coordinate.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            xtol: 1e-6,
            ftol: 1e-6,
            initial_step: Vec::new(),
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. Non-finite objective values are treated as +inf, so
/// the returned value is never worse than `f(x0)` (after projection).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], config: &NelderMeadConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        if let Some(bounds) = &config.bounds {
            for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
                *v = v.clamp(lo, hi);
            }
        }
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start);
    if n == 0 {
        let value = eval(&start);
        return Minimum {
            x: start,
            value,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        let step = config
            .initial_step
            .get(i)
            .copied()
            .unwrap_or(if v[i] != 0.0 { 0.05 * v[i] } else { 0.1 });
        v[i] += step;
        project(&mut v);
        if v[i] == start[i] {
            // pinned against a bound: step the other way
            v[i] = start[i] - step;
            project(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < config.max_iter {
        // stable sort keeps ties in insertion order, so runs are reproducible
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);

        let f_spread = simplex_f_spread(&values, best);
        let x_spread = simplex_x_spread(&simplex, best);
        if f_spread <= config.ftol && x_spread <= config.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            project(&mut p);
            p
        };

        let reflected = along(REFLECT);
        let f_r = eval(&reflected);
        if f_r < values[best] {
            let expanded = along(EXPAND);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
            continue;
        }
        if f_r < values[second] {
            simplex[worst] = reflected;
            values[worst] = f_r;
            continue;
        }
        let (trial, f_c) = if f_r < values[worst] {
            let c = along(REFLECT * CONTRACT);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-CONTRACT);
            let fc = eval(&c);
            (c, fc)
        };
        if f_c < values[worst].min(f_r) {
            simplex[worst] = trial;
            values[worst] = f_c;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in order.iter().skip(1) {
            let mut p: Vec<f64> = anchor
                .iter()
                .zip(&simplex[i])
                .map(|(a, x)| a + SHRINK * (x - a))
                .collect();
            project(&mut p);
            values[i] = eval(&p);
            simplex[i] = p;
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}

fn simplex_f_spread(values: &[f64], best: usize) -> f64 {
    values
        .iter()
        .map(|v| (v - values[best]).abs())
        .fold(0.0, f64::max)
}

fn simplex_x_spread(simplex: &[Vec<f64>], best: usize) -> f64 {
    simplex
        .iter()
        .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}
