//! Nelder–Mead simplex minimization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("starting point is empty")]
    EmptyStart,
    #[error("step vector has length {steps}, expected {dim}")]
    DimensionMismatch { dim: usize, steps: usize },
    #[error("iteration budget must be at least 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    /// Objective value substituted for non-finite evaluations.
    pub penalty: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            diameter_tol: 1e-10,
            penalty: 1.0,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    /// Best-so-far objective after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective evaluations spent in each iteration.
    pub evaluations_per_iteration: Vec<usize>,
    /// Whether the simplex collapsed below `diameter_tol`.
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    penalty: f64,
    count: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            self.penalty
        }
    }
}

/// Axis-aligned starting simplex `x0, x0 + s_i e_i`.
pub fn initial_simplex(x0: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    simplex
}

fn diameter(simplex: &[Vec<f64>], best: usize) -> f64 {
    simplex
        .iter()
        .map(|v| {
            v.iter()
                .zip(&simplex[best])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b − a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` from the simplex built on `x0` with per-coordinate `steps`.
///
/// Each iteration performs one reflection followed by at most one expansion or
/// contraction, or a shrink, so it costs at most `n + 2` evaluations.
/// Non-finite objective values are replaced by `opts.penalty`.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadResult, OptimizeError>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(OptimizeError::EmptyStart);
    }
    if steps.len() != n {
        return Err(OptimizeError::DimensionMismatch { dim: n, steps: steps.len() });
    }
    if opts.max_iterations == 0 {
        return Err(OptimizeError::ZeroBudget);
    }

    let mut obj = Counted { f, penalty: opts.penalty, count: 0 };
    let mut simplex = initial_simplex(x0, steps);
    let mut values: Vec<f64> = simplex.iter().map(|v| obj.eval(v)).collect();

    let mut trace = Vec::with_capacity(opts.max_iterations);
    let mut per_iter = Vec::with_capacity(opts.max_iterations);
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();

    for _ in 0..opts.max_iterations {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, second_worst, worst) = (order[0], order[n - 1], order[n]);
        if diameter(&simplex, best) < opts.diameter_tol {
            converged = true;
            break;
        }
        let before = obj.count;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }

        let xr = affine(&centroid, &simplex[worst], -opts.reflection);
        let fr = obj.eval(&xr);

        if fr < values[best] {
            let xe = affine(&centroid, &simplex[worst], -opts.reflection * opts.expansion);
            let fe = obj.eval(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            let (xc, fc, accept) = if fr < values[worst] {
                let xc = affine(&centroid, &xr, opts.contraction);
                let fc = obj.eval(&xc);
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = affine(&centroid, &simplex[worst], opts.contraction);
                let fc = obj.eval(&xc);
                let ok = fc < values[worst];
                (xc, fc, ok)
            };
            if accept {
                simplex[worst] = xc;
                values[worst] = fc;
            } else {
                let anchor = simplex[best].clone();
                for &i in &order[1..] {
                    simplex[i] = affine(&anchor, &simplex[i], opts.shrink);
                    values[i] = obj.eval(&simplex[i]);
                }
            }
        }

        per_iter.push(obj.count - before);
        let current = values.iter().copied().fold(f64::INFINITY, f64::min);
        let best_so_far = trace.last().map_or(current, |&b: &f64| b.min(current));
        trace.push(best_so_far);
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    Ok(NelderMeadResult {
        x_best: simplex[best].clone(),
        f_best: values[best],
        iterations: trace.len(),
        trace,
        evaluations: obj.count,
        evaluations_per_iteration: per_iter,
        converged,
    })
}
