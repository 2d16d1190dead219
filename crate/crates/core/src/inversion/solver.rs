//! Box-constrained least squares with an optional group-sparsity penalty.
//!
//! Both problems are `min 1/2 ||h - A x||^2 + lambda sum_d ||(x_d, x_{D+d})||_2`
//! over `0 <= x <= x_max`, solved by proximal gradient steps with
//! Barzilai-Borwein step lengths and a nonmonotone acceptance test.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use super::operators::NormalSystem;
use crate::error::{Error, Result};

/// Consecutive objective increases treated as divergence.
const DIVERGENCE_STEPS: usize = 10;
/// Objective values remembered by the acceptance test.
const MEMORY: usize = 5;
const SUFFICIENT_DECREASE: f64 = 1e-4;
const POWER_ITERATIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative size of the proximal-gradient step at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 5000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) || self.max_iterations == 0 {
            return Err(Error::invalid("solver tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `1/2 ||h - A x||^2 + lambda ||x||_{1,2}`.
    pub objective: f64,
}

/// Minimizer of `1/2 (z - v)^2 + lambda sqrt(c^2 + z^2)` over `[0, upper]`.
fn edge_minimizer(v: f64, c: f64, lambda: f64, upper: f64) -> f64 {
    let slope = |z: f64| z - v + lambda * z / (c * c + z * z).sqrt();
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    if slope(upper) <= 0.0 {
        return upper;
    }
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Proximal map of `lambda ||(a, b)||_2` restricted to `[0, ua] x [0, ub]`.
///
/// Inside the box this is group soft-thresholding of the nonnegative part;
/// when that overshoots a bound the minimizer lies on the corresponding edge.
pub fn group_prox(a: f64, b: f64, lambda: f64, ua: f64, ub: f64) -> (f64, f64) {
    let (a, b) = (a.max(0.0), b.max(0.0));
    let norm = a.hypot(b);
    let shrink = if norm > lambda { 1.0 - lambda / norm } else { 0.0 };
    let (za, zb) = (a * shrink, b * shrink);
    if za <= ua && zb <= ub {
        return (za, zb);
    }
    if lambda == 0.0 {
        return (za.min(ua), zb.min(ub));
    }
    let cost = |x: f64, y: f64| 0.5 * ((x - a).powi(2) + (y - b).powi(2)) + lambda * x.hypot(y);
    let on_a = (ua, edge_minimizer(b, ua, lambda, ub));
    let on_b = (edge_minimizer(a, ub, lambda, ua), ub);
    if cost(on_a.0, on_a.1) <= cost(on_b.0, on_b.1) {
        on_a
    } else {
        on_b
    }
}

fn prox_into(out: &mut [f64], v: &[f64], lambda: f64, upper: [f64; 2]) {
    let d = v.len() / 2;
    for m in 0..d {
        let (a, b) = group_prox(v[m], v[d + m], lambda, upper[0], upper[1]);
        out[m] = a;
        out[d + m] = b;
    }
}

/// `sum_d ||(x_d, x_{D+d})||_2`.
pub fn group_norm(x: &[f64]) -> f64 {
    let d = x.len() / 2;
    (0..d).map(|m| x[m].hypot(x[d + m])).sum()
}

/// Pixels whose two unknowns are both exactly zero.
pub fn zero_groups(x: &[f64]) -> usize {
    let d = x.len() / 2;
    (0..d).filter(|&m| x[m] == 0.0 && x[d + m] == 0.0).count()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Upper estimate of the largest eigenvalue of the Gram matrix.
fn lipschitz(sys: &NormalSystem) -> f64 {
    let n = sys.num_unknowns();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let s = norm(&v);
        if s == 0.0 || !s.is_finite() {
            break;
        }
        v.iter_mut().for_each(|x| *x /= s);
        let w = sys.apply(&v);
        estimate = norm(&w);
        v = w;
    }
    // the power iteration approaches the top eigenvalue from below
    1.1 * estimate
}

fn check_problem(sys: &NormalSystem, lambda: f64, upper: [f64; 2], warm: Option<&[f64]>) -> Result<()> {
    let n = sys.num_unknowns();
    if !n.is_multiple_of(2) || sys.gram.nrows() != n || sys.gram.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} Gram matrix for {n} unknowns",
            sys.gram.nrows(),
            sys.gram.ncols()
        )));
    }
    if !(upper[0] > 0.0 && upper[1] > 0.0 && upper.iter().all(|u| u.is_finite())) {
        return Err(Error::invalid(format!("upper bounds must be positive, got {upper:?}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("sparsity weight must be >= 0, got {lambda}")));
    }
    if warm.is_some_and(|w| w.len() != n) {
        return Err(Error::ShapeMismatch("warm start has the wrong length".into()));
    }
    Ok(())
}

/// Box-constrained least squares.
pub fn solve_ls_box(
    sys: &NormalSystem,
    upper: [f64; 2],
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<BoxSolution> {
    solve_cs_box(sys, 0.0, upper, opts, warm)
}

/// Box-constrained least squares with weight `lambda` on the group norm.
pub fn solve_cs_box(
    sys: &NormalSystem,
    lambda: f64,
    upper: [f64; 2],
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<BoxSolution> {
    check_problem(sys, lambda, upper, warm)?;
    opts.validate()?;
    let n = sys.num_unknowns();
    let objective = |x: &[f64], gx: &[f64]| 0.5 * dot(x, gx) - dot(x, &sys.rhs) + lambda * group_norm(x);

    let mut x = vec![0.0; n];
    if let Some(w) = warm {
        prox_into(&mut x, w, 0.0, upper);
    }
    let mut gx = sys.apply(&x);
    let mut f = objective(&x, &gx);
    let lip = lipschitz(sys);
    // a zero operator leaves only the penalty; any step length is exact
    let t_min = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let t_max = 1e10 * t_min;
    let mut t = t_min;
    let mut history = VecDeque::from([f]);
    let mut increases = 0;
    let mut trial = vec![0.0; n];
    let mut step = vec![0.0; n];

    for it in 0..opts.max_iterations {
        let grad: Vec<f64> = gx.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
        // stationarity: a fixed-length proximal step barely moves x
        for i in 0..n {
            step[i] = x[i] - t_min * grad[i];
        }
        prox_into(&mut trial, &step, t_min * lambda, upper);
        let moved = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if moved <= opts.tolerance * norm(&x).max(f64::MIN_POSITIVE) {
            return Ok(BoxSolution {
                x,
                iterations: it,
                converged: true,
                objective: f + 0.5 * sys.data_norm_sq,
            });
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (z, gz, fz) = loop {
            for i in 0..n {
                step[i] = x[i] - t * grad[i];
            }
            let mut z = vec![0.0; n];
            prox_into(&mut z, &step, t * lambda, upper);
            let gz = sys.apply(&z);
            let fz = objective(&z, &gz);
            if !fz.is_finite() {
                return Err(Error::numeric(format!("non-finite objective at iteration {it}"), None));
            }
            let dist_sq: f64 = z.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            if t <= t_min || fz <= reference - SUFFICIENT_DECREASE / (2.0 * t) * dist_sq {
                break (z, gz, fz);
            }
            t = (0.5 * t).max(t_min);
        };
        increases = if fz > f { increases + 1 } else { 0 };
        if increases >= DIVERGENCE_STEPS {
            return Err(Error::numeric(
                format!("objective increased over {DIVERGENCE_STEPS} consecutive steps"),
                None,
            ));
        }
        let s: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gz.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let (ss, sy) = (dot(&s, &s), dot(&s, &y));
        t = if sy > 0.0 { (ss / sy).clamp(t_min, t_max) } else { t_max };
        x = z;
        gx = gz;
        f = fz;
        history.push_back(f);
        if history.len() > MEMORY {
            history.pop_front();
        }
    }
    Ok(BoxSolution {
        x,
        iterations: opts.max_iterations,
        converged: false,
        objective: f + 0.5 * sys.data_norm_sq,
    })
}
