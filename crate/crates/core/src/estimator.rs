//! Sample estimator of the hypercontractivity coefficient.
//!
//! The optimization variable is the vector of likelihood ratios
//! `w_i = r_x(X_i) / p_x(X_i)`, constrained to `(1/n) Σ w_i = 1` and
//! `W_MIN ≤ w_i ≤ W_MAX`. For a ratio matrix `A` the two divergences are
//!
//! ```text
//! D̂_x = (1/n) Σ_i w_i ln w_i
//! D̂_y = (1/n) Σ_j v_j ln v_j,    v_j = (1/n) Σ_i a[j][i] w_i
//! ```
//!
//! and the maximized objective is `ln D̂_y − ln D̂_x`. Each restart starts at
//! `w_i = 1 + N(0, σ²)` and runs a spectral gradient ascent in log
//! coordinates: with `u = ln w`, each iteration moves to
//! `w ⊙ exp(t n ∇_u f)`, rescales to mean one and projects onto the box.
//! Optima put many weights near `W_MIN`, where the curvature of `w ln w` is
//! `1/w`; in `w` itself that forces tiny steps, while in `u` it does not.
//! The step `t` starts from a Barzilai–Borwein length (the first one is
//! [`OptimizerConfig::step_size`]) and is halved until the objective beats
//! the lowest of the last few accepted values by an Armijo margin. The best
//! iterate seen is returned.
//!
//! Before optimizing, [`estimate_from_matrix`] rescales `A` (Sinkhorn
//! balancing) so that every row and column averages to one. Then
//! `(1/n) Σ_j v_j = 1` for every feasible `w`, so `D̂_y ≥ 0`, `D̂_y = 0` at
//! `w = 1`, and `D̂_y ≤ D̂_x` by the data-processing inequality for the
//! doubly stochastic channel `A / n`. Without balancing a small mismatch in
//! the column means of a KDE matrix leaks a first-order term into `D̂_y`,
//! and the ratio blows up near `w = 1`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{estimate_ratio_matrix, KdeConfig};
use crate::rng::{derive_seed, rng_from_seed};
use crate::types::{xlogx, EstimateResult, PairedSamples, RatioMatrix, WeightVector, W_MAX, W_MIN};
use crate::{Error, Result};

/// Floor applied to `v_j` before taking logs.
pub const V_FLOOR: f64 = 1e-12;

/// Consecutive small-improvement iterations that count as convergence.
const STALL_ITERS: usize = 5;
/// Sufficient-increase constant of the backtracking line search.
const ARMIJO: f64 = 1e-4;
/// Accepted objective values the nonmonotone line search compares against.
const MEMORY: usize = 10;
const SPECTRAL_MIN: f64 = 1e-10;
const SPECTRAL_MAX: f64 = 1e10;
/// Largest change of a single log-weight in one step.
const MAX_LOG_STEP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// First step length along `n · ∇_u f`; later steps are spectral.
    pub step_size: f64,
    /// Variance of the initial perturbation `w_i = 1 + N(0, σ²)`.
    pub init_noise_sigma2: f64,
    /// Relative objective improvement below which an iteration counts as stalled.
    pub tol: f64,
    pub seed: u64,
    /// Points with `D̂_x` below this are infeasible.
    pub d_x_floor: f64,
    /// Sinkhorn-balance the ratio matrix before optimizing.
    pub balance: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 500,
            step_size: 0.1,
            init_noise_sigma2: 0.01,
            tol: 1e-6,
            seed: 0,
            d_x_floor: 1e-4,
            balance: true,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidInput("restarts and max_iters must be at least 1".into()));
        }
        if !(self.step_size > 0.0) || !(self.init_noise_sigma2 >= 0.0) || !(self.d_x_floor >= 0.0) {
            return Err(Error::InvalidInput(
                "step_size must be positive; init_noise_sigma2 and d_x_floor nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Objective value with the intermediate quantities the gradient reuses.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub v: Vec<f64>,
}

/// Dot product with eight independent accumulators; the summation order is
/// fixed, so results are reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `v = A w / n`, floored at [`V_FLOOR`].
fn output_ratios(w: &[f64], a: &RatioMatrix) -> Vec<f64> {
    let nf = a.n() as f64;
    (0..a.n()).map(|j| (dot(a.row(j), w) / nf).max(V_FLOOR)).collect()
}

/// `Aᵀ u`.
fn transpose_apply(a: &RatioMatrix, u: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; a.n()];
    for (j, &uj) in u.iter().enumerate() {
        for (s, &aji) in acc.iter_mut().zip(a.row(j)) {
            *s += uj * aji;
        }
    }
    acc
}

/// Evaluates `ln D̂_y − ln D̂_x` with an explicit feasibility floor on `D̂_x`.
pub fn evaluate(w: &WeightVector, a: &RatioMatrix, d_x_floor: f64) -> Result<Evaluation> {
    if w.len() != a.n() {
        return Err(Error::InvalidInput(format!(
            "weight length {} does not match matrix size {}",
            w.len(),
            a.n()
        )));
    }
    let nf = a.n() as f64;
    let d_x = w.iter().map(|&v| xlogx(v)).sum::<f64>() / nf;
    if !(d_x >= d_x_floor) || d_x <= 0.0 {
        return Err(Error::InfeasiblePoint { d_x, d_y: f64::NAN });
    }
    let v = output_ratios(w.as_slice(), a);
    let d_y = v.iter().map(|&x| xlogx(x)).sum::<f64>() / nf;
    if !(d_y > 0.0) {
        return Err(Error::InfeasiblePoint { d_x, d_y });
    }
    Ok(Evaluation {
        value: d_y.ln() - d_x.ln(),
        d_x,
        d_y,
        v,
    })
}

/// `ln D̂_y − ln D̂_x` at `w`, with the default feasibility floor
/// `D̂_x ≥ 1e-4`. `exp` of the result is a candidate value of `ŝ`.
pub fn objective(w: &WeightVector, a: &RatioMatrix) -> Result<f64> {
    evaluate(w, a, OptimizerConfig::default().d_x_floor).map(|e| e.value)
}

fn gradient_from(e: &Evaluation, w: &[f64], a: &RatioMatrix) -> Vec<f64> {
    let nf = a.n() as f64;
    let u: Vec<f64> = e.v.iter().map(|&v| v.ln() + 1.0).collect();
    let atu = transpose_apply(a, &u);
    atu.iter()
        .zip(w)
        .map(|(&s, &wi)| s / (nf * nf * e.d_y) - (wi.ln() + 1.0) / (nf * e.d_x))
        .collect()
}

/// Euclidean gradient of [`objective`] with respect to `w`:
///
/// `∂f/∂w_i = [Σ_j a[j][i] (ln v_j + 1) / n²] / D̂_y − [(ln w_i + 1) / n] / D̂_x`.
pub fn gradient(w: &WeightVector, a: &RatioMatrix) -> Result<Vec<f64>> {
    let e = evaluate(w, a, OptimizerConfig::default().d_x_floor)?;
    Ok(gradient_from(&e, w.as_slice(), a))
}

/// Euclidean projection onto `{w : W_MIN ≤ w_i ≤ W_MAX, (1/n) Σ w_i = 1}`.
///
/// The solution is `w_i = clamp(z_i − τ)` for the unique shift `τ` at which
/// the clamped values average to one; `τ` is located by sweeping the sorted
/// breakpoints of that piecewise-linear sum, then polished.
pub fn project(z: &[f64]) -> WeightVector {
    project_box(z, W_MIN, W_MAX)
}

pub(crate) fn project_box(z: &[f64], lo: f64, hi: f64) -> WeightVector {
    let n = z.len();
    assert!(n > 0, "cannot project an empty vector");
    assert!(z.iter().all(|v| v.is_finite()), "projection input must be finite");
    let target = n as f64;
    let clamped_sum = |tau: f64| -> (f64, usize) {
        let mut s = 0.0;
        let mut free = 0;
        for &v in z {
            let c = v - tau;
            if c <= lo {
                s += lo;
            } else if c >= hi {
                s += hi;
            } else {
                s += c;
                free += 1;
            }
        }
        (s, free)
    };

    // Events: coordinate i is free for τ in [z_i − hi, z_i − lo].
    let mut events: Vec<(f64, i8)> = Vec::with_capacity(2 * n);
    for &v in z {
        events.push((v - hi, -1));
        events.push((v - lo, 1));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut tau = events[0].0;
    let mut g = hi * target;
    let mut slope = 0.0f64;
    for &(b, kind) in &events {
        let g_next = g + slope * (b - tau);
        if g_next <= target && slope < 0.0 {
            tau += (g - target) / (-slope);
            break;
        }
        g = g_next;
        tau = b;
        slope += f64::from(kind);
    }

    // Polish against accumulated rounding in the sweep.
    for _ in 0..3 {
        let (s, free) = clamped_sum(tau);
        if free == 0 || s == target {
            break;
        }
        tau += (s - target) / free as f64;
    }
    WeightVector::from_vec_unchecked(z.iter().map(|&v| (v - tau).clamp(lo, hi)).collect())
}

/// Sinkhorn balancing: returns `diag(r) A diag(c)` with every row and column
/// averaging to one (to `1e-12`, or after 10 000 sweeps).
pub fn balance(a: &RatioMatrix) -> RatioMatrix {
    let n = a.n();
    let nf = n as f64;
    let mut r = vec![1.0; n];
    let mut c = vec![1.0; n];
    for _ in 0..10_000 {
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = nf / dot(a.row(j), &c);
        }
        let colsum = transpose_apply(a, &r);
        let mut worst = 0.0f64;
        for (ci, s) in c.iter_mut().zip(&colsum) {
            let m = *ci * s / nf;
            worst = worst.max((m - 1.0).abs());
            *ci = nf / s;
        }
        if worst < 1e-12 {
            break;
        }
    }
    let mut out = a.clone();
    for (j, row) in out.as_mut_slice().chunks_mut(n).enumerate() {
        for (v, &ci) in row.iter_mut().zip(&c) {
            *v *= r[j] * ci;
        }
    }
    out
}

/// The matrix the optimizer actually works on for `a` under `opt`.
pub fn prepare_matrix(a: &RatioMatrix, opt: &OptimizerConfig) -> RatioMatrix {
    if opt.balance {
        balance(a)
    } else {
        a.clone()
    }
}

/// Seed of restart `r`; independent of the total number of restarts.
pub fn restart_seed(opt: &OptimizerConfig, r: usize) -> u64 {
    derive_seed(opt.seed, r as u64)
}

/// Projected starting point of restart `r`.
pub fn initial_weights(n: usize, opt: &OptimizerConfig, r: usize) -> WeightVector {
    let mut rng = rng_from_seed(restart_seed(opt, r));
    let sd = opt.init_noise_sigma2.sqrt();
    let raw: Vec<f64> = match Normal::new(1.0, sd) {
        Ok(dist) => (0..n).map(|_| dist.sample(&mut rng)).collect(),
        Err(_) => vec![1.0; n],
    };
    project(&raw)
}

/// Norm of the projected-gradient map, `‖P(w + t d) − w‖ / t` with
/// `d = n · ∇f` and `t = 1e-3`, measured as an RMS over coordinates.
///
/// Zero exactly at first-order stationary points of the constrained problem.
pub fn projected_gradient_residual(w: &WeightVector, a: &RatioMatrix, d_x_floor: f64) -> Result<f64> {
    let e = evaluate(w, a, d_x_floor)?;
    let nf = a.n() as f64;
    let g = gradient_from(&e, w.as_slice(), a);
    let t = 1e-3;
    let moved: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi + t * nf * gi).collect();
    let p = project(&moved);
    let ss: f64 = p.iter().zip(w.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / nf).sqrt() / t)
}

/// RMS of the ascent direction `n ∇_u f` in log coordinates, with
/// components that push a weight out through `W_MIN` or `W_MAX` dropped.
///
/// This is the stationarity measure of the optimizer's own geometry. Near
/// `W_MIN` it differs from [`projected_gradient_residual`] by the factor
/// `w_i` per coordinate.
pub fn log_gradient_residual(w: &WeightVector, a: &RatioMatrix, d_x_floor: f64) -> Result<f64> {
    let e = evaluate(w, a, d_x_floor)?;
    let d = log_gradient(&e, w.as_slice(), a);
    let ss: f64 = w
        .iter()
        .zip(&d)
        .filter(|&(&wi, &di)| !((wi <= W_MIN * (1.0 + 1e-9) && di < 0.0) || (wi >= W_MAX && di > 0.0)))
        .map(|(_, di)| di * di)
        .sum();
    Ok((ss / a.n() as f64).sqrt())
}

#[derive(Debug, Clone)]
struct RestartOutcome {
    objective: f64,
    weights: Vec<f64>,
    converged: bool,
}

/// Gradient with respect to `u = ln w` of `f(w / mean(w))`, scaled by `n`:
/// `n w_i (∂f/∂w_i − (1/n) Σ_k w_k ∂f/∂w_k)`.
fn log_gradient(e: &Evaluation, w: &[f64], a: &RatioMatrix) -> Vec<f64> {
    let nf = w.len() as f64;
    let g = gradient_from(e, w, a);
    let mean = dot(w, &g) / nf;
    w.iter().zip(&g).map(|(wi, gi)| nf * wi * (gi - mean)).collect()
}

/// `w ⊙ exp(t d)`, rescaled to mean one and projected onto the box.
fn multiplicative_step(w: &[f64], d: &[f64], t: f64) -> WeightVector {
    let moved: Vec<f64> = w
        .iter()
        .zip(d)
        .map(|(wi, di)| wi * (t * di).clamp(-MAX_LOG_STEP, MAX_LOG_STEP).exp())
        .collect();
    let mean = moved.iter().sum::<f64>() / moved.len() as f64;
    project(&moved.iter().map(|v| v / mean).collect::<Vec<_>>())
}

fn run_restart(a: &RatioMatrix, opt: &OptimizerConfig, r: usize) -> Option<RestartOutcome> {
    let n = a.n();
    let nf = n as f64;
    let mut w = initial_weights(n, opt, r);
    let mut cur = evaluate(&w, a, opt.d_x_floor).ok()?;
    let mut g = log_gradient(&cur, w.as_slice(), a);
    let mut spectral = opt.step_size;
    let mut stalled = 0;
    let mut converged = false;
    let mut recent = std::collections::VecDeque::from([cur.value]);
    let mut best = (cur.value, w.as_slice().to_vec());

    for _ in 0..opt.max_iters {
        let slope = dot(&g, &g) / nf;
        if !(slope > 0.0) {
            converged = true;
            break;
        }
        let reference = recent.iter().copied().fold(f64::INFINITY, f64::min);
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1e-12 {
            let t = lambda * spectral;
            let cand = multiplicative_step(w.as_slice(), &g, t);
            if let Ok(e) = evaluate(&cand, a, opt.d_x_floor) {
                if e.value >= reference + ARMIJO * t * slope {
                    accepted = Some((cand, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((next_w, next)) = accepted else {
            converged = true;
            break;
        };
        let next_g = log_gradient(&next, next_w.as_slice(), a);
        // Spectral step from the secant pair in log coordinates; ascent, so
        // the curvature is −sᵀΔg.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let si = next_w[i].ln() - w[i].ln();
            ss += si * si;
            sy -= si * (next_g[i] - g[i]);
        }
        spectral = if sy > 0.0 {
            (ss / sy).clamp(SPECTRAL_MIN, SPECTRAL_MAX)
        } else {
            SPECTRAL_MAX
        };
        let change = (next.value - cur.value).abs() / cur.value.abs().max(1.0);
        w = next_w;
        cur = next;
        g = next_g;
        if cur.value > best.0 {
            best = (cur.value, w.as_slice().to_vec());
        }
        if recent.len() == MEMORY {
            recent.pop_front();
        }
        recent.push_back(cur.value);
        if change < opt.tol {
            stalled += 1;
            if stalled >= STALL_ITERS {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Some(RestartOutcome {
        objective: best.0,
        weights: best.1,
        converged,
    })
}

/// Maximizes the objective over weights for a given ratio matrix.
///
/// `a` is balanced first when `opt.balance` is set (see [`prepare_matrix`]).
pub fn estimate_from_matrix(a: &RatioMatrix, opt: &OptimizerConfig) -> Result<EstimateResult> {
    opt.validate()?;
    let prepared = prepare_matrix(a, opt);
    estimate_prepared(&prepared, opt)
}

/// Like [`estimate_from_matrix`] but uses `a` exactly as given.
pub fn estimate_prepared(a: &RatioMatrix, opt: &OptimizerConfig) -> Result<EstimateResult> {
    opt.validate()?;
    let outcomes: Vec<Option<RestartOutcome>> = (0..opt.restarts)
        .into_par_iter()
        .map(|r| run_restart(a, opt, r))
        .collect();
    let restarts_used = outcomes.iter().filter(|o| o.is_some()).count();
    // Ties go to the earliest restart.
    let best = outcomes
        .into_iter()
        .flatten()
        .reduce(|best, o| if o.objective > best.objective { o } else { best })
        .ok_or(Error::OptimizationFailed { seed: opt.seed })?;
    let raw_value = best.objective.exp();
    Ok(EstimateResult {
        value: raw_value.clamp(0.0, 1.0),
        raw_value,
        restarts_used,
        best_objective: best.objective,
        converged: best.converged,
        seed: opt.seed,
        best_weights: best.weights,
    })
}

/// Estimates `s(X;Y)` from samples: KDE ratio matrix, then projected
/// gradient ascent with random restarts.
pub fn estimate_hc(s: &PairedSamples, kde: &KdeConfig, opt: &OptimizerConfig) -> Result<EstimateResult> {
    opt.validate()?;
    let a = estimate_ratio_matrix(s, kde)?;
    estimate_from_matrix(&a, opt)
}

/// Estimates `s(Y;X)`: [`estimate_hc`] with the roles of `x` and `y` swapped.
pub fn estimate_hc_reverse(s: &PairedSamples, kde: &KdeConfig, opt: &OptimizerConfig) -> Result<EstimateResult> {
    estimate_hc(&s.swapped(), kde, opt)
}
