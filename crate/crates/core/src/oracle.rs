//! Brute-force `s(X;Y)` and maximal correlation for small discrete joints.
//!
//! [`s_exact`] searches the ratio vectors `w_x = r_x(x) / p_x(x)` directly:
//! an exhaustive sweep over a quantized grid, then a local pattern search
//! from the best grid point. For every candidate
//!
//! ```text
//! r_x = p_x · w / Σ p_x w,   r_y(y) = Σ_x r_x(x) p(y | x),
//! ratio = D(r_y ‖ p_y) / D(r_x ‖ p_x)
//! ```
//!
//! Near `r_x = p_x` the ratio tends to `mCor²`, which grid points with
//! `D(r_x ‖ p_x) ≥ c0` cannot reach. That limit is part of the supremum, so
//! the returned value is the larger of the search result and `mCor²`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::types::{xlogx, DiscreteJoint, RatioMatrix};
use crate::{Error, Result};

/// Largest `X` alphabet the exhaustive search accepts.
pub const MAX_SYMBOLS: usize = 6;
/// Largest estimated number of grid points the sweep will visit.
pub const MAX_GRID_POINTS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantGrid {
    /// Gap between neighbouring ratio values.
    pub delta: f64,
    /// Smallest nonzero ratio.
    pub c1: f64,
    /// Largest ratio.
    pub c2: f64,
    /// Smallest admissible `D(r_x ‖ p_x)`.
    pub c0: f64,
}

impl Default for QuantGrid {
    fn default() -> Self {
        Self {
            delta: 0.05,
            c1: 1e-3,
            c2: 20.0,
            c0: 1e-4,
        }
    }
}

impl QuantGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c1 > 0.0
            && self.c1 < 1.0
            && self.c2 > 1.0
            && self.c2.is_finite()
            && self.c0 > 0.0
            && self.delta > 0.0
            && self.delta <= (self.c2 - self.c1) / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid quantization grid {self:?}")))
        }
    }

    /// Ratio values of the sweep: `0` followed by `c1, c1 + Δ, …, ≤ c2`.
    ///
    /// Zero is included so that restricted supports (`r_x(x) = 0`) are
    /// reachable exactly.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        let mut m = 0u32;
        loop {
            let x = self.c1 + f64::from(m) * self.delta;
            if x > self.c2 + 1e-12 {
                break;
            }
            v.push(x);
            m += 1;
        }
        v
    }
}

/// Detailed output of [`s_exact_detailed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `max(search, local_limit)`, in `[0, 1]`.
    pub value: f64,
    /// Best ratio found by the grid sweep and refinement.
    pub search: f64,
    /// `mCor²`, the ratio's limit as `r_x → p_x`.
    pub local_limit: f64,
    /// Ratio vector of the best searched point, normalized to `Σ p_x w = 1`.
    pub ratios: Vec<f64>,
}

struct Evaluator<'a> {
    joint: &'a DiscreteJoint,
    px: Vec<f64>,
    py: Vec<f64>,
    c0: f64,
}

impl Evaluator<'_> {
    /// KL ratio at the pmf induced by unnormalized ratios `w`.
    fn ratio(&self, w: &[f64]) -> Option<f64> {
        let z: f64 = self.px.iter().zip(w).map(|(p, w)| p * w).sum();
        if !(z > 0.0) {
            return None;
        }
        let mut d_x = 0.0;
        for (p, &wi) in self.px.iter().zip(w) {
            d_x += p * xlogx(wi / z);
        }
        if d_x < self.c0 {
            return None;
        }
        let mut d_y = 0.0;
        for (y, &py) in self.py.iter().enumerate() {
            let mut ry = 0.0;
            for (x, &wi) in w.iter().enumerate() {
                ry += self.joint.p(x, y) * wi;
            }
            d_y += py * xlogx(ry / z / py);
        }
        Some(d_y.max(0.0) / d_x)
    }
}

fn check_joint(j: &DiscreteJoint) -> Result<()> {
    if j.kx() > MAX_SYMBOLS {
        return Err(Error::BudgetExceeded {
            size: j.kx(),
            limit: MAX_SYMBOLS,
        });
    }
    if j.kx() < 2 || j.ky() < 2 {
        return Err(Error::DegenerateInput("constant variable in joint pmf".into()));
    }
    Ok(())
}

/// Second largest singular value of `Q = P_X^{-1/2} P_XY P_Y^{-1/2}`.
pub fn mcor_exact(j: &DiscreteJoint) -> Result<f64> {
    let (px, py) = (j.marginal_x(), j.marginal_y());
    if px.iter().chain(&py).any(|&p| p <= 0.0) {
        return Err(Error::DegenerateInput("zero marginal entry".into()));
    }
    if j.kx() < 2 || j.ky() < 2 {
        return Ok(0.0);
    }
    let q = DMatrix::from_fn(j.kx(), j.ky(), |x, y| j.p(x, y) / (px[x] * py[y]).sqrt());
    let mut sv: Vec<f64> = q.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv[1].clamp(0.0, 1.0))
}

/// `s(X;Y)` of `j` by quantized search; see the module docs.
pub fn s_exact(j: &DiscreteJoint, grid: &QuantGrid) -> Result<f64> {
    Ok(s_exact_detailed(j, grid)?.value)
}

pub fn s_exact_detailed(j: &DiscreteJoint, grid: &QuantGrid) -> Result<OracleResult> {
    grid.validate()?;
    check_joint(j)?;
    let ev = Evaluator {
        joint: j,
        px: j.marginal_x(),
        py: j.marginal_y(),
        c0: grid.c0,
    };
    let size = sweep_size(&ev.px, grid);
    if size > MAX_GRID_POINTS as f64 {
        return Err(Error::BudgetExceeded {
            size: size.min(usize::MAX as f64) as usize,
            limit: MAX_GRID_POINTS,
        });
    }
    let local_limit = mcor_exact(j)?.powi(2);
    let (mut best, mut w) = grid_sweep(&ev, grid);
    if let Some(start) = w.take() {
        let (b, refined) = refine(&ev, start, best, grid.delta);
        best = b;
        w = Some(refined);
    }
    let ratios = w
        .map(|w| {
            let z: f64 = ev.px.iter().zip(&w).map(|(p, w)| p * w).sum();
            w.iter().map(|v| v / z).collect()
        })
        .unwrap_or_default();
    Ok(OracleResult {
        value: best.max(local_limit).clamp(0.0, 1.0),
        search: best,
        local_limit,
        ratios,
    })
}

/// Approximate number of points [`grid_sweep`] visits: the lattice points
/// under the simplex `Σ p_x w ≤ 1` spanned by the free coordinates.
fn sweep_size(px: &[f64], grid: &QuantGrid) -> f64 {
    let last = rarest(px);
    let count = grid.values().len() as f64;
    let mut size = 2.0;
    let mut fact = 1.0;
    let free = px.iter().enumerate().filter(|&(x, _)| x != last).map(|(_, &p)| p);
    for (m, p) in free.enumerate() {
        size *= (1.0 / (p * grid.delta)).min(count) + 1.0;
        fact *= (m + 1) as f64;
    }
    size / fact
}

fn rarest(px: &[f64]) -> usize {
    (0..px.len())
        .min_by(|&a, &b| px[a].total_cmp(&px[b]).then(a.cmp(&b)))
        .unwrap_or(0)
}

/// Exhaustive sweep. Every coordinate but one runs over the grid values
/// with the partial mass `Σ p_x w` capped at one; the remaining coordinate
/// takes the two grid values bracketing the value that closes the sum, each
/// kept when the sum is within `k_x Δ` of one.
fn grid_sweep(ev: &Evaluator<'_>, grid: &QuantGrid) -> (f64, Option<Vec<f64>>) {
    let k = ev.px.len();
    let vals = grid.values();
    let tol = k as f64 * grid.delta;
    // Close the sum on the rarest symbol: it has the longest admissible range.
    let last = rarest(&ev.px);
    let free: Vec<usize> = (0..k).filter(|&x| x != last).collect();

    let per_first: Vec<(f64, Option<Vec<f64>>)> = (0..vals.len())
        .into_par_iter()
        .map(|i0| {
            let mut w = vec![0.0; k];
            let mut best = (0.0, None);
            let s0 = ev.px[free[0]] * vals[i0];
            if s0 > 1.0 + tol {
                return best;
            }
            w[free[0]] = vals[i0];
            sweep_rest(ev, &vals, &free, 1, s0, last, tol, &mut w, &mut best);
            best
        })
        .collect();
    let mut best = (0.0, None);
    for cand in per_first {
        if cand.1.is_some() && (best.1.is_none() || cand.0 > best.0) {
            best = cand;
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn sweep_rest(
    ev: &Evaluator<'_>,
    vals: &[f64],
    free: &[usize],
    depth: usize,
    partial: f64,
    last: usize,
    tol: f64,
    w: &mut [f64],
    best: &mut (f64, Option<Vec<f64>>),
) {
    if depth == free.len() {
        let pl = ev.px[last];
        let target = (1.0 - partial) / pl;
        let hi = vals.partition_point(|&v| v < target);
        let lo = hi.saturating_sub(1);
        for idx in [lo, hi] {
            if idx >= vals.len() || (idx == hi && hi == lo) {
                continue;
            }
            let sum = partial + pl * vals[idx];
            if (sum - 1.0).abs() > tol {
                continue;
            }
            w[last] = vals[idx];
            if let Some(r) = ev.ratio(w) {
                if best.1.is_none() || r > best.0 {
                    *best = (r, Some(w.to_vec()));
                }
            }
        }
        return;
    }
    let x = free[depth];
    for &v in vals {
        let s = partial + ev.px[x] * v;
        if s > 1.0 + tol {
            break;
        }
        w[x] = v;
        sweep_rest(ev, vals, free, depth + 1, s, last, tol, w, best);
    }
}

/// Coordinate pattern search from `w`, with steps halving from `Δ` until
/// they reach `Δ / 100`.
fn refine(ev: &Evaluator<'_>, mut w: Vec<f64>, mut best: f64, delta: f64) -> (f64, Vec<f64>) {
    let normalize = |w: &mut Vec<f64>| {
        let z: f64 = ev.px.iter().zip(w.iter()).map(|(p, w)| p * w).sum();
        w.iter_mut().for_each(|v| *v /= z);
    };
    normalize(&mut w);
    let mut h = delta;
    loop {
        for _ in 0..1000 {
            let mut improved = false;
            for x in 0..w.len() {
                for sign in [1.0, -1.0] {
                    let mut cand = w.clone();
                    cand[x] = (cand[x] + sign * h).max(0.0);
                    if let Some(r) = ev.ratio(&cand) {
                        if r > best {
                            best = r;
                            normalize(&mut cand);
                            w = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if h <= delta / 100.0 {
            break;
        }
        h /= 2.0;
    }
    (best, w)
}

/// `(s(j), s(j ⊗ j))` for a joint with at most two `X` symbols.
pub fn tensorize_check(j: &DiscreteJoint, grid: &QuantGrid) -> Result<(f64, f64)> {
    if j.kx() > 2 {
        return Err(Error::BudgetExceeded {
            size: j.kx() * j.kx(),
            limit: 4,
        });
    }
    let single = s_exact(j, grid)?;
    let double = s_exact(&j.tensor_square()?, grid)?;
    Ok((single, double))
}

/// Adds a dominant symbol of mass `1 − α` to `rare`, whose `Y` given that
/// symbol is distributed as the `Y` marginal of `rare`. The rare rows keep
/// their shape and total `α`.
pub fn rare_mixture(rare: &DiscreteJoint, alpha: f64) -> Result<DiscreteJoint> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let mut rows: Vec<Vec<f64>> = rare
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(|p| alpha * p).collect())
        .collect();
    if alpha < 1.0 {
        rows.push(rare.marginal_y().into_iter().map(|p| (1.0 - alpha) * p).collect());
    }
    DiscreteJoint::from_weights(rows)
}

/// `Y = X` uniform on `k` symbols.
pub fn identity_joint(k: usize) -> Result<DiscreteJoint> {
    corrupted_identity(k, 0.0)
}

/// `X` uniform on `k` symbols; `Y = X` with probability `1 − ε`, otherwise
/// one of the other `k − 1` symbols uniformly.
pub fn corrupted_identity(k: usize, eps: f64) -> Result<DiscreteJoint> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be at least 2, got {k}")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps must lie in [0, 1], got {eps}")));
    }
    let kf = k as f64;
    let rows = (0..k)
        .map(|x| {
            (0..k)
                .map(|y| {
                    if x == y {
                        (1.0 - eps) / kf
                    } else {
                        eps / ((kf - 1.0) * kf)
                    }
                })
                .collect()
        })
        .collect();
    DiscreteJoint::from_weights(rows)
}

/// Exact ratio matrix of symbol samples, `a[j][i] = p(x_i, y_j) / (p(x_i) p(y_j))`,
/// floored at `floor`.
pub fn exact_ratio_matrix(j: &DiscreteJoint, samples: &[(usize, usize)], floor: f64) -> Result<RatioMatrix> {
    let (px, py) = (j.marginal_x(), j.marginal_y());
    if let Some(&(x, y)) = samples.iter().find(|&&(x, y)| x >= j.kx() || y >= j.ky()) {
        return Err(Error::InvalidInput(format!(
            "symbol pair ({x}, {y}) outside the alphabet"
        )));
    }
    let n = samples.len();
    let mut data = Vec::with_capacity(n * n);
    for &(_, yj) in samples {
        for &(xi, _) in samples {
            data.push((j.p(xi, yj) / (px[xi] * py[yj])).max(floor));
        }
    }
    Ok(RatioMatrix::from_raw(n, data))
}
