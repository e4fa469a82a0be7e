//! Classical dependence measures: Pearson correlation, distance correlation,
//! maximal correlation and an equal-frequency approximation of MIC.
//!
//! The binned measures use rank-based equal-frequency bins, with tied
//! values sharing their lowest rank, so they are exactly invariant under
//! strictly increasing maps of either coordinate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracle::mcor_exact;
use crate::types::{xlogx, DiscreteJoint, PairedSamples};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Bins per axis for mCor; `None` means `⌈√n⌉`.
    pub mcor_bins: Option<usize>,
    /// MIC grids satisfy `a · b ≤ n^mic_exponent`.
    pub mic_exponent: f64,
    /// Largest MIC bins per axis; `None` means `⌊n^0.3⌋ + 1`.
    pub mic_max_axis: Option<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            mcor_bins: None,
            mic_exponent: 0.6,
            mic_max_axis: None,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.mcor_bins, Some(b) if b < 2) {
            return Err(Error::InvalidInput("mcor_bins must be at least 2".into()));
        }
        if !(self.mic_exponent > 0.0 && self.mic_exponent < 1.0) {
            return Err(Error::InvalidInput(format!(
                "mic_exponent must lie in (0, 1), got {}",
                self.mic_exponent
            )));
        }
        if matches!(self.mic_max_axis, Some(b) if b < 2) {
            return Err(Error::InvalidInput("mic_max_axis must be at least 2".into()));
        }
        Ok(())
    }

    pub fn mcor_bins_for(&self, n: usize) -> usize {
        self.mcor_bins.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
    }

    pub fn mic_max_axis_for(&self, n: usize) -> usize {
        self.mic_max_axis
            .unwrap_or_else(|| (n as f64).powf(0.3).floor() as usize + 1)
    }
}

fn check_nonconstant(s: &PairedSamples) -> Result<()> {
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(s.x()) || constant(s.y()) {
        return Err(Error::DegenerateInput("constant column".into()));
    }
    Ok(())
}

/// Sample correlation coefficient.
pub fn pearson(s: &PairedSamples) -> Result<f64> {
    check_nonconstant(s)?;
    let n = s.len() as f64;
    let mx = s.x().iter().sum::<f64>() / n;
    let my = s.y().iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in s.x().iter().zip(s.y()) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Row means and grand mean of the pairwise distance matrix of `v`.
fn distance_means(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.len() as f64;
    let rows: Vec<f64> = v
        .par_iter()
        .map(|&a| v.iter().map(|&b| (a - b).abs()).sum::<f64>() / n)
        .collect();
    let grand = rows.iter().sum::<f64>() / n;
    (rows, grand)
}

/// Sample distance correlation (V-statistic form). Runs in `O(n²)` time and
/// `O(n)` memory by recomputing distances instead of storing them.
pub fn dcor(s: &PairedSamples) -> Result<f64> {
    if s.len() < 4 {
        return Err(Error::InvalidInput(format!("dcor needs n ≥ 4, got {}", s.len())));
    }
    check_nonconstant(s)?;
    let (x, y) = (s.x(), s.y());
    let (rx, gx) = distance_means(x);
    let (ry, gy) = distance_means(y);
    let sums: Vec<[f64; 3]> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 3];
            for k in 0..x.len() {
                let a = (x[i] - x[k]).abs() - rx[i] - rx[k] + gx;
                let b = (y[i] - y[k]).abs() - ry[i] - ry[k] + gy;
                acc[0] += a * b;
                acc[1] += a * a;
                acc[2] += b * b;
            }
            acc
        })
        .collect();
    let mut t = [0.0; 3];
    for row in &sums {
        for (a, b) in t.iter_mut().zip(row) {
            *a += b;
        }
    }
    let [cov, vx, vy] = t;
    if vx <= 0.0 || vy <= 0.0 {
        return Ok(0.0);
    }
    Ok((cov.max(0.0) / (vx * vy).sqrt()).sqrt().clamp(0.0, 1.0))
}

/// Ranks with ties sharing the lowest rank of their group.
pub fn min_ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; v.len()];
    let mut start = 0;
    for pos in 0..idx.len() {
        if pos > 0 && v[idx[pos]] != v[idx[pos - 1]] {
            start = pos;
        }
        ranks[idx[pos]] = start;
    }
    ranks
}

/// Equal-frequency bin of each rank for `bins` bins over `n` samples.
fn bin_of(ranks: &[usize], bins: usize) -> Vec<usize> {
    let n = ranks.len();
    ranks.iter().map(|&r| r * bins / n).collect()
}

/// Contingency table of two binnings, with empty rows and columns removed.
fn table(bx: &[usize], by: &[usize], kx: usize, ky: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; ky]; kx];
    for (&a, &b) in bx.iter().zip(by) {
        counts[a][b] += 1.0;
    }
    let keep_cols: Vec<usize> = (0..ky).filter(|&c| counts.iter().any(|r| r[c] > 0.0)).collect();
    counts
        .into_iter()
        .filter(|r| r.iter().any(|&v| v > 0.0))
        .map(|r| keep_cols.iter().map(|&c| r[c]).collect())
        .collect()
}

/// Maximal correlation of the equal-frequency binned empirical joint.
pub fn mcor(s: &PairedSamples, cfg: &BaselineConfig) -> Result<f64> {
    cfg.validate()?;
    check_nonconstant(s)?;
    let n = s.len();
    let bins = cfg.mcor_bins_for(n);
    if n < 2 * bins {
        return Err(Error::InvalidInput(format!(
            "mcor with {bins} bins needs n ≥ {}, got {n}",
            2 * bins
        )));
    }
    let bx = bin_of(&min_ranks(s.x()), bins);
    let by = bin_of(&min_ranks(s.y()), bins);
    let joint = DiscreteJoint::from_weights(table(&bx, &by, bins, bins))?;
    mcor_exact(&joint)
}

/// Mutual information in nats of a count table.
fn mutual_information(counts: &[Vec<f64>]) -> f64 {
    let total: f64 = counts.iter().flatten().sum();
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let ky = counts.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ky).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
    let entropy = |v: &[f64]| -v.iter().map(|&c| xlogx(c / total)).sum::<f64>();
    let cells: Vec<f64> = counts.iter().flatten().copied().collect();
    (entropy(&rows) + entropy(&cols) - entropy(&cells)).max(0.0)
}

/// Grid shapes `(a, b)` searched by [`mic`] for `n` samples.
pub fn mic_grid_shapes(n: usize, cfg: &BaselineConfig) -> Vec<(usize, usize)> {
    let budget = (n as f64).powf(cfg.mic_exponent);
    let max_axis = cfg.mic_max_axis_for(n);
    let mut shapes = Vec::new();
    for a in 2..=max_axis {
        for b in 2..=max_axis {
            if (a * b) as f64 <= budget {
                shapes.push((a, b));
            }
        }
    }
    shapes
}

/// Approximate MIC ("MIC-approx"): the largest normalized mutual information
/// `I(X_Q; Y_Q) / ln min(a, b)` over equal-frequency `a × b` grids.
pub fn mic(s: &PairedSamples, cfg: &BaselineConfig) -> Result<f64> {
    cfg.validate()?;
    if s.len() < 16 {
        return Err(Error::InvalidInput(format!("mic needs n ≥ 16, got {}", s.len())));
    }
    check_nonconstant(s)?;
    let (rx, ry) = (min_ranks(s.x()), min_ranks(s.y()));
    let scores: Vec<f64> = mic_grid_shapes(s.len(), cfg)
        .into_par_iter()
        .map(|(a, b)| {
            let t = table(&bin_of(&rx, a), &bin_of(&ry, b), a, b);
            mutual_information(&t) / (a.min(b) as f64).ln()
        })
        .collect();
    Ok(scores.into_iter().fold(0.0, f64::max).clamp(0.0, 1.0))
}
