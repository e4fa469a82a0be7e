//! Kernel density estimate of the ratio matrix.
//!
//! With Gaussian product kernels `K_hx`, `K_hy` the estimate is
//!
//! ```text
//! a[j][i] = n · Σ_k K_hx(x_i − x_k) K_hy(y_j − y_k)
//!           ─────────────────────────────────────────
//!           Σ_k K_hx(x_i − x_k) · Σ_k K_hy(y_j − y_k)
//! ```
//!
//! i.e. the plug-in ratio `p̂_xy(X_i, Y_j) / (p̂_x(X_i) p̂_y(Y_j))` of
//! leave-in KDEs. Kernel normalizing constants cancel, so unnormalized
//! `exp(−u²/2)` kernels are used. Every entry is floored at
//! [`KdeConfig::epsilon_floor`].
//!
//! The numerator is a dense matrix product. It runs single-threaded inside
//! `nalgebra`, so the output is bit-identical across runs and thread counts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::types::{PairedSamples, RatioMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `1.06 σ̂ n^(−1/5)` per axis.
    Silverman,
    /// `σ̂ n^(−1/5)` per axis.
    Scott,
    Fixed {
        hx: f64,
        hy: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KdeConfig {
    pub bandwidth: BandwidthRule,
    pub kernel: Kernel,
    pub epsilon_floor: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthRule::Silverman,
            kernel: Kernel::Gaussian,
            epsilon_floor: 1e-12,
        }
    }
}

impl KdeConfig {
    pub fn fixed(hx: f64, hy: f64) -> Self {
        Self {
            bandwidth: BandwidthRule::Fixed { hx, hy },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BandwidthRule::Fixed { hx, hy } = self.bandwidth {
            if !(hx > 0.0 && hy > 0.0 && hx.is_finite() && hy.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "fixed bandwidths must be positive, got ({hx}, {hy})"
                )));
            }
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::InvalidInput("epsilon_floor must be positive".into()));
        }
        Ok(())
    }

    /// Bandwidths `(h_x, h_y)` this configuration selects for `s`.
    pub fn bandwidths(&self, s: &PairedSamples) -> Result<(f64, f64)> {
        let (sx, sy) = (sample_std(s.x()), sample_std(s.y()));
        if sx == 0.0 || sy == 0.0 {
            return Err(Error::DegenerateInput(format!(
                "constant variable (sd_x = {sx}, sd_y = {sy})"
            )));
        }
        let shrink = (s.len() as f64).powf(-0.2);
        Ok(match self.bandwidth {
            BandwidthRule::Silverman => (1.06 * sx * shrink, 1.06 * sy * shrink),
            BandwidthRule::Scott => (sx * shrink, sy * shrink),
            BandwidthRule::Fixed { hx, hy } => (hx, hy),
        })
    }
}

/// Sample standard deviation with the `n − 1` denominator.
pub fn sample_std(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Silverman's rule of thumb, `1.06 σ̂ n^(−1/5)`.
pub fn silverman_bandwidth(v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidInput("bandwidth needs at least 2 values".into()));
    }
    let sd = sample_std(v);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::DegenerateInput("zero sample standard deviation".into()));
    }
    Ok(1.06 * sd * (v.len() as f64).powf(-0.2))
}

fn kernel_matrix(v: &[f64], h: f64) -> DMatrix<f64> {
    let n = v.len();
    let inv = 1.0 / h;
    DMatrix::from_fn(n, n, |r, c| {
        let u = (v[r] - v[c]) * inv;
        (-0.5 * u * u).exp()
    })
}

/// Estimates the ratio matrix of `s` by kernel density estimation.
pub fn estimate_ratio_matrix(s: &PairedSamples, cfg: &KdeConfig) -> Result<RatioMatrix> {
    cfg.validate()?;
    let (hx, hy) = cfg.bandwidths(s)?;
    let n = s.len();
    let kx = kernel_matrix(s.x(), hx);
    let ky = kernel_matrix(s.y(), hy);
    let sum_x: Vec<f64> = kx.row_iter().map(|r| r.sum()).collect();
    let sum_y: Vec<f64> = ky.row_iter().map(|r| r.sum()).collect();
    // joint[(j, i)] = Σ_k K_y(j, k) K_x(k, i); both kernels are symmetric.
    let joint = &ky * &kx;
    let nf = n as f64;
    let floor = cfg.epsilon_floor;
    let mut data = vec![0.0; n * n];
    for (j, row) in data.chunks_mut(n).enumerate() {
        let scale = nf / sum_y[j];
        for (i, a) in row.iter_mut().enumerate() {
            *a = (scale * joint[(j, i)] / sum_x[i]).max(floor);
        }
    }
    RatioMatrix::from_row_major(n, data)
}
