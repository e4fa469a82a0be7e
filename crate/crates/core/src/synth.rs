//! Rare-correlated / dominant-independent mixtures over eight function
//! families.
//!
//! A correlated dataset has `⌈αn⌉` rare samples with `x ~ U[0,1]`,
//! `y = f(x) + N(0, σ²)`, followed by dominant samples with `x ~ U[1, 1.1]`
//! and `y = f(U) + N(0, σ²)` for a fresh `U ~ U[0,1]`. Both blocks share the
//! same `y` marginal. A null dataset draws every sample like the dominant
//! block, with `x` spread over the whole support (see [`NullLayout`]).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::types::PairedSamples;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionFamily {
    Linear,
    Quadratic,
    Cubic,
    Sin4pi,
    Sin16pi,
    FourthRoot,
    Circle,
    Step,
}

impl FunctionFamily {
    pub const ALL: [FunctionFamily; 8] = [
        Self::Linear,
        Self::Quadratic,
        Self::Cubic,
        Self::Sin4pi,
        Self::Sin16pi,
        Self::FourthRoot,
        Self::Circle,
        Self::Step,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
            Self::Cubic => "cubic",
            Self::Sin4pi => "sin4pi",
            Self::Sin16pi => "sin16pi",
            Self::FourthRoot => "fourth_root",
            Self::Circle => "circle",
            Self::Step => "step",
        }
    }
}

impl fmt::Display for FunctionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|f| f.name()).collect();
            Error::InvalidInput(format!("unknown family '{s}', expected one of {}", names.join(", ")))
        })
    }
}

/// `f(x)` for `x ∈ [0, 1]`.
///
/// `circle` returns `sin(2πx)/2`, the height of the point at angle `2πx` on
/// a circle of unit diameter; [`generate`] pairs it with the matching
/// horizontal position instead of `x` itself.
pub fn eval_family(fam: FunctionFamily, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("family argument must lie in [0, 1], got {x}")));
    }
    Ok(match fam {
        FunctionFamily::Linear => x,
        FunctionFamily::Quadratic => x * x,
        FunctionFamily::Cubic => x * x * x,
        FunctionFamily::Sin4pi => (4.0 * PI * x).sin(),
        FunctionFamily::Sin16pi => (16.0 * PI * x).sin(),
        FunctionFamily::FourthRoot => x.sqrt().sqrt(),
        FunctionFamily::Circle => 0.5 * (2.0 * PI * x).sin(),
        FunctionFamily::Step => {
            if x > 0.5 {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Where null samples put `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullLayout {
    /// `x` uniform over the union of both blocks, `[0, 1.1]`
    /// (`[−0.1, 1]` when mirrored).
    #[default]
    Spread,
    /// Same two-block `x` layout as the correlated data, `y` independent.
    Blocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub family: FunctionFamily,
    pub alpha: f64,
    pub sigma2: f64,
    pub n: usize,
    pub correlated: bool,
    pub seed: u64,
    /// Put the dominant block at `x ∈ [−0.1, 0]` instead of `[1, 1.1]`.
    #[serde(default)]
    pub mirror: bool,
    #[serde(default)]
    pub null_layout: NullLayout,
}

impl MixtureSpec {
    pub fn new(family: FunctionFamily, alpha: f64, sigma2: f64, n: usize, correlated: bool, seed: u64) -> Self {
        Self {
            family,
            alpha,
            sigma2,
            n,
            correlated,
            seed,
            mirror: false,
            null_layout: NullLayout::Spread,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_correlated(mut self, correlated: bool) -> Self {
        self.correlated = correlated;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma2 must be finite and nonnegative, got {}",
                self.sigma2
            )));
        }
        if self.n < 10 {
            return Err(Error::Domain(format!("n must be at least 10, got {}", self.n)));
        }
        Ok(())
    }

    /// Number of samples in the rare block of a correlated dataset.
    pub fn rare_count(&self) -> usize {
        // The tolerance keeps products such as 0.05 · 320 from rounding up.
        let c = (self.alpha * self.n as f64 - 1e-9).ceil().max(1.0) as usize;
        c.min(self.n)
    }

    fn dominant_range(&self) -> (f64, f64) {
        if self.mirror {
            (-0.1, 0.0)
        } else {
            (1.0, 1.1)
        }
    }
}

/// Draws the dataset described by `spec`. A pure function of `spec`.
pub fn generate(spec: &MixtureSpec) -> Result<PairedSamples> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let noise = Normal::new(0.0, spec.sigma2.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let fam = spec.family;
    let (dom_lo, dom_hi) = spec.dominant_range();
    let rare = if spec.correlated { spec.rare_count() } else { 0 };
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);

    let noisy = |v: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        if spec.sigma2 > 0.0 {
            v + noise.sample(rng)
        } else {
            v
        }
    };

    for _ in 0..rare {
        let u: f64 = rng.random();
        let xi = if fam == FunctionFamily::Circle {
            0.5 + 0.5 * (2.0 * PI * u).cos()
        } else {
            u
        };
        x.push(xi);
        y.push(noisy(eval_family(fam, u)?, &mut rng));
    }
    let (lo, hi) = if spec.correlated || spec.null_layout == NullLayout::Blocks {
        (dom_lo, dom_hi)
    } else {
        (dom_lo.min(0.0), dom_hi.max(1.0))
    };
    let blocks = !spec.correlated && spec.null_layout == NullLayout::Blocks;
    let null_rare = if blocks { spec.rare_count() } else { 0 };
    for i in rare..spec.n {
        let xi = if i < null_rare {
            rng.random::<f64>()
        } else {
            lo + (hi - lo) * rng.random::<f64>()
        };
        let u: f64 = rng.random();
        x.push(xi);
        y.push(noisy(eval_family(fam, u)?, &mut rng));
    }
    PairedSamples::new(x, y)
}
