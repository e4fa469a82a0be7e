//! One entry point for every dependence measure, used by the power harness,
//! the pathway experiment and pair screening.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{dcor, mcor, mic, pearson, BaselineConfig};
use crate::density::KdeConfig;
use crate::estimator::{estimate_hc, estimate_hc_reverse, OptimizerConfig};
use crate::types::PairedSamples;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Hc,
    HcReverse,
    Pearson,
    Dcor,
    Mcor,
    Mic,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Self::Hc,
        Self::HcReverse,
        Self::Pearson,
        Self::Dcor,
        Self::Mcor,
        Self::Mic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hc => "hc",
            Self::HcReverse => "hc_reverse",
            Self::Pearson => "pearson",
            Self::Dcor => "dcor",
            Self::Mcor => "mcor",
            Self::Mic => "mic",
        }
    }

    /// Name for reports; the MIC column is an approximation and says so.
    pub fn label(self) -> &'static str {
        match self {
            Self::Mic => "MIC-approx",
            other => other.name(),
        }
    }

    /// Detection statistic derived from a score: `|r|` for Pearson, the
    /// score itself otherwise.
    pub fn statistic(self, score: f64) -> f64 {
        match self {
            Self::Pearson => score.abs(),
            _ => score,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "hcr" => Some(Self::HcReverse),
            "cor" => Some(Self::Pearson),
            _ => None,
        };
        alias
            .or_else(|| Self::ALL.into_iter().find(|m| m.name() == s))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidInput(format!("unknown measure '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Parses a comma-separated measure list such as `hc,pearson,mic`.
pub fn parse_measures(list: &str) -> Result<Vec<Measure>> {
    let mut out: Vec<Measure> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Measure = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("empty measure list".into()));
    }
    Ok(out)
}

/// Configuration shared by all measures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureSuite {
    pub kde: KdeConfig,
    pub optimizer: OptimizerConfig,
    pub baselines: BaselineConfig,
}

impl MeasureSuite {
    pub fn validate(&self) -> Result<()> {
        self.kde.validate()?;
        self.optimizer.validate()?;
        self.baselines.validate()
    }

    /// Scores `s` with `m`. `seed` drives the estimator restarts and is
    /// ignored by the deterministic baselines.
    pub fn score(&self, m: Measure, s: &PairedSamples, seed: u64) -> Result<f64> {
        let opt = OptimizerConfig { seed, ..self.optimizer };
        match m {
            Measure::Hc => Ok(estimate_hc(s, &self.kde, &opt)?.value),
            Measure::HcReverse => Ok(estimate_hc_reverse(s, &self.kde, &opt)?.value),
            Measure::Pearson => pearson(s),
            Measure::Dcor => dcor(s),
            Measure::Mcor => mcor(s, &self.baselines),
            Measure::Mic => mic(s, &self.baselines),
        }
    }
}
