//! Detection power at a fixed false-positive rate, and trend recovery on
//! time-resolved four-variable chains.
//!
//! For each sweep point the harness scores `n_null` null datasets, takes the
//! `⌈(1 − fpr) · n_null⌉`-th smallest null statistic as the threshold, and
//! reports the fraction of `n_alt` correlated datasets whose statistic lies
//! strictly above it. Every dataset and estimator run gets its own seed,
//! derived from the configuration seed and the dataset's coordinates, so
//! reports do not depend on scheduling.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measure::{Measure, MeasureSuite};
use crate::rng::{derive_path, derive_seed, rng_from_seed};
use crate::synth::{generate, MixtureSpec};
use crate::types::PairedSamples;
use crate::{Error, Result};

/// Statistic recorded for a dataset whose scoring failed.
pub const FAILED_SCORE: f64 = f64::NEG_INFINITY;

const ROLE_NULL: u64 = 0;
const ROLE_ALT: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Sigma2,
    Alpha,
    N,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma2" => Ok(Self::Sigma2),
            "alpha" => Ok(Self::Alpha),
            "n" => Ok(Self::N),
            _ => Err(Error::InvalidInput(format!(
                "unknown sweep axis '{s}', expected sigma2, alpha or n"
            ))),
        }
    }
}

/// One mixture setting of a sweep; its `seed` field is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub spec: MixtureSpec,
}

/// Sweep over `axis`, varying `base` one value at a time.
pub fn sweep_over(base: MixtureSpec, axis: SweepAxis, values: &[f64]) -> Vec<SweepPoint> {
    values
        .iter()
        .map(|&value| {
            let mut spec = base;
            match axis {
                SweepAxis::Sigma2 => spec.sigma2 = value,
                SweepAxis::Alpha => spec.alpha = value,
                SweepAxis::N => spec.n = value as usize,
            }
            SweepPoint { value, spec }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n_null: usize,
    pub n_alt: usize,
    pub fpr: f64,
    pub measures: Vec<Measure>,
    pub sweep: Vec<SweepPoint>,
    pub seed: u64,
    pub trials_parallel: bool,
    pub suite: MeasureSuite,
}

impl PowerConfig {
    /// Defaults (500 null, 500 correlated datasets, 5% false positives)
    /// at a single setting.
    pub fn new(base: MixtureSpec, measures: Vec<Measure>) -> Self {
        Self {
            n_null: 500,
            n_alt: 500,
            fpr: 0.05,
            measures,
            sweep: vec![SweepPoint {
                value: base.sigma2,
                spec: base,
            }],
            seed: 0,
            trials_parallel: true,
            suite: MeasureSuite::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fpr > 0.0 && self.fpr < 1.0) {
            return Err(Error::Domain(format!("fpr must lie in (0, 1), got {}", self.fpr)));
        }
        if self.n_null < 20 {
            return Err(Error::Domain(format!(
                "n_null must be at least 20, got {}",
                self.n_null
            )));
        }
        if self.n_alt == 0 {
            return Err(Error::Domain("n_alt must be positive".into()));
        }
        if self.measures.is_empty() || self.sweep.is_empty() {
            return Err(Error::InvalidInput("power run needs measures and sweep points".into()));
        }
        for p in &self.sweep {
            p.spec.validate()?;
        }
        self.suite.validate()
    }
}

/// Order-statistic summary of a score sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(scores: &[f64]) -> Self {
        let mut v = scores.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            min: v[0],
            q25: order_statistic(&v, 0.25),
            median: order_statistic(&v, 0.5),
            q75: order_statistic(&v, 0.75),
            max: v[v.len() - 1],
        }
    }
}

/// The `⌈q · m⌉`-th smallest of `m` sorted values (1-based, at least 1).
fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    // The tolerance keeps e.g. 0.95 · 100 = 95.000…01 from rounding up.
    let k = ((q * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(m) - 1]
}

/// Detection threshold for null statistics at false-positive rate `fpr`.
pub fn threshold(null_scores: &[f64], fpr: f64) -> f64 {
    let mut v = null_scores.to_vec();
    v.sort_by(f64::total_cmp);
    order_statistic(&v, 1.0 - fpr)
}

/// Fraction of `scores` strictly above `threshold`.
pub fn rejection_rate(scores: &[f64], threshold: f64) -> f64 {
    scores.iter().filter(|&&s| s > threshold).count() as f64 / scores.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub measure: Measure,
    pub sweep_value: f64,
    pub spec: MixtureSpec,
    pub threshold: f64,
    pub power: f64,
    pub failed_null: usize,
    pub failed_alt: usize,
    pub null_scores: Quantiles,
    pub alt_scores: Quantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub rows: Vec<PowerRow>,
}

impl PowerReport {
    pub fn get(&self, measure: Measure, point: usize) -> Option<&PowerRow> {
        self.rows.iter().filter(|r| r.measure == measure).nth(point)
    }

    pub const CSV_HEADER: [&'static str; 20] = [
        "measure",
        "family",
        "alpha",
        "sigma2",
        "n",
        "sweep_value",
        "threshold",
        "power",
        "failed_null",
        "failed_alt",
        "null_min",
        "null_q25",
        "null_median",
        "null_q75",
        "null_max",
        "alt_min",
        "alt_q25",
        "alt_median",
        "alt_q75",
        "alt_max",
    ];

    /// Long-format CSV, one row per measure and sweep point.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            let q = |q: &Quantiles| [q.min, q.q25, q.median, q.q75, q.max].map(|v| v.to_string());
            let mut rec = vec![
                r.measure.label().to_string(),
                r.spec.family.to_string(),
                r.spec.alpha.to_string(),
                r.spec.sigma2.to_string(),
                r.spec.n.to_string(),
                r.sweep_value.to_string(),
                r.threshold.to_string(),
                r.power.to_string(),
                r.failed_null.to_string(),
                r.failed_alt.to_string(),
            ];
            rec.extend(q(&r.null_scores));
            rec.extend(q(&r.alt_scores));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed of dataset `trial` in `batch` for the given sweep point and role.
fn dataset_seed(cfg: &PowerConfig, point: usize, correlated: bool, batch: u64, trial: usize) -> u64 {
    let role = if correlated { ROLE_ALT } else { ROLE_NULL };
    derive_path(cfg.seed, &[point as u64, role, batch, trial as u64])
}

/// Statistics of `trials` datasets, one vector per measure of `cfg`.
///
/// `batch` selects an independent family of datasets; [`run_power`] uses
/// batch 0.
pub fn score_datasets(
    cfg: &PowerConfig,
    point: usize,
    correlated: bool,
    batch: u64,
    trials: usize,
) -> Result<Vec<Vec<f64>>> {
    let sp = cfg
        .sweep
        .get(point)
        .ok_or_else(|| Error::InvalidInput(format!("no sweep point {point}")))?;
    let one = |trial: usize| -> Vec<f64> {
        let seed = dataset_seed(cfg, point, correlated, batch, trial);
        let spec = sp.spec.with_seed(seed).with_correlated(correlated);
        let data = generate(&spec);
        cfg.measures
            .iter()
            .map(|&m| match &data {
                Ok(s) => cfg
                    .suite
                    .score(m, s, derive_seed(seed, 1))
                    .map_or(FAILED_SCORE, |v| m.statistic(v)),
                Err(_) => FAILED_SCORE,
            })
            .collect()
    };
    let per_trial: Vec<Vec<f64>> = if cfg.trials_parallel {
        (0..trials).into_par_iter().map(one).collect()
    } else {
        (0..trials).map(one).collect()
    };
    Ok((0..cfg.measures.len())
        .map(|k| per_trial.iter().map(|t| t[k]).collect())
        .collect())
}

/// Runs the full power evaluation described by `cfg`.
pub fn run_power(cfg: &PowerConfig) -> Result<PowerReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (point, sp) in cfg.sweep.iter().enumerate() {
        let null = score_datasets(cfg, point, false, 0, cfg.n_null)?;
        let alt = score_datasets(cfg, point, true, 0, cfg.n_alt)?;
        for (k, &m) in cfg.measures.iter().enumerate() {
            let thr = threshold(&null[k], cfg.fpr);
            rows.push(PowerRow {
                measure: m,
                sweep_value: sp.value,
                spec: sp.spec,
                threshold: thr,
                power: rejection_rate(&alt[k], thr),
                failed_null: null[k].iter().filter(|v| **v == FAILED_SCORE).count(),
                failed_alt: alt[k].iter().filter(|v| **v == FAILED_SCORE).count(),
                null_scores: Quantiles::of(&null[k]),
                alt_scores: Quantiles::of(&alt[k]),
            });
        }
    }
    // Group rows by measure, keeping sweep order inside each group.
    rows.sort_by_key(|r| cfg.measures.iter().position(|&m| m == r.measure));
    Ok(PowerReport { rows })
}

/// Time of the largest score; ties go to the earliest time.
pub fn argmax_time(scores: &[(f64, f64)]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("argmax over an empty score list".into()));
    }
    if scores.iter().any(|(t, s)| !t.is_finite() || !s.is_finite()) {
        return Err(Error::InvalidInput("argmax over non-finite times or scores".into()));
    }
    let mut best = scores[0];
    for &(t, s) in &scores[1..] {
        if s > best.1 || (s == best.1 && t < best.0) {
            best = (t, s);
        }
    }
    Ok(best.0)
}

/// Four aligned variables `A → B → C → D` observed at several times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwaySeries {
    timepoints: Vec<f64>,
    samples: Vec<[Vec<f64>; 4]>,
}

impl PathwaySeries {
    pub fn new(timepoints: Vec<f64>, samples: Vec<[Vec<f64>; 4]>) -> Result<Self> {
        if timepoints.len() < 2 || timepoints.len() != samples.len() {
            return Err(Error::InvalidInput(
                "pathway series needs at least 2 timepoints, each with samples".into(),
            ));
        }
        for (t, s) in timepoints.iter().zip(&samples) {
            let n = s[0].len();
            if s.iter().any(|v| v.len() != n) || n < 2 {
                return Err(Error::InvalidInput(format!(
                    "timepoint {t}: the four variables need equal lengths of at least 2"
                )));
            }
            if !t.is_finite() || s.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("timepoint {t}: non-finite value")));
            }
        }
        Ok(Self { timepoints, samples })
    }

    /// Groups `(time, [a, b, c, d])` rows by time, in ascending time order.
    pub fn from_rows(rows: &[(f64, [f64; 4])]) -> Result<Self> {
        let mut times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut samples: Vec<[Vec<f64>; 4]> = vec![Default::default(); times.len()];
        for (t, v) in rows {
            let k = times.partition_point(|x| x < t);
            for (col, &val) in samples[k].iter_mut().zip(v) {
                col.push(val);
            }
        }
        Self::new(times, samples)
    }

    pub fn timepoints(&self) -> &[f64] {
        &self.timepoints
    }

    pub fn samples(&self, k: usize) -> &[Vec<f64>; 4] {
        &self.samples[k]
    }
}

/// Fraction of subsampled trials in which the peak times of the scores of
/// `(A, B)`, `(B, C)` and `(C, D)` are nondecreasing.
///
/// Each trial keeps `⌈γ n_i⌉` samples of timepoint `i`, drawn without
/// replacement. Scores that fail count as `−∞`.
pub fn trend_recovery(
    series: &PathwaySeries,
    measure: Measure,
    suite: &MeasureSuite,
    subsample_rate: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(subsample_rate > 0.0 && subsample_rate <= 1.0) {
        return Err(Error::Domain(format!(
            "subsample rate must lie in (0, 1], got {subsample_rate}"
        )));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let successes: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|trial| trend_trial(series, measure, suite, subsample_rate, derive_seed(seed, trial as u64)))
        .collect();
    Ok(successes.iter().filter(|&&s| s).count() as f64 / trials as f64)
}

fn trend_trial(series: &PathwaySeries, measure: Measure, suite: &MeasureSuite, rate: f64, seed: u64) -> bool {
    let mut edges: [Vec<(f64, f64)>; 3] = Default::default();
    for (k, &t) in series.timepoints.iter().enumerate() {
        let vars = &series.samples[k];
        let n = vars[0].len();
        let m = ((rate * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut rng = rng_from_seed(derive_path(seed, &[k as u64, 0]));
        let idx = sample(&mut rng, n, m.min(n)).into_vec();
        for (e, edge) in edges.iter_mut().enumerate() {
            let x: Vec<f64> = idx.iter().map(|&i| vars[e][i]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| vars[e + 1][i]).collect();
            let score = PairedSamples::new(x, y)
                .and_then(|s| suite.score(measure, &s, derive_path(seed, &[k as u64, 1, e as u64])))
                .map_or(FAILED_SCORE, |v| measure.statistic(v));
            edge.push((t, score));
        }
    }
    // A failed score sits below every real one; map it to the lowest finite
    // value so that argmax stays defined.
    let peaks: Vec<f64> = edges
        .iter()
        .map(|e| {
            let finite: Vec<(f64, f64)> = e.iter().map(|&(t, s)| (t, s.max(f64::MIN))).collect();
            argmax_time(&finite).unwrap_or(f64::NAN)
        })
        .collect();
    peaks[0] <= peaks[1] && peaks[1] <= peaks[2]
}

/// Distribution of the chain variables in [`planted_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMarginal {
    /// `U[0, 1]`.
    #[default]
    Uniform,
    /// Standard normal. Isolated tail points make the hc scores of inactive
    /// edges noisy, up to about 0.5 at 100 cells.
    Normal,
}

/// Parameters of [`planted_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub timepoints: usize,
    pub cells: usize,
    /// Timepoint index at which each of the edges `A→B`, `B→C`, `C→D` is active.
    pub peaks: [usize; 3],
    /// Fraction of cells, those with the highest upstream level, that
    /// transmit along an active edge.
    pub active_fraction: f64,
    /// Noise standard deviation on an active edge.
    pub noise_sd: f64,
    pub marginal: ChainMarginal,
    pub seed: u64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            timepoints: 5,
            cells: 1000,
            peaks: [1, 2, 3],
            active_fraction: 0.1,
            noise_sd: 0.01,
            marginal: ChainMarginal::Uniform,
            seed: 0,
        }
    }
}

/// Synthetic pathway series with one active edge per planted peak.
///
/// At every timepoint `A` is drawn from `spec.marginal`. Along an active
/// edge the cells whose upstream value lies in the top `active_fraction` set
/// the downstream value to the upstream value plus Gaussian noise; all other
/// cells, and all cells of an inactive edge, draw the downstream value
/// independently from the marginal.
pub fn planted_chain(spec: &ChainSpec) -> Result<PathwaySeries> {
    if spec.timepoints < 2 || spec.cells < 2 || spec.peaks.iter().any(|&p| p >= spec.timepoints) {
        return Err(Error::InvalidInput(
            "chain needs ≥ 2 timepoints, ≥ 2 cells and peaks inside the range".into(),
        ));
    }
    if !(spec.active_fraction > 0.0 && spec.active_fraction <= 1.0) || !(spec.noise_sd >= 0.0) {
        return Err(Error::Domain(
            "active_fraction must lie in (0, 1] and noise_sd be nonnegative".into(),
        ));
    }
    let n = spec.cells;
    let active = ((spec.active_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut samples = Vec::with_capacity(spec.timepoints);
    for t in 0..spec.timepoints {
        let mut rng = rng_from_seed(derive_seed(spec.seed, t as u64));
        let mut draw = |marginal: ChainMarginal| -> f64 {
            match marginal {
                ChainMarginal::Uniform => rng.random(),
                ChainMarginal::Normal => StandardNormal.sample(&mut rng),
            }
        };
        let mut vars: [Vec<f64>; 4] = Default::default();
        vars[0] = (0..n).map(|_| draw(spec.marginal)).collect();
        for e in 0..3 {
            let up = vars[e].clone();
            let mut down: Vec<f64> = (0..n).map(|_| draw(spec.marginal)).collect();
            let noise: Vec<f64> = (0..n).map(|_| draw(ChainMarginal::Normal)).collect();
            if spec.peaks[e] == t {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| up[b].total_cmp(&up[a]).then(a.cmp(&b)));
                for &i in &order[..active] {
                    down[i] = up[i] + spec.noise_sd * noise[i];
                }
            }
            vars[e + 1] = down;
        }
        samples.push(vars);
    }
    PathwaySeries::new((0..spec.timepoints).map(|t| t as f64).collect(), samples)
}
