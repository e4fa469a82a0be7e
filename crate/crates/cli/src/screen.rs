//! Pairwise screening of table columns with every dependence measure.
//!
//! Each unordered column pair is scored once on its pairwise-complete rows
//! and reported as two ordered rows. For the ordered pair `x → y`, `hc` is
//! the estimate of `s(x; y)` and `hc_reverse` that of `s(y; x)`.

use std::io::Write;

use hyperco::measure::{Measure, MeasureSuite};
use hyperco::rng::derive_path;
use hyperco::types::PairedSamples;
use hyperco::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenOptions {
    pub measures: Vec<Measure>,
    /// Pairs with fewer complete rows are skipped.
    pub min_complete: usize,
    pub seed: u64,
    pub suite: MeasureSuite,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            measures: Measure::ALL.to_vec(),
            min_complete: 30,
            seed: 0,
            suite: MeasureSuite::default(),
        }
    }
}

/// Scores of one ordered pair. Measures that were not requested or that
/// failed are `None`; failures are listed in `errors`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenRow {
    pub x: String,
    pub y: String,
    pub n_complete: usize,
    pub hc: Option<f64>,
    pub hc_reverse: Option<f64>,
    pub pearson: Option<f64>,
    pub dcor: Option<f64>,
    pub mcor: Option<f64>,
    pub mic: Option<f64>,
    pub errors: Vec<String>,
}

impl ScreenRow {
    pub fn get(&self, m: Measure) -> Option<f64> {
        match m {
            Measure::Hc => self.hc,
            Measure::HcReverse => self.hc_reverse,
            Measure::Pearson => self.pearson,
            Measure::Dcor => self.dcor,
            Measure::Mcor => self.mcor,
            Measure::Mic => self.mic,
        }
    }

    fn set(&mut self, m: Measure, v: Option<f64>) {
        let slot = match m {
            Measure::Hc => &mut self.hc,
            Measure::HcReverse => &mut self.hc_reverse,
            Measure::Pearson => &mut self.pearson,
            Measure::Dcor => &mut self.dcor,
            Measure::Mcor => &mut self.mcor,
            Measure::Mic => &mut self.mic,
        };
        *slot = v;
    }

    /// The same scores seen from `y → x`.
    fn reversed(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            hc: self.hc_reverse,
            hc_reverse: self.hc,
            ..self.clone()
        }
    }
}

/// An ordered pair that was not scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPair {
    pub x: String,
    pub y: String,
    pub n_complete: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScreenReport {
    pub rows: Vec<ScreenRow>,
    pub skipped: Vec<SkippedPair>,
}

impl ScreenReport {
    /// Rows ordered by `m`, highest first; rows without that score go last.
    pub fn sorted_by(&self, m: Measure) -> Vec<&ScreenRow> {
        let mut v: Vec<&ScreenRow> = self.rows.iter().collect();
        v.sort_by(|a, b| {
            let key = |r: &ScreenRow| r.get(m).map_or(f64::NEG_INFINITY, |s| m.statistic(s));
            key(b).total_cmp(&key(a))
        });
        v
    }

    pub const CSV_HEADER: [&'static str; 11] = [
        "x",
        "y",
        "n_complete",
        "status",
        "hc",
        "hc_reverse",
        "pearson",
        "dcor",
        "mcor",
        "mic_approx",
        "note",
    ];

    /// Every ordered pair, scored or skipped, flagged in the `status` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            let status = if r.errors.is_empty() { "ok" } else { "partial" };
            w.write_record([
                r.x.clone(),
                r.y.clone(),
                r.n_complete.to_string(),
                status.to_string(),
                fmt(r.hc),
                fmt(r.hc_reverse),
                fmt(r.pearson),
                fmt(r.dcor),
                fmt(r.mcor),
                fmt(r.mic),
                r.errors.join("; "),
            ])?;
        }
        for s in &self.skipped {
            let mut rec = vec![
                s.x.clone(),
                s.y.clone(),
                s.n_complete.to_string(),
                "skipped".to_string(),
            ];
            rec.extend(std::iter::repeat_n(String::new(), 6));
            rec.push(s.reason.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores the pair `(a, b)` of `x`/`y` samples as the ordered row `a → b`.
///
/// Estimator seeds depend only on the unordered column pair, so `a → b`
/// and `b → a` are two views of one computation.
fn score_samples(s: &PairedSamples, names: (&str, &str), cols: (usize, usize), opts: &ScreenOptions) -> ScreenRow {
    let (lo, hi) = (cols.0.min(cols.1), cols.0.max(cols.1));
    let pair_seed = derive_path(opts.seed, &[lo as u64, hi as u64]);
    let mut row = ScreenRow {
        x: names.0.to_string(),
        y: names.1.to_string(),
        n_complete: s.len(),
        hc: None,
        hc_reverse: None,
        pearson: None,
        dcor: None,
        mcor: None,
        mic: None,
        errors: Vec::new(),
    };
    // Canonical orientation: low column index as x.
    let flipped = cols.0 > cols.1;
    let canon = if flipped { s.swapped() } else { s.clone() };
    for &m in &opts.measures {
        let seed = derive_path(pair_seed, &[m as u64]);
        match opts.suite.score(m, &canon, seed) {
            Ok(v) => row.set(m, Some(v)),
            Err(e) => row.errors.push(format!("{}: {e}", m.name())),
        }
    }
    if flipped {
        let r = row.reversed();
        ScreenRow {
            x: row.x,
            y: row.y,
            ..r
        }
    } else {
        row
    }
}

/// Pairwise-complete samples of columns `a` and `b`.
fn pair_samples(t: &Table, a: usize, b: usize) -> (usize, Result<PairedSamples>) {
    let (x, y) = t.complete_pair(a, b);
    let n = x.len();
    (n, PairedSamples::new(x, y))
}

/// Screens every ordered pair of distinct columns of `t`.
pub fn screen_pairs(t: &Table, opts: &ScreenOptions) -> Result<ScreenReport> {
    opts.suite.validate()?;
    if t.n_cols() < 2 {
        return Err(Error::InvalidInput("screening needs at least 2 columns".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..t.n_cols())
        .flat_map(|a| (a + 1..t.n_cols()).map(move |b| (a, b)))
        .collect();
    let results: Vec<std::result::Result<ScreenRow, SkippedPair>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let names = (t.columns()[a].as_str(), t.columns()[b].as_str());
            let (n, s) = pair_samples(t, a, b);
            let skip = |reason: String| SkippedPair {
                x: names.0.to_string(),
                y: names.1.to_string(),
                n_complete: n,
                reason,
            };
            if n < opts.min_complete {
                return Err(skip(format!(
                    "{n} complete rows, below the minimum of {}",
                    opts.min_complete
                )));
            }
            match s {
                Ok(s) => Ok(score_samples(&s, names, (a, b), opts)),
                Err(e) => Err(skip(e.to_string())),
            }
        })
        .collect();
    let mut report = ScreenReport::default();
    for r in results {
        match r {
            Ok(row) => {
                let rev = row.reversed();
                report.rows.push(row);
                report.rows.push(rev);
            }
            Err(s) => {
                let rev = SkippedPair {
                    x: s.y.clone(),
                    y: s.x.clone(),
                    ..s.clone()
                };
                report.skipped.push(s);
                report.skipped.push(rev);
            }
        }
    }
    Ok(report)
}

/// Robust center and scale of `v`: median and normalized MAD, falling back
/// to the standard deviation, then to 1, when the spread is zero.
fn median_scale(v: &[f64]) -> (f64, f64) {
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let mut w = v.to_vec();
    let med = median(&mut w);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let mad = 1.4826 * median(&mut dev);
    if mad > 0.0 {
        return (med, mad);
    }
    let sd = hyperco::density::sample_std(v);
    (med, if sd > 0.0 { sd } else { 1.0 })
}

/// Scores the ordered pair `x → y` repeatedly, removing after each score the
/// sample farthest from the coordinate-wise median in robustly standardized
/// units. Returns `drop_extreme + 1` rows, starting with the full data.
pub fn remove_and_rescore(
    t: &Table,
    x: usize,
    y: usize,
    drop_extreme: usize,
    opts: &ScreenOptions,
) -> Result<Vec<ScreenRow>> {
    opts.suite.validate()?;
    if x >= t.n_cols() || y >= t.n_cols() || x == y {
        return Err(Error::InvalidInput(format!("invalid column pair ({x}, {y})")));
    }
    let (mut xs, mut ys) = t.complete_pair(x, y);
    if drop_extreme >= xs.len() {
        return Err(Error::InvalidInput(format!(
            "cannot drop {drop_extreme} of {} complete rows",
            xs.len()
        )));
    }
    let names = (t.columns()[x].as_str(), t.columns()[y].as_str());
    let mut out = Vec::with_capacity(drop_extreme + 1);
    for step in 0..=drop_extreme {
        let row = match PairedSamples::new(xs.clone(), ys.clone()) {
            Ok(s) => score_samples(&s, names, (x, y), opts),
            Err(e) => ScreenRow {
                x: names.0.to_string(),
                y: names.1.to_string(),
                n_complete: xs.len(),
                hc: None,
                hc_reverse: None,
                pearson: None,
                dcor: None,
                mcor: None,
                mic: None,
                errors: vec![e.to_string()],
            },
        };
        out.push(row);
        if step == drop_extreme {
            break;
        }
        let (cx, sx) = median_scale(&xs);
        let (cy, sy) = median_scale(&ys);
        let dist = |i: usize| ((xs[i] - cx) / sx).hypot((ys[i] - cy) / sy);
        let far = (0..xs.len())
            .reduce(|a, b| if dist(b) > dist(a) { b } else { a })
            .unwrap_or(0);
        xs.remove(far);
        ys.remove(far);
    }
    Ok(out)
}
