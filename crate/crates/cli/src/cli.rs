//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags, parameters or
//! configuration), 1 on data errors (unreadable or malformed input, failed
//! estimation).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hyperco::bounds::{gaussian_mixture_bound, identity_mixture_bound, noisy_identity_bound, noisy_identity_mcor};
use hyperco::estimator::{estimate_hc, estimate_hc_reverse};
use hyperco::measure::{Measure, MeasureSuite};
use hyperco::power::{
    planted_chain, run_power, sweep_over, trend_recovery, ChainSpec, PathwaySeries, PowerConfig, SweepAxis,
};
use hyperco::rng::derive_path;
use hyperco::synth::{generate, FunctionFamily, MixtureSpec, NullLayout};
use hyperco::types::{EstimateResult, PairedSamples};
use serde::{Deserialize, Serialize};

use crate::screen::{remove_and_rescore, screen_pairs, ScreenOptions, ScreenReport};
use crate::table::{load_csv, read_csv, CsvOptions, Table};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "HYPERCO_THREADS";

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "hyperco",
    version,
    about = "Hypercontractivity-based dependence estimation and benchmarks"
)]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; overridden by HYPERCO_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// TOML configuration with optional [suite], [power], [screen] and [pathway] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one column pair with every measure; prints JSON.
    Estimate(EstimateArgs),
    /// Score every column pair of a table; prints CSV.
    Screen(ScreenArgs),
    /// Detection power on synthetic mixtures; prints CSV.
    Power(PowerArgs),
    /// Draw one synthetic mixture dataset; prints CSV with columns x,y.
    Synth(SynthArgs),
    /// Trend-recovery probability over subsampling rates; prints CSV.
    Pathway(PathwayArgs),
    /// Closed-form lower bounds of the rare-correlation examples.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// The input has no header row; columns are named c1, c2, ...
    #[arg(long)]
    no_header: bool,
    /// Cell values read as missing.
    #[arg(long, value_delimiter = ',')]
    missing: Option<Vec<String>>,
}

impl CsvArgs {
    fn options(&self) -> CliResult<CsvOptions> {
        if !self.delimiter.is_ascii() {
            return Err(usage("the delimiter must be an ASCII character"));
        }
        let mut o = CsvOptions {
            delimiter: self.delimiter as u8,
            header: !self.no_header,
            ..CsvOptions::default()
        };
        if let Some(m) = &self.missing {
            o.missing_tokens = m.clone();
        }
        Ok(o)
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// CSV file; `-` or nothing reads standard input.
    input: Option<PathBuf>,
    /// Column used as X (default: first column).
    #[arg(long)]
    x_col: Option<String>,
    /// Column used as Y (default: second column).
    #[arg(long)]
    y_col: Option<String>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    /// CSV file; `-` reads standard input.
    input: PathBuf,
    /// Comma-separated measures (default: all).
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
    /// Pairs with fewer complete rows are skipped.
    #[arg(long)]
    min_complete: Option<usize>,
    /// Order rows by this measure, highest first.
    #[arg(long)]
    sort_by: Option<Measure>,
    /// Rescore one pair `X,Y` while removing outlying rows.
    #[arg(long, value_delimiter = ',')]
    pair: Option<Vec<String>>,
    /// Number of rows removed one at a time with `--pair`.
    #[arg(long, default_value_t = 0, requires = "pair")]
    drop_extreme: usize,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[arg(long)]
    family: Option<FunctionFamily>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Null and correlated datasets per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_null: Option<usize>,
    #[arg(long)]
    n_alt: Option<usize>,
    #[arg(long)]
    fpr: Option<f64>,
    /// Comma-separated measures (default: all).
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
    /// Parameter varied by the sweep: sigma2, alpha or n.
    #[arg(long)]
    sweep_axis: Option<SweepAxis>,
    #[arg(long, value_delimiter = ',')]
    sweep_values: Option<Vec<f64>>,
    /// Dominant block at x in [-0.1, 0] instead of [1, 1.1].
    #[arg(long)]
    mirror: bool,
    /// Null x layout: spread or blocks.
    #[arg(long)]
    null_layout: Option<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    family: FunctionFamily,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    n: usize,
    /// Draw the independent (null) version.
    #[arg(long)]
    independent: bool,
    #[arg(long)]
    mirror: bool,
    #[arg(long)]
    null_layout: Option<String>,
}

#[derive(Debug, Args)]
struct PathwayArgs {
    /// CSV with columns time,a,b,c,d.
    input: Option<PathBuf>,
    /// Use a planted chain instead of an input file.
    #[arg(long, conflicts_with = "input")]
    synthetic: bool,
    /// Cells per timepoint of the planted chain.
    #[arg(long, default_value_t = 1000)]
    cells: usize,
    /// Timepoints of the planted chain.
    #[arg(long, default_value_t = 5)]
    timepoints: usize,
    /// Peak timepoint indices of the three edges of the planted chain.
    #[arg(long, value_delimiter = ',')]
    peaks: Option<Vec<usize>>,
    /// Subsampling rates in (0, 1].
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// 1: Gaussian rare part, 2: identity on k symbols, 3: corrupted identity.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    example: u8,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Print a CSV over a grid of alpha values instead of one number.
    #[arg(long)]
    sweep: bool,
    /// Alpha grid for `--sweep` (default 0.01, 0.02, ..., 1).
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    alphas: Option<Vec<f64>>,
}

/// Contents of the `--config` file. Flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    suite: MeasureSuite,
    power: PowerSection,
    screen: ScreenSection,
    pathway: PathwaySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PowerSection {
    family: Option<String>,
    alpha: Option<f64>,
    sigma2: Option<f64>,
    n: Option<usize>,
    n_null: Option<usize>,
    n_alt: Option<usize>,
    fpr: Option<f64>,
    measures: Option<Vec<String>>,
    sweep_axis: Option<String>,
    sweep_values: Option<Vec<f64>>,
    mirror: Option<bool>,
    null_layout: Option<String>,
    trials_parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScreenSection {
    min_complete: Option<usize>,
    measures: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PathwaySection {
    rates: Option<Vec<f64>>,
    trials: Option<usize>,
    measures: Option<Vec<String>>,
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ConfigFile =
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    cfg.suite.validate().map_err(usage)?;
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr<Err = hyperco::Error>>(v: &[String]) -> CliResult<Vec<T>> {
    v.iter().map(|s| s.parse().map_err(usage)).collect()
}

fn parse_null_layout(s: &str) -> CliResult<NullLayout> {
    match s {
        "spread" => Ok(NullLayout::Spread),
        "blocks" => Ok(NullLayout::Blocks),
        _ => Err(usage(format!("unknown null layout '{s}', expected spread or blocks"))),
    }
}

fn measures_or_all(flag: Option<Vec<Measure>>, config: Option<&Vec<String>>) -> CliResult<Vec<Measure>> {
    let mut list = match (flag, config) {
        (Some(m), _) => m,
        (None, Some(c)) => parse_list(c)?,
        (None, None) => Measure::ALL.to_vec(),
    };
    let mut seen = Vec::new();
    list.retain(|m| {
        let fresh = !seen.contains(m);
        seen.push(*m);
        fresh
    });
    if list.is_empty() {
        return Err(usage("the measure list is empty"));
    }
    Ok(list)
}

/// Shortest decimal form with at most 12 fractional digits.
fn fmt_num(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, bytes).map_err(|e| data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(data)
        }
    }
}

/// Writes `value` as pretty JSON next to `output`, with a `.json` extension.
fn emit_sidecar<T: Serialize>(output: Option<&Path>, value: &T) -> CliResult<()> {
    if let Some(p) = output {
        let side = p.with_extension("json");
        if side == p {
            return Err(usage(format!(
                "{} already ends in .json; choose another output name",
                p.display()
            )));
        }
        let mut text = serde_json::to_string_pretty(value).map_err(data)?;
        text.push('\n');
        std::fs::write(&side, text).map_err(|e| data(format!("cannot write {}: {e}", side.display())))?;
    }
    Ok(())
}

fn read_table(input: Option<&Path>, opts: &CsvOptions) -> CliResult<Table> {
    match input {
        None => read_csv(std::io::stdin().lock(), opts).map_err(data),
        Some(p) if p.as_os_str() == "-" => read_csv(std::io::stdin().lock(), opts).map_err(data),
        Some(p) => load_csv(p, opts).map_err(|e| data(format!("{}: {e}", p.display()))),
    }
}

fn column(t: &Table, name: Option<&str>, default: usize) -> CliResult<usize> {
    match name {
        Some(n) => t
            .column_index(n)
            .ok_or_else(|| data(format!("no column named '{n}'; columns are {}", t.columns().join(", ")))),
        None if default < t.n_cols() => Ok(default),
        None => Err(data(format!("the input needs at least {} columns", default + 1))),
    }
}

/// JSON document printed by `estimate`.
#[derive(Debug, Serialize)]
struct EstimateReport {
    x: String,
    y: String,
    n: usize,
    seed: u64,
    hc: Option<EstimateResult>,
    hc_reverse: Option<EstimateResult>,
    pearson: Option<f64>,
    dcor: Option<f64>,
    mcor: Option<f64>,
    mic_approx: Option<f64>,
    /// Measure name to error message, for measures that failed.
    errors: std::collections::BTreeMap<String, String>,
}

fn run_estimate(a: EstimateArgs, g: &Globals) -> CliResult<()> {
    let t = read_table(a.input.as_deref(), &a.csv.options()?)?;
    let xi = column(&t, a.x_col.as_deref(), 0)?;
    let yi = column(&t, a.y_col.as_deref(), 1)?;
    let (x, y) = t.complete_pair(xi, yi);
    let s = PairedSamples::new(x, y).map_err(data)?;
    let suite = &g.config.suite;
    let opt = hyperco::estimator::OptimizerConfig {
        seed: g.seed,
        ..suite.optimizer
    };
    let mut errors = std::collections::BTreeMap::new();
    let mut keep = |m: Measure, r: hyperco::Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.insert(m.name().to_string(), e.to_string());
            None
        }
    };
    let hc = estimate_hc(&s, &suite.kde, &opt);
    let hc_reverse = estimate_hc_reverse(&s, &suite.kde, &opt);
    let pearson = keep(Measure::Pearson, suite.score(Measure::Pearson, &s, g.seed));
    let dcor = keep(Measure::Dcor, suite.score(Measure::Dcor, &s, g.seed));
    let mcor = keep(Measure::Mcor, suite.score(Measure::Mcor, &s, g.seed));
    let mic = keep(Measure::Mic, suite.score(Measure::Mic, &s, g.seed));
    let mut split = |m: Measure, r: hyperco::Result<EstimateResult>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.insert(m.name().to_string(), e.to_string());
            None
        }
    };
    let hc = split(Measure::Hc, hc);
    let hc_reverse = split(Measure::HcReverse, hc_reverse);
    let report = EstimateReport {
        x: t.columns()[xi].clone(),
        y: t.columns()[yi].clone(),
        n: s.len(),
        seed: g.seed,
        hc,
        hc_reverse,
        pearson,
        dcor,
        mcor,
        mic_approx: mic,
        errors,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(data)?;
    text.push('\n');
    emit(g.output.as_deref(), text.as_bytes())
}

fn run_screen(a: ScreenArgs, g: &Globals) -> CliResult<()> {
    let opts = ScreenOptions {
        measures: measures_or_all(a.measures, g.config.screen.measures.as_ref())?,
        min_complete: a.min_complete.or(g.config.screen.min_complete).unwrap_or(30),
        seed: g.seed,
        suite: g.config.suite,
    };
    let t = read_table(Some(&a.input), &a.csv.options()?)?;
    let mut report = match &a.pair {
        Some(p) => {
            if p.len() != 2 {
                return Err(usage("--pair takes two column names, X,Y"));
            }
            let x = column(&t, Some(&p[0]), 0)?;
            let y = column(&t, Some(&p[1]), 1)?;
            ScreenReport {
                rows: remove_and_rescore(&t, x, y, a.drop_extreme, &opts).map_err(data)?,
                skipped: Vec::new(),
            }
        }
        None => screen_pairs(&t, &opts).map_err(data)?,
    };
    if let Some(m) = a.sort_by {
        report.rows = report.sorted_by(m).into_iter().cloned().collect();
    }
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(data)?;
    emit(g.output.as_deref(), &buf)
}

fn power_config(a: PowerArgs, g: &Globals) -> CliResult<PowerConfig> {
    let c = &g.config.power;
    let family = match (a.family, &c.family) {
        (Some(f), _) => f,
        (None, Some(f)) => f.parse().map_err(usage)?,
        (None, None) => return Err(usage("--family is required (or power.family in the config)")),
    };
    let need = |v: Option<f64>, cv: Option<f64>, name: &str| {
        v.or(cv)
            .ok_or_else(|| usage(format!("--{name} is required (or power.{name} in the config)")))
    };
    let alpha = need(a.alpha, c.alpha, "alpha")?;
    let sigma2 = need(a.sigma2, c.sigma2, "sigma2")?;
    let n =
        a.n.or(c.n)
            .ok_or_else(|| usage("--n is required (or power.n in the config)"))?;
    let mut base = MixtureSpec::new(family, alpha, sigma2, n, true, 0);
    base.mirror = a.mirror || c.mirror.unwrap_or(false);
    if let Some(l) = a.null_layout.as_ref().or(c.null_layout.as_ref()) {
        base.null_layout = parse_null_layout(l)?;
    }
    let measures = measures_or_all(a.measures, c.measures.as_ref())?;
    let mut cfg = PowerConfig::new(base, measures);
    cfg.n_null = a.n_null.or(a.trials).or(c.n_null).unwrap_or(cfg.n_null);
    cfg.n_alt = a.n_alt.or(a.trials).or(c.n_alt).unwrap_or(cfg.n_alt);
    cfg.fpr = a.fpr.or(c.fpr).unwrap_or(cfg.fpr);
    cfg.seed = g.seed;
    cfg.suite = g.config.suite;
    cfg.trials_parallel = c.trials_parallel.unwrap_or(true);
    let axis = match (a.sweep_axis, &c.sweep_axis) {
        (Some(x), _) => Some(x),
        (None, Some(x)) => Some(x.parse().map_err(usage)?),
        (None, None) => None,
    };
    let values = a.sweep_values.or_else(|| c.sweep_values.clone());
    match (axis, values) {
        (Some(axis), Some(v)) if !v.is_empty() => cfg.sweep = sweep_over(base, axis, &v),
        (None, None) => {}
        _ => return Err(usage("--sweep-axis and --sweep-values go together")),
    }
    if cfg.sweep.iter().any(|p| !p.value.is_finite()) {
        return Err(usage("sweep values must be finite"));
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct PowerSidecar<'a> {
    config: &'a PowerConfig,
    report: &'a hyperco::power::PowerReport,
}

fn run_power_cmd(a: PowerArgs, g: &Globals) -> CliResult<()> {
    let cfg = power_config(a, g)?;
    let report = run_power(&cfg).map_err(data)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(data)?;
    emit(g.output.as_deref(), &buf)?;
    emit_sidecar(
        g.output.as_deref(),
        &PowerSidecar {
            config: &cfg,
            report: &report,
        },
    )
}

fn run_synth(a: SynthArgs, g: &Globals) -> CliResult<()> {
    let mut spec = MixtureSpec::new(a.family, a.alpha, a.sigma2, a.n, !a.independent, g.seed);
    spec.mirror = a.mirror;
    if let Some(l) = &a.null_layout {
        spec.null_layout = parse_null_layout(l)?;
    }
    spec.validate().map_err(usage)?;
    let s = generate(&spec).map_err(data)?;
    let t = Table::from_columns(vec![("x".into(), s.x().to_vec()), ("y".into(), s.y().to_vec())]).map_err(data)?;
    let mut buf = Vec::new();
    crate::table::write_csv(&t, &mut buf).map_err(data)?;
    emit(g.output.as_deref(), &buf)?;
    emit_sidecar(g.output.as_deref(), &spec)
}

fn pathway_series(a: &PathwayArgs, g: &Globals) -> CliResult<PathwaySeries> {
    if a.synthetic {
        let mut spec = ChainSpec {
            timepoints: a.timepoints,
            cells: a.cells,
            seed: g.seed,
            ..ChainSpec::default()
        };
        if let Some(p) = &a.peaks {
            let [x, y, z] = p[..] else {
                return Err(usage("--peaks takes three timepoint indices"));
            };
            spec.peaks = [x, y, z];
        }
        return planted_chain(&spec).map_err(usage);
    }
    let Some(input) = &a.input else {
        return Err(usage("pathway needs an input CSV or --synthetic"));
    };
    let t = read_table(Some(input), &a.csv.options()?)?;
    let idx: Vec<usize> = match ["time", "a", "b", "c", "d"].map(|n| t.column_index(n)) {
        [Some(t0), Some(a0), Some(b0), Some(c0), Some(d0)] => vec![t0, a0, b0, c0, d0],
        _ if t.n_cols() == 5 => (0..5).collect(),
        _ => return Err(data("pathway input needs columns time,a,b,c,d")),
    };
    let mut rows = Vec::with_capacity(t.n_rows());
    for r in 0..t.n_rows() {
        let cell = |c: usize| {
            t.cell(r, idx[c])
                .ok_or_else(|| data(format!("missing value in data row {}", r + 1)))
        };
        rows.push((cell(0)?, [cell(1)?, cell(2)?, cell(3)?, cell(4)?]));
    }
    PathwaySeries::from_rows(&rows).map_err(data)
}

fn run_pathway(a: PathwayArgs, g: &Globals) -> CliResult<()> {
    let c = &g.config.pathway;
    let rates = a
        .rates
        .clone()
        .or_else(|| c.rates.clone())
        .unwrap_or_else(|| vec![0.1, 0.25, 0.5, 1.0]);
    if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(usage("rates must lie in (0, 1]"));
    }
    let trials = a.trials.or(c.trials).unwrap_or(20);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let measures = measures_or_all(a.measures.clone(), c.measures.as_ref())?;
    let series = pathway_series(&a, g)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["measure", "rate", "trials", "success_probability"])
        .map_err(data)?;
    for (mi, &m) in measures.iter().enumerate() {
        for (ri, &rate) in rates.iter().enumerate() {
            let seed = derive_path(g.seed, &[mi as u64, ri as u64]);
            let p = trend_recovery(&series, m, &g.config.suite, rate, trials, seed).map_err(data)?;
            w.write_record([
                m.label().to_string(),
                rate.to_string(),
                trials.to_string(),
                p.to_string(),
            ])
            .map_err(data)?;
        }
    }
    let buf = w.into_inner().map_err(data)?;
    emit(g.output.as_deref(), &buf)
}

/// `(s lower bound, mixture mCor)` of one example at one `alpha`.
fn bound_values(a: &BoundsArgs, alpha: f64) -> CliResult<(f64, f64)> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| usage(format!("example {} needs --{name}", a.example)));
    let k = || a.k.ok_or_else(|| usage(format!("example {} needs --k", a.example)));
    let r = match a.example {
        1 => {
            let rho = need(a.rho, "rho")?;
            gaussian_mixture_bound(rho, alpha).map(|b| (b, alpha.sqrt() * rho.abs()))
        }
        2 => {
            let k = k()?;
            identity_mixture_bound(k, alpha).and_then(|b| Ok((b, noisy_identity_mcor(k, alpha, 0.0)?)))
        }
        _ => {
            let (k, eps) = (k()?, need(a.eps, "eps")?);
            noisy_identity_bound(k, alpha, eps).and_then(|b| Ok((b, noisy_identity_mcor(k, alpha, eps)?)))
        }
    };
    r.map_err(usage)
}

fn run_bounds(a: BoundsArgs, g: &Globals) -> CliResult<()> {
    if !a.sweep {
        let alpha = a.alpha.ok_or_else(|| usage("--alpha is required without --sweep"))?;
        let (b, _) = bound_values(&a, alpha)?;
        return emit(g.output.as_deref(), format!("{}\n", fmt_num(b)).as_bytes());
    }
    let grid = a
        .alphas
        .clone()
        .unwrap_or_else(|| (1..=100).map(|i| i as f64 / 100.0).collect());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["example", "rho", "k", "eps", "alpha", "s_lower_bound", "mixture_mcor"])
        .map_err(data)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for &alpha in &grid {
        let (b, m) = bound_values(&a, alpha)?;
        w.write_record([
            a.example.to_string(),
            opt(a.rho.filter(|_| a.example == 1).map(|v| v.to_string())),
            opt(a.k.filter(|_| a.example != 1).map(|v| v.to_string())),
            opt(a.eps.filter(|_| a.example == 3).map(|v| v.to_string())),
            alpha.to_string(),
            fmt_num(b),
            fmt_num(m),
        ])
        .map_err(data)?;
    }
    let buf = w.into_inner().map_err(data)?;
    emit(g.output.as_deref(), &buf)
}

struct Globals {
    seed: u64,
    output: Option<PathBuf>,
    config: ConfigFile,
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        ),
        _ => flag,
    };
    if n == Some(0) {
        return Err(usage("the thread count must be at least 1"));
    }
    Ok(n)
}

fn run(cli: Cli) -> CliResult<()> {
    let g = Globals {
        seed: cli.seed,
        output: cli.output,
        config: load_config(cli.config.as_deref())?,
    };
    let command = cli.command;
    let work = move || match command {
        Command::Estimate(a) => run_estimate(a, &g),
        Command::Screen(a) => run_screen(a, &g),
        Command::Power(a) => run_power_cmd(a, &g),
        Command::Synth(a) => run_synth(a, &g),
        Command::Pathway(a) => run_pathway(a, &g),
        Command::Bounds(a) => run_bounds(a, &g),
    };
    match thread_count(cli.threads)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(data)?
            .install(work),
        None => work(),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}
