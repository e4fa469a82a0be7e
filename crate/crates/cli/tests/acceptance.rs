//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use hyperco::bounds::identity_mixture_bound;
use hyperco::density::{estimate_ratio_matrix, KdeConfig};
use hyperco::estimator::{estimate_from_matrix, estimate_hc, evaluate, gradient, objective, project, OptimizerConfig};
use hyperco::measure::{Measure, MeasureSuite};
use hyperco::oracle::{
    corrupted_identity, exact_ratio_matrix, identity_joint, mcor_exact, rare_mixture, s_exact, tensorize_check,
    QuantGrid,
};
use hyperco::power::{planted_chain, trend_recovery, ChainSpec};
use hyperco::rng::rng_from_seed;
use hyperco::synth::{generate, FunctionFamily, MixtureSpec};
use hyperco::types::{DiscreteJoint, PairedSamples, WeightVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

const BIN: &str = env!("CARGO_BIN_EXE_hyperco");
const DELTA: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    0.5 * (v[(k - 1) / 2] + v[k / 2])
}

fn hc(s: &PairedSamples, seed: u64) -> f64 {
    estimate_hc(s, &KdeConfig::default(), &OptimizerConfig::with_seed(seed)).map_or(f64::NAN, |r| r.value)
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gaussian_value() -> Outcome {
    let values: Vec<f64> = (0..10)
        .map(|seed| {
            let mut rng = rng_from_seed(seed);
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for _ in 0..2000 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                x.push(a);
                y.push(0.8 * a + 0.6 * b);
            }
            hc(&PairedSamples::new(x, y).unwrap(), seed)
        })
        .collect();
    let m = median(values.clone());
    check((0.49..=0.79).contains(&m), format!("median {m:.3} of {}", fmt(&values)))
}

fn uniform_columns(seed: u64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let x = (0..n).map(|_| rng.random()).collect();
    let y = (0..n).map(|_| rng.random()).collect();
    (x, y)
}

fn independence() -> Outcome {
    let values: Vec<f64> = (0..10)
        .map(|seed| {
            let (x, y) = uniform_columns(seed, 500);
            hc(&PairedSamples::new(x, y).unwrap(), seed)
        })
        .collect();
    let low = values.iter().filter(|&&v| v < 0.15).count();
    check(low >= 9, format!("{low}/10 below 0.15: {}", fmt(&values)))
}

fn determinism() -> Outcome {
    let values: Vec<f64> = (0..10)
        .map(|seed| {
            let (x, _) = uniform_columns(seed, 500);
            hc(&PairedSamples::new(x.clone(), x).unwrap(), seed)
        })
        .collect();
    let high = values.iter().filter(|&&v| v > 0.7).count();
    check(high >= 9, format!("{high}/10 above 0.7: {}", fmt(&values)))
}

fn table_row() -> Outcome {
    let run = |correlated: bool| {
        median(
            (0..10)
                .map(|seed| {
                    let spec = MixtureSpec::new(FunctionFamily::Linear, 0.05, 0.03, 320, correlated, seed);
                    hc(&generate(&spec).unwrap(), seed)
                })
                .collect(),
        )
    };
    let (dep, indep) = (run(true), run(false));
    check(
        dep - indep >= 0.05 && (0.08..=0.28).contains(&dep) && (0.0..=0.18).contains(&indep),
        format!("dependent {dep:.3}, independent {indep:.3}"),
    )
}

fn random_joint(rng: &mut impl Rng, kx: usize, ky: usize) -> DiscreteJoint {
    let rows = (0..kx)
        .map(|_| (0..ky).map(|_| rng.random_range(0.02..1.0)).collect())
        .collect();
    DiscreteJoint::from_weights(rows).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = rng_from_seed(500);
    let grid = QuantGrid::default();
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let j = random_joint(&mut rng, 3, 3);
        let oracle = s_exact(&j, &grid).map_err(|e| e.to_string())?;
        let samples = j.sample(1000, &mut rng_from_seed(600 + k));
        let a = exact_ratio_matrix(&j, &samples, 1e-12).map_err(|e| e.to_string())?;
        let est = estimate_from_matrix(&a, &OptimizerConfig::with_seed(k))
            .map_err(|e| e.to_string())?
            .value;
        worst = worst.max((est - oracle).abs());
    }
    check(worst <= DELTA + 0.05, format!("largest gap {worst:.4} over 20 joints"))
}

fn bound_consistency() -> Outcome {
    let grid = QuantGrid::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [2, 3] {
        for alpha in [0.25, 0.5] {
            let s = s_exact(&rare_mixture(&identity_joint(k).unwrap(), alpha).unwrap(), &grid)
                .map_err(|e| e.to_string())?;
            let b = identity_mixture_bound(k, alpha).unwrap();
            ok &= s >= b - 2.0 * DELTA;
            notes.push(format!("k={k} a={alpha}: {s:.3} vs {b:.3}"));
        }
    }
    for (k, eps) in [(2, 0.1), (3, 0.2), (5, 0.05)] {
        let m = mcor_exact(&corrupted_identity(k, eps).unwrap()).unwrap();
        let want = 1.0 - k as f64 * eps / (k as f64 - 1.0);
        ok &= (m - want).abs() <= 1e-9;
        notes.push(format!("mcor k={k} eps={eps}: {:.1e} off", (m - want).abs()));
    }
    check(ok, notes.join("; "))
}

fn mixture_scalings() -> Outcome {
    let grid = QuantGrid::default();
    let mut rng = rng_from_seed(700);
    let mut worst_mcor: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for alpha in [0.1, 0.3, 0.6] {
        let rare = random_joint(&mut rng, 2, 3);
        let mix = rare_mixture(&rare, alpha).unwrap();
        worst_mcor = worst_mcor.max((mcor_exact(&mix).unwrap() - alpha.sqrt() * mcor_exact(&rare).unwrap()).abs());
        let lhs = s_exact(&mix.swapped(), &grid).map_err(|e| e.to_string())?;
        let rhs = alpha * s_exact(&rare.swapped(), &grid).map_err(|e| e.to_string())?;
        worst_s = worst_s.max((lhs - rhs).abs());
    }
    check(
        worst_mcor <= 1e-6 && worst_s <= 2.0 * DELTA + 1e-3,
        format!("mcor gap {worst_mcor:.1e}, reverse s gap {worst_s:.4}"),
    )
}

fn tensorization() -> Outcome {
    let j = DiscreteJoint::new(vec![vec![0.4, 0.1], vec![0.1, 0.4]]).unwrap();
    let (one, two) = tensorize_check(&j, &QuantGrid::default()).map_err(|e| e.to_string())?;
    check(
        (one - two).abs() <= 2.0 * DELTA + 1e-3,
        format!("s = {one:.4}, s(j ⊗ j) = {two:.4}"),
    )
}

fn power_column(csv_text: &str, measure: &str) -> Option<f64> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().ok()?.clone();
    let mi = headers.iter().position(|h| h == "measure")?;
    let pi = headers.iter().position(|h| h == "power")?;
    rdr.records()
        .filter_map(|r| r.ok())
        .find(|r| &r[mi] == measure)
        .and_then(|r| r[pi].parse().ok())
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok(o.stdout)
}

fn power_test() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let step_args = [
        "power",
        "--family",
        "step",
        "--alpha",
        "0.05",
        "--sigma2",
        "0.1",
        "--n",
        "320",
        "--trials",
        "100",
        "--measures",
        "hc,pearson,dcor",
        "--seed",
        "7",
        "-o",
    ];
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        run_cli(&[&step_args[..], &[path.to_str().unwrap()]].concat())?;
        outputs.push(std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
    }
    let same = outputs[0] == outputs[1];
    let get = |m: &str| power_column(&outputs[0], m).unwrap_or(f64::NAN);
    let (h, p, d) = (get("hc"), get("pearson"), get("dcor"));
    let sine = String::from_utf8(run_cli(&[
        "power",
        "--family",
        "sin16pi",
        "--alpha",
        "0.05",
        "--sigma2",
        "0.1",
        "--n",
        "320",
        "--trials",
        "100",
        "--measures",
        "pearson",
        "--seed",
        "7",
    ])?)
    .map_err(|e| e.to_string())?;
    let ps = power_column(&sine, "pearson").unwrap_or(f64::NAN);
    check(
        same && h >= p && h >= d && (0.0..=0.15).contains(&ps),
        format!("step: hc {h}, pearson {p}, dcor {d}; sin16pi pearson {ps}; reruns identical: {same}"),
    )
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut seed = 0u64;
    while points < 20 {
        seed += 1;
        let mut rng = rng_from_seed(800 + seed);
        let x: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        let a = estimate_ratio_matrix(&PairedSamples::new(x, y).unwrap(), &KdeConfig::default())
            .map_err(|e| e.to_string())?;
        let noise = Normal::new(1.0, 0.4).unwrap();
        let w = project(&(0..30).map(|_| noise.sample(&mut rng)).collect::<Vec<_>>());
        if w.iter().any(|&v| v <= 1e-3) || evaluate(&w, &a, 1e-4).is_err() {
            continue;
        }
        let g = gradient(&w, &a).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..30 {
            let at = |delta: f64| {
                let mut v = w.as_slice().to_vec();
                v[i] += delta;
                objective(&WeightVector::new(v).unwrap(), &a).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            err += (fd - g[i]).powi(2);
            norm += g[i] * g[i];
        }
        worst = worst.max((err / norm).sqrt());
        points += 1;
    }
    check(worst < 1e-4, format!("largest relative error {worst:.2e} at 20 points"))
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();
    let grid = QuantGrid::default();
    let mut rng = rng_from_seed(900);
    for _ in 0..30 {
        let (kx, ky) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let j = random_joint(&mut rng, kx, ky);
        let s = s_exact(&j, &grid).map_err(|e| e.to_string())?;
        let m = mcor_exact(&j).map_err(|e| e.to_string())?;
        if s < m * m - 1e-9 {
            failures.push(format!("mcor² {:.4} > s {s:.4}", m * m));
        }
    }
    let kde = KdeConfig::default();
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(950 + seed);
        let c: f64 = rng.random_range(-2.0..2.0);
        let x: Vec<f64> = (0..40).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v + rng.random::<f64>()).collect();
        let s = PairedSamples::new(x.clone(), y.clone()).unwrap();
        let quick = |r: usize| OptimizerConfig {
            restarts: r,
            max_iters: 60,
            ..OptimizerConfig::with_seed(seed)
        };
        let few = estimate_hc(&s, &kde, &quick(2)).map_err(|e| e.to_string())?;
        let many = estimate_hc(&s, &kde, &quick(5)).map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&few.value) || !(0.0..=1.0).contains(&many.value) {
            failures.push(format!("estimate outside [0, 1]: {} / {}", few.value, many.value));
        }
        if many.best_objective < few.best_objective {
            failures.push(format!("more restarts lowered the objective on seed {seed}"));
        }
        let (hx, hy) = kde.bandwidths(&s).map_err(|e| e.to_string())?;
        let (sa, sb, sc, sd) = (
            rng.random_range(0.2..5.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.2..5.0),
            rng.random_range(-3.0..3.0),
        );
        let t = PairedSamples::new(
            x.iter().map(|v| sa * v + sb).collect(),
            y.iter().map(|v| sc * v + sd).collect(),
        )
        .unwrap();
        let tight = OptimizerConfig {
            max_iters: 5000,
            tol: 1e-13,
            ..OptimizerConfig::with_seed(seed)
        };
        let before = estimate_hc(&s, &KdeConfig::fixed(hx, hy), &tight)
            .map_err(|e| e.to_string())?
            .value;
        let after = estimate_hc(&t, &KdeConfig::fixed(sa * hx, sc * hy), &tight)
            .map_err(|e| e.to_string())?
            .value;
        if (before - after).abs() >= 1e-6 {
            failures.push(format!(
                "affine map moved the estimate by {:.1e}",
                (before - after).abs()
            ));
        }
    }
    failures.extend(cli_reproducibility()?);
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "all properties hold".into()
        } else {
            failures.join("; ")
        },
    )
}

/// Runs every seeded subcommand twice and lists those whose bytes differ.
fn cli_reproducibility() -> Result<Vec<String>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.csv");
    let mut text = String::from("a,b,c\n");
    let mut rng = rng_from_seed(990);
    for _ in 0..80 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        text.push_str(&format!("{a},{},{b}\n", a * a + 0.1 * b));
    }
    std::fs::write(&data, text).map_err(|e| e.to_string())?;
    let data = data.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["estimate", data, "--seed", "3"],
        vec!["screen", data, "--seed", "3"],
        vec!["screen", data, "--pair", "a,b", "--drop-extreme", "2", "--seed", "3"],
        vec![
            "synth", "--family", "circle", "--alpha", "0.3", "--sigma2", "0.05", "--n", "100", "--seed", "3",
        ],
        vec![
            "power",
            "--family",
            "quadratic",
            "--alpha",
            "0.2",
            "--sigma2",
            "0.1",
            "--n",
            "60",
            "--trials",
            "20",
            "--seed",
            "3",
        ],
        vec![
            "pathway",
            "--synthetic",
            "--cells",
            "200",
            "--rates",
            "0.5",
            "--trials",
            "3",
            "--seed",
            "3",
        ],
        vec![
            "bounds",
            "--example",
            "3",
            "--k",
            "4",
            "--eps",
            "0.1",
            "--sweep",
            "--alphas",
            "0.1,0.5",
        ],
    ];
    let mut diffs = Vec::new();
    for args in runs {
        let (first, second) = (run_cli(&args)?, run_cli(&args)?);
        if first != second {
            diffs.push(format!("{} output differs between runs", args[0]));
        }
    }
    Ok(diffs)
}

fn pathway() -> Outcome {
    let series = planted_chain(&ChainSpec::default()).map_err(|e| e.to_string())?;
    let suite = MeasureSuite::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for m in Measure::ALL {
        let trials = if matches!(m, Measure::Hc | Measure::HcReverse) {
            2
        } else {
            20
        };
        let p = trend_recovery(&series, m, &suite, 1.0, trials, 1).map_err(|e| e.to_string())?;
        ok &= p == 1.0;
        notes.push(format!("{}@1 {p}", m.name()));
    }
    let hc = trend_recovery(&series, Measure::Hc, &suite, 0.1, 20, 2).map_err(|e| e.to_string())?;
    let pearson = trend_recovery(&series, Measure::Pearson, &suite, 0.1, 20, 2).map_err(|e| e.to_string())?;
    ok &= hc >= pearson;
    notes.push(format!("at 0.1: hc {hc}, pearson {pearson}"));
    check(ok, notes.join(", "))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("1 gaussian value", gaussian_value),
        ("2 independence", independence),
        ("3 determinism", determinism),
        ("4 linear table row", table_row),
        ("5 oracle equivalence", oracle_equivalence),
        ("6 bound consistency", bound_consistency),
        ("7 mixture scalings", mixture_scalings),
        ("8 tensorization", tensorization),
        ("9 power test", power_test),
        ("10 gradient", gradient_check),
        ("11 property suites", property_suites),
        ("12 pathway", pathway),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        total += took;
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({:.1}s)", took.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({:.1}s)", took.as_secs_f64());
            }
        }
    }
    println!("{} of 12 passed in {:.0}s", 12 - failed, total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
