use std::path::Path;
use std::process::{Command, Output, Stdio};

use hyperco::rng::rng_from_seed;
use rand::Rng;

const BIN: &str = env!("CARGO_BIN_EXE_hyperco");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HYPERCO_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_identity(path: &Path, n: usize) {
    let mut rng = rng_from_seed(12);
    let mut text = String::from("x,y\n");
    for _ in 0..n {
        let v: f64 = rng.random();
        text.push_str(&format!("{v},{v}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn estimate_reports_every_measure_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("id.csv");
    write_identity(&input, 300);
    let o = run(&["estimate", input.to_str().unwrap(), "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 300);
    assert!(v["hc"]["value"].as_f64().unwrap() > 0.7);
    assert!(v["hc_reverse"]["value"].as_f64().unwrap() > 0.7);
    for key in ["pearson", "dcor", "mcor", "mic_approx"] {
        assert!(v[key].as_f64().unwrap() > 0.9, "{key}");
    }
    assert!(v["errors"].as_object().unwrap().is_empty());
}

#[test]
fn estimate_reads_stdin() {
    use std::io::Write;
    let mut child = Command::new(BIN)
        .args(["estimate", "-", "--x-col", "b", "--y-col", "a"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut text = String::from("a,b\n");
    let mut rng = rng_from_seed(1);
    for _ in 0..50 {
        text.push_str(&format!("{},{}\n", rng.random::<f64>(), rng.random::<f64>()));
    }
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["x"], "b");
    assert_eq!(v["y"], "a");
}

#[test]
fn bounds_prints_the_closed_form() {
    let o = run(&["bounds", "--example", "2", "--k", "2", "--alpha", "0.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.5\n");
    let o = run(&[
        "bounds",
        "--example",
        "1",
        "--rho",
        "0.6",
        "--sweep",
        "--alphas",
        "0.1,0.5,1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "example,rho,k,eps,alpha,s_lower_bound,mixture_mcor"
    );
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["bounds", "--example", "7", "--alpha", "0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["bounds", "--example", "2", "--alpha", "0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["synth", "--family", "linear", "--alpha", "2", "--sigma2", "0.1", "--n", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["power", "--family", "linear"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[power]\nbogus = 1\n").unwrap();
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "bounds",
        "--example",
        "2",
        "--k",
        "2",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn data_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(run(&["estimate", missing.to_str().unwrap()]).status.code(), Some(1));
    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
    let o = run(&["screen", ragged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));
}

#[test]
fn synth_is_byte_reproducible_and_writes_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let args = [
            "synth", "--family", "sin4pi", "--alpha", "0.2", "--sigma2", "0.1", "--n", "64", "--seed", "5",
        ];
        let o = run(&[&args[..], &["-o", p.to_str().unwrap()]].concat());
        assert!(o.status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 65);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(side["n"], 64);
    assert_eq!(side["seed"], 5);
}

#[test]
fn power_ignores_thread_count() {
    let args = [
        "power",
        "--family",
        "step",
        "--alpha",
        "0.05",
        "--sigma2",
        "0.1",
        "--n",
        "100",
        "--trials",
        "20",
        "--measures",
        "pearson,dcor",
        "--seed",
        "2",
    ];
    let one = Command::new(BIN)
        .args(args)
        .env("HYPERCO_THREADS", "1")
        .output()
        .unwrap();
    let two = run(&[&args[..], &["--threads", "2"]].concat());
    assert!(one.status.success() && two.status.success());
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(stdout(&one).lines().count(), 3);
}

#[test]
fn power_reads_its_parameters_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[power]\nfamily = \"linear\"\nalpha = 0.05\nsigma2 = 0.1\nn = 80\nn_null = 20\nn_alt = 20\nmeasures = [\"pearson\"]\n",
    )
    .unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "power"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn pathway_recovers_the_planted_order() {
    let o = run(&[
        "pathway",
        "--synthetic",
        "--cells",
        "300",
        "--rates",
        "1",
        "--trials",
        "2",
        "--measures",
        "pearson",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row, ["pearson", "1", "2", "1"]);
}

#[test]
fn screen_writes_both_orientations() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csv");
    let mut rng = rng_from_seed(3);
    let mut text = String::from("p,q,r\n");
    for _ in 0..40 {
        text.push_str(&format!(
            "{},{},{}\n",
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>()
        ));
    }
    std::fs::write(&input, text).unwrap();
    let o = run(&[
        "screen",
        input.to_str().unwrap(),
        "--measures",
        "pearson",
        "--sort-by",
        "pearson",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("x,y,n_complete,status"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn list_flags_take_comma_separated_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.csv");
    let mut rng = rng_from_seed(6);
    let mut text = String::from("a,b\n");
    for _ in 0..40 {
        text.push_str(&format!("{},{}\n", rng.random::<f64>(), rng.random::<f64>()));
    }
    std::fs::write(&input, text).unwrap();
    let o = run(&[
        "screen",
        input.to_str().unwrap(),
        "--pair",
        "a,b",
        "--drop-extreme",
        "2",
        "--measures",
        "pearson",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = run(&["screen", input.to_str().unwrap(), "--pair", "a", "--drop-extreme", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "pathway",
        "--synthetic",
        "--cells",
        "200",
        "--peaks",
        "3,2,1",
        "--rates",
        "1",
        "--trials",
        "1",
        "--measures",
        "pearson",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",0"));
    assert_eq!(
        run(&["pathway", "--synthetic", "--peaks", "1,2"]).status.code(),
        Some(2)
    );
}
