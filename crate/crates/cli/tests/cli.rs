use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hyperrect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperrect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hyperrect(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn aggregate(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap()
}

fn coverage(agg: &Value, method: usize) -> f64 {
    agg["methods"][method]["coverage"]["mean"].as_f64().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_setup1_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&[
        "simulate",
        "--builtin",
        "setup1",
        "--method",
        "cqhr",
        "--alpha",
        "0.1",
        "--replicates",
        "200",
        "--ntest",
        "500",
        "--seed",
        "42",
        "--out",
        p(&out),
    ]);
    let agg = aggregate(&out);
    let c = coverage(&agg, 0);
    assert!((c - 0.9).abs() <= 0.01, "{c}");
    let csv = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with("method,replicate,n_test,coverage,balance,mean_volume,unbounded,marginal_y1"));
}

#[test]
fn single_point_coverage_is_zero_or_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    ok(&[
        "simulate",
        "--builtin",
        "setup1",
        "--method",
        "cqhr",
        "--replicates",
        "1",
        "--ntest",
        "1",
        "--out",
        p(&out),
    ]);
    let c = coverage(&aggregate(&out), 0);
    assert!(c == 0.0 || c == 1.0);
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "simulate",
            "--builtin",
            "balance-gamma3",
            "--variant",
            "r2-hetero",
            "--method",
            "cqhr,chr-signed,absmax",
            "--replicates",
            "4",
            "--ntest",
            "50",
            "--seed",
            "5",
            "--jobs",
            "1",
            "--out",
            p(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["replicates.csv", "aggregate.json", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn written_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&[
        "simulate",
        "--builtin",
        "setup2",
        "--method",
        "bonf-cqr",
        "--replicates",
        "3",
        "--ntest",
        "20",
        "--reference-dim",
        "min-variability",
        "--out",
        p(&first),
    ]);
    let second = dir.path().join("second");
    ok(&[
        "simulate",
        "--config",
        p(&first.join("config.json")),
        "--out",
        p(&second),
    ]);
    assert_eq!(
        fs::read(first.join("aggregate.json")).unwrap(),
        fs::read(second.join("aggregate.json")).unwrap()
    );
}

#[test]
fn toml_config_with_custom_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
schema_version = 1
methods = ["chr-abs", "cqhr"]
replicates = 5
n_test = 40
seed = 3

[scenario]
name = "custom"
seed = 1
correlation = [[1.0, 0.3], [0.3, 1.0]]
covariates = [{ law = "uniform", min = -1.0, max = 1.0 }]
targets = [
  { mean = [{ coef = 2.0, term = "x1" }], error = { family = "normal", sd = 1.0 } },
  { mean = [{ coef = 1.0, term = "x1^2" }], error = { family = "gamma", shape = 3.0, rate = 1.0 } },
]
basis = { shared = { name = "quad", terms = ["1", "x1", "x1^2"] } }
sizes = { train = 100, cal1 = 50, cal2 = 50, test = 40 }
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    let agg = aggregate(&out);
    assert_eq!(agg["source"], "custom");
    assert_eq!(agg["methods"].as_array().unwrap().len(), 2);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    for args in [
        vec!["simulate", "--builtin", "setup9", "--out", out],
        vec!["simulate", "--builtin", "setup1", "--method", "chr", "--out", out],
        vec!["simulate", "--builtin", "setup1", "--alpha", "1.5", "--out", out],
        vec!["simulate", "--out", out],
        vec!["frobnicate"],
    ] {
        assert_eq!(hyperrect(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numeric_failure_exits_1_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = dir.path().join("tiny.toml");
    fs::write(
        &tiny,
        r#"
schema_version = 1
methods = ["chr-abs"]
replicates = 2
n_test = 5
seed = 77

[scenario]
name = "one-fold"
seed = 1
correlation = [[1.0]]
covariates = [{ law = "uniform", min = 0.0, max = 1.0 }]
targets = [{ mean = [{ coef = 1.0, term = "x1" }], error = { family = "normal", sd = 1.0 } }]
basis = { shared = { name = "lin", terms = ["1", "x1"] } }
sizes = { train = 20, cal1 = 10, cal2 = 0, test = 5 }
"#,
    )
    .unwrap();
    let out = hyperrect(&["simulate", "--config", p(&tiny), "--out", p(&dir.path().join("t"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("replicate 0") && err.contains("seed 77"), "{err}");
}

fn write_training_csv(dir: &Path, rows: &str) -> std::path::PathBuf {
    let path = dir.join("data.csv");
    let out = ok(&["generate", "--builtin", "bp-synthetic", "--rows", rows, "--seed", "8"]);
    fs::write(&path, &out.stdout).unwrap();
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (headers, rows)
}

#[test]
fn fit_then_predict_on_training_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training_csv(dir.path(), "400");
    for method in ["cqhr", "chr-abs", "chr-signed", "absmax", "bonf-cqr", "bonf-naive"] {
        let model = dir.path().join(format!("{method}.json"));
        ok(&[
            "fit",
            "--data",
            p(&data),
            "--targets",
            "y1,y2",
            "--method",
            method,
            "--seed",
            "3",
            "--model-out",
            p(&model),
        ]);
        let text = fs::read_to_string(&model).unwrap();
        let json: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["format"], "hyperrect-model");
        assert_eq!(json["schema_version"], 1);
        let preds = dir.path().join(format!("{method}.csv"));
        ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&preds)]);
        let (headers, rows) = read_csv(&preds);
        assert_eq!(headers, vec!["y1_lo", "y1_hi", "y2_lo", "y2_hi"]);
        assert_eq!(rows.len(), 400);
        assert!(rows.iter().flatten().all(|v| v.is_finite()), "{method}");
        assert!(rows.iter().all(|r| r[0] <= r[1] && r[2] <= r[3]));
        // reloading gives byte-identical predictions
        let again = dir.path().join(format!("{method}-again.csv"));
        ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&again)]);
        assert_eq!(fs::read(&preds).unwrap(), fs::read(&again).unwrap());
    }
}

#[test]
fn predict_rejects_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training_csv(dir.path(), "200");
    let model = dir.path().join("m.json");
    ok(&[
        "fit",
        "--data",
        p(&data),
        "--targets",
        "y1,y2",
        "--model-out",
        p(&model),
    ]);

    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "x1,x2\n0.5,0.5\n").unwrap();
    let out = hyperrect(&["predict", "--model", p(&model), "--data", p(&narrow)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));

    let mut json: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    json["schema_version"] = serde_json::json!(2);
    let future = dir.path().join("future.json");
    fs::write(&future, json.to_string()).unwrap();
    let out = hyperrect(&["predict", "--model", p(&future), "--data", p(&data)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x1,y1,y2\n1,2,3\n4,,6\n").unwrap();
    let out = hyperrect(&[
        "fit",
        "--data",
        p(&bad),
        "--targets",
        "y1,y2",
        "--model-out",
        p(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("missing"), "{err}");
}

#[test]
fn permutation_study_on_synthetic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training_csv(dir.path(), "1289");
    let out = dir.path().join("perm");
    ok(&[
        "permute",
        "--data",
        p(&data),
        "--targets",
        "y1,y2",
        "--method",
        "cqhr",
        "--sizes",
        "900,100,100",
        "--permutations",
        "200",
        "--seed",
        "11",
        "--out",
        p(&out),
    ]);
    let agg = aggregate(&out);
    let c = coverage(&agg, 0);
    assert!((0.88..=0.92).contains(&c), "{c}");
    let (_, rows) = {
        let mut r = csv::Reader::from_path(out.join("replicates.csv")).unwrap();
        let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        (h, r.records().count())
    };
    assert_eq!(rows, 200);
}
