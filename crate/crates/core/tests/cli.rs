use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resk::cli::{load_csv, load_csvs, CsvSpec};
use resk::simulate::preset;

fn resk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resk")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn simulate_writes_contaminated_preset() {
    let o = resk(&["simulate", "--preset", "dataset1", "--nk", "50", "--eps", "0.02", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,label");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 500);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",0")).count(), 10);
    assert!(text.contains("# seed=7"));
    assert!(text.lines().any(|l| l.starts_with("# config=")));
}

#[test]
fn simulate_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let o = resk(&["simulate", "--nk", "20", "--eps", "0.05", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut spec = CsvSpec::new();
    spec.features = vec!["x1".into(), "x2".into()];
    spec.labels = vec!["label".into()];
    let back = load_csv(&path, &spec).unwrap();
    let want = preset("dataset1", 20, 0.05, 3).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.as_slice()), bits(want.as_slice()));
    assert_eq!(back.labels(), want.labels());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(resk(&["simulate", "--nk", "10", "--seed", "1", "--out", data.to_str().unwrap()]).status.success());
    let d = data.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["simulate", "--nk", "10", "--eps", "0.03", "--seed", "9"],
        vec!["fit", "--data", d, "--features", "x1,x2", "--k", "3", "--seed", "2"],
        vec!["enumerate", "--data", d, "--features", "x1,x2", "--l-max", "3", "--family", "t"],
        vec!["breakdown", "--nk", "5", "--mc", "2", "--eps", "0,0.02", "--families", "gaussian,skew-huber"],
        vec!["sensitivity", "--nk", "5", "--mc", "1", "--x", "0:10:10", "--y", "0:0:1", "--family", "huber"],
    ];
    for args in runs {
        let a = resk(&args);
        let b = resk(&args);
        assert!(a.status.success(), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn fit_writes_trace_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let trace = dir.path().join("trace.csv");
    let model = dir.path().join("model.json");
    assert!(resk(&["simulate", "--nk", "10", "--out", data.to_str().unwrap()]).status.success());
    let o = resk(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--features",
        "x1,x2",
        "--family",
        "skew-t",
        "--out",
        model.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!(json.is_object());
    let t = std::fs::read_to_string(&trace).unwrap();
    assert!(t.lines().count() > 2);
    assert!(t.contains("# command=fit"));
    assert!(t.contains("# seed=0"));
}

#[test]
fn fit_without_enough_points_fails() {
    let dir = tempfile::tempdir().unwrap();
    let few = dir.path().join("few.csv");
    std::fs::write(&few, "x1,x2\n1.0,2.0\n3.0,1.5\n").unwrap();
    let o = resk(&["fit", "--data", few.to_str().unwrap(), "--features", "x1,x2", "--k", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("too few points"), "{}", stderr(&o));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x1,x2\n").unwrap();
    let o = resk(&["fit", "--data", empty.to_str().unwrap(), "--features", "x1,x2"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty data"), "{}", stderr(&o));
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = resk(&["fit", "--data", missing.to_str().unwrap(), "--features", "x1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    let o = resk(&["fit", "--data", bad.to_str().unwrap(), "--features", "a,c"]);
    assert!(stderr(&o).contains("missing column `c`"), "{}", stderr(&o));
    let mut spec = CsvSpec::new();
    spec.features = vec!["a".into(), "b".into()];
    match load_csv(&bad, &spec) {
        Err(resk::Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wine_and_crabs_fixtures() {
    let mut spec = CsvSpec::new();
    spec.delimiter = b';';
    spec.features =
        ["volatile acidity", "residual sugar", "chlorides", "total sulfur dioxide"].map(String::from).to_vec();
    let red = fixture("wine-red.csv");
    let white = fixture("wine-white.csv");
    let wine = load_csvs(&[red.as_path(), white.as_path()], &spec).unwrap();
    assert_eq!(wine.dim(), 4);
    let classes: std::collections::BTreeSet<u32> = wine.labels().unwrap().iter().copied().collect();
    assert_eq!(classes.len(), 2);

    let mut spec = CsvSpec::new();
    spec.features = ["FL", "RW", "CL", "CW", "BD"].map(String::from).to_vec();
    spec.labels = vec!["sp".into(), "sex".into()];
    spec.standardize = true;
    let crabs = load_csv(&fixture("crabs.csv"), &spec).unwrap();
    assert_eq!(crabs.dim(), 5);
    let classes: std::collections::BTreeSet<u32> = crabs.labels().unwrap().iter().copied().collect();
    assert_eq!(classes, (1..=4).collect());
    assert!(crabs.meta.contains_key("standardized"));
}

#[test]
fn realdata_on_fixtures() {
    let red = fixture("wine-red.csv");
    let white = fixture("wine-white.csv");
    let o = resk(&[
        "realdata",
        "wine",
        "--data",
        red.to_str().unwrap(),
        "--data",
        white.to_str().unwrap(),
        "--family",
        "skew-huber",
        "--eps",
        "0.03",
        "--k",
        "2",
        "--runs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "estimator,run,true_class,cluster_1,cluster_2,avg");
    assert!(text.contains("skew-huber,mean,1,"));

    let crabs = fixture("crabs.csv");
    let o = resk(&["realdata", "crabs", "--data", crabs.to_str().unwrap(), "--runs", "1", "--family", "t"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("cluster_4"));
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "nk = 10\neps = 0.1\nseed = 4\n").unwrap();
    let a = resk(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = resk(&["simulate", "--nk", "10", "--eps", "0.1", "--seed", "4"]);
    assert_eq!(data_rows(&String::from_utf8_lossy(&a.stdout)), data_rows(&String::from_utf8_lossy(&b.stdout)));

    std::fs::write(&cfg, "nk = 10\nbogus = 1\n").unwrap();
    let o = resk(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    std::fs::write(&cfg, "nk = 10\n").unwrap();
    let o = resk(&["--config", cfg.to_str().unwrap(), "simulate", "--seed", "2"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!resk(&["simulate", "--preset", "dataset9"]).status.success());
    assert!(!resk(&["frobnicate"]).status.success());
    assert!(!resk(&["fit", "--family", "cauchy"]).status.success());
}
