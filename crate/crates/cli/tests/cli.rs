use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn transplane(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transplane")).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn genus_two(dir: &Path) -> String {
    let path = dir.join("g2.json");
    let p = path.to_str().unwrap();
    let out = transplane(&["sts", "build", "--n", "3", "--hperm", "(1 2)", "--vperm", "(1 3)", "--out", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p.to_string()
}

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plane.json");
    let p = path.to_str().unwrap();
    let mut bytes = vec![];
    for _ in 0..2 {
        assert!(transplane(&["sample", "--lambda", "4", "--radius", "1.5", "--seed", "11", "--out", p]).status.success());
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let doc = read_json(&path);
    assert_eq!(doc["config"]["subcommand"], "sample");
    assert_eq!(doc["config"]["seed"], 11);
    assert!(doc["plane"].is_object());
}

#[test]
fn singularity_report_uses_twice_the_area() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mc.json");
    let args = [
        "mc", "--experiment", "visible-count", "--from", "singularity", "--lambda", "4", "--radius", "0.5",
        "--trials", "200", "--seed", "3", "--out", path.to_str().unwrap(),
    ];
    assert!(transplane(&args).status.success());
    let doc = read_json(&path);
    let mean = doc["report"]["reference_mean"].as_f64().unwrap();
    assert!((mean - std::f64::consts::TAU).abs() < 1e-12);
    assert_eq!(doc["report"]["trials"], 200);

    let csv = dir.path().join("mc.csv");
    let mut csv_args = args.to_vec();
    let last = csv_args.len() - 1;
    csv_args[last] = csv.to_str().unwrap();
    csv_args.extend(["--format", "csv"]);
    assert!(transplane(&csv_args).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("count,frequency"));
    let total: u64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 200);
}

#[test]
fn origami_summary_and_injectivity_radius() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = genus_two(dir.path());
    let doc = read_json(Path::new(&g2));
    assert_eq!(doc["surface"]["genus"], 2);

    let out = dir.path().join("inj.json");
    let res = transplane(&["injrad", "--sts", &g2, "--from", "0", "--r-max", "1.5", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read_json(&out)["injectivity_radius"], 0.5);

    let vis = dir.path().join("vis.json");
    let res = transplane(&["visible", "--sts", &g2, "--from", "0", "--radius", "1.2", "--out", vis.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(read_json(&vis)["count"].as_u64().unwrap() > 0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(transplane(&["sample", "--lambda", "4"]).status.code(), Some(1));
    assert_eq!(transplane(&["sample", "--lambda", "-1", "--radius", "1"]).status.code(), Some(1));
    assert_eq!(transplane(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(transplane(&["--help"]).status.code(), Some(0));
}

#[test]
fn geometric_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let g2 = genus_two(dir.path());
    let res = transplane(&["visible", "--sts", &g2, "--from", "7", "--radius", "1"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let res = transplane(&["sample", "--lambda", "4", "--radius", "10"]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn render_writes_polygons() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("view.svg");
    let res = transplane(&["render", "--lambda", "4", "--radius", "1", "--seed", "2", "--out", path.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.starts_with("<!-- transplane"));
    assert!(svg.contains("<svg") && svg.matches("<polygon").count() >= 1);
}

#[test]
fn embedded_config_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ball.json");
    let res = transplane(&["ball", "--lambda", "4", "--radius", "0.7", "--seed", "5", "--samples", "500", "--out", path.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let first = std::fs::read(&path).unwrap();
    let doc: Value = serde_json::from_slice(&first).unwrap();
    let cmd: transplane_cli::Command = serde_json::from_value(doc["config"].clone()).unwrap();
    std::fs::remove_file(&path).unwrap();
    transplane_cli::run(&cmd).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}
