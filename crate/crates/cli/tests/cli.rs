use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hfts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfts")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = hfts(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn bad_configuration_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path(), "o");
    let missing = path(tmp.path(), "nope");
    assert_eq!(hfts(&["depth", &missing, "--out", &out]).status.code(), Some(2));
    assert_eq!(hfts(&["simulate", "--beta", "1.5", "--out", &out]).status.code(), Some(2));

    let cfg = path(tmp.path(), "run.toml");
    fs::write(&cfg, "seed = 3\nwindoww = 4\n").unwrap();
    let run = hfts(&["simulate", "--config", &cfg, "--out", &out]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("windoww"));
}

#[test]
fn failed_computation_exits_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = path(tmp.path(), "curves.csv");
    fs::write(&curves, "1,2,3\n2,3,4\n3,4,5\n").unwrap();
    let run = hfts(&["depth", &curves, "--beta", "0.05", "--out", &path(tmp.path(), "o")]);
    assert_eq!(run.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&run.stderr).is_empty());
}

#[test]
fn toml_config_sets_parameters_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = path(tmp.path(), "run.toml");
    fs::write(
        &cfg,
        "seed = 5\n[grid]\nn_points = 12\n[simulate]\ncurves = 20\nleaves = 2\n",
    )
    .unwrap();
    let out = path(tmp.path(), "sim");
    ok(&["simulate", "--config", &cfg, "--curves", "25", "--out", &out]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("sim/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["simulate"]["curves"], 25);
    assert_eq!(manifest["config"]["simulate"]["leaves"], 2);
    let leaf = fs::read_to_string(tmp.path().join("sim/data/node_1.csv")).unwrap();
    let rows: Vec<&str> = leaf.lines().filter(|l| !l.starts_with('t')).collect();
    assert_eq!(rows.len(), 25);
    assert_eq!(rows[0].split(',').count(), 12);
}

#[test]
fn manifest_reproduces_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = path(tmp.path(), "sim");
    ok(&["simulate", "--seed", "4", "--curves", "30", "--grid-points", "16", "--outliers", "0.1", "--out", &sim]);
    let first = path(tmp.path(), "bt1");
    let stdout = ok(&["backtest", &sim, "--window", "8", "--reconcile", "gls", "--out", &first]);
    assert!(stdout.contains("moving_median"));

    let again = path(tmp.path(), "bt2");
    ok(&["backtest", "--config", &path(tmp.path(), "bt1/manifest.json"), "--out", &again]);
    for f in ["report.csv", "errors.csv", "report.json"] {
        assert_eq!(
            fs::read(tmp.path().join("bt1").join(f)).unwrap(),
            fs::read(tmp.path().join("bt2").join(f)).unwrap(),
            "{f}"
        );
    }
    // A manifest from one command does not drive another.
    let wrong = hfts(&["forecast", "--config", &path(tmp.path(), "bt1/manifest.json"), "--out", &again]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn different_seeds_give_different_data() {
    let tmp = tempfile::tempdir().unwrap();
    let a = path(tmp.path(), "a");
    let b = path(tmp.path(), "b");
    ok(&["simulate", "--seed", "1", "--curves", "5", "--out", &a]);
    ok(&["simulate", "--seed", "2", "--curves", "5", "--out", &b]);
    assert_ne!(
        fs::read(tmp.path().join("a/data/node_1.csv")).unwrap(),
        fs::read(tmp.path().join("b/data/node_1.csv")).unwrap()
    );
}

#[test]
fn ingest_then_forecast() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("REGION,SETTLEMENTDATE,TOTALDEMAND,RRP,PERIODTYPE\n");
    for region in ["NSW1", "QLD1", "SA1"] {
        for day in 1..=20u32 {
            for j in 1..=48u32 {
                let (d, h, m) = if j == 48 { (day + 1, 0, 0) } else { (day, j / 2, 30 * (j % 2)) };
                let load = 1000.0 + 100.0 * f64::from(j % 24) + f64::from(day);
                csv.push_str(&format!("{region},2016/01/{d:02} {h:02}:{m:02}:00,{load},30.1,TRADE\n"));
            }
        }
    }
    let input = path(tmp.path(), "PRICE_AND_DEMAND_201601.csv");
    fs::write(&input, csv).unwrap();
    let ing = path(tmp.path(), "ing");
    ok(&["ingest", &input, "--regions", "nsw,qld,sa", "--root", "mainland", "--out", &ing]);

    let days = fs::read_to_string(tmp.path().join("ing/days.csv")).unwrap();
    assert_eq!(days.lines().count(), 21);
    let hierarchy = fs::read_to_string(tmp.path().join("ing/data/hierarchy.csv")).unwrap();
    assert!(hierarchy.contains("mainland"));

    let fc = path(tmp.path(), "fc");
    ok(&["forecast", &ing, "--window", "10", "--predictor", "moving_mean", "--reconcile", "gls", "--out", &fc]);
    let forecast = fs::read_to_string(tmp.path().join("fc/forecast.csv")).unwrap();
    let rows: Vec<Vec<&str>> = forecast.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "mainland");
    assert_eq!(rows[0].len(), 49);
    let at = |row: &Vec<&str>, t: usize| row[t].parse::<f64>().unwrap();
    for t in 1..49 {
        let sum: f64 = rows[1..].iter().map(|r| at(r, t)).sum();
        assert!((at(&rows[0], t) - sum).abs() <= 1e-9 * sum.abs());
    }
}

#[test]
fn depth_flags_an_injected_outlier() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::new();
    for i in 0..12 {
        let row: Vec<String> = (0..10).map(|t| format!("{}", (t as f64 * 0.6).sin() + 0.05 * i as f64)).collect();
        csv += &(row.join(",") + "\n");
    }
    csv += &["40"; 10].join(",");
    csv += "\n";
    let input = path(tmp.path(), "c.csv");
    fs::write(&input, csv).unwrap();
    ok(&["depth", &input, "--beta", "1", "--out", &path(tmp.path(), "d")]);
    let out = fs::read_to_string(tmp.path().join("d/depth.csv")).unwrap();
    let last: Vec<&str> = out.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "13");
    assert_eq!(last[3], "true");
}
