use glarnet::cli::run_from;
use glarnet::estimator::EstimateResult;
use std::fs;
use std::path::{Path, PathBuf};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["glarnet", "--quiet"];
    full.extend_from_slice(args);
    run_from(full)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_dir_sorted(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const SMALL_GRID: &str = "family = poisson\nM = 6\nrho = 2\ns = 6, 10\nT = 50, 100\ntrials = 3\nseed = 4\n";

#[test]
fn simulate_fit_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let series = p(dir.path(), "x.csv");
    assert_eq!(run(&["simulate", "--family", "poisson", "--M", "5", "--s", "8", "--rho", "2", "--T", "1000", "--seed", "3", "--out", &series]), 0);
    let text = fs::read_to_string(&series).unwrap();
    assert_eq!(text.lines().count(), 1002, "header plus 1001 states");
    let model = p(dir.path(), "x.model.json");
    assert!(Path::new(&model).exists() && dir.path().join("x.meta.json").exists());

    let fit_dir = p(dir.path(), "fit");
    assert_eq!(run(&["fit", "--series", &series, "--model", &model, "--lambda", "paper", "--out", &fit_dir]), 0);
    let est = EstimateResult::from_json(&fs::read_to_string(dir.path().join("fit/estimate.json")).unwrap()).unwrap();
    assert!((est.lambda - 0.1 / 1000f64.sqrt()).abs() < 1e-15);
    assert!(dir.path().join("fit/A_hat.csv").exists());

    let report = p(dir.path(), "report.json");
    let estimate = p(dir.path(), "fit/estimate.json");
    assert_eq!(run(&["report", "--model", &model, "--series", &series, "--estimate", &estimate, "--out", &report]), 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["estimate_mse"].as_f64().unwrap() >= 0.0);
    assert!(json["cross_term_stat"].as_f64().is_some());
    assert!(json["theory"].is_object());
}

#[test]
fn verify_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "v");
    assert_eq!(run(&["verify", "--family", "bernoulli", "--M", "3", "--seeds", "100", "--T", "2000", "--out", &out, "--strict"]), 0);
    let table = fs::read_to_string(dir.path().join("v/verify.csv")).unwrap();
    assert!(table.starts_with("invariant,checked,violations,allowed,passed,worst_margin"));
    assert!(table.lines().skip(1).all(|l| l.contains(",pass,")), "{table}");
    assert!(dir.path().join("v/theory_report.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["fit", "--lambda", "lots"]), 1);
    assert_eq!(run(&["simulate", "--T", "10", "--bogus"]), 1);

    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "M = 4\nrho = 2\ns = 41\n").unwrap();
    assert_eq!(run(&["experiment", "--grid", bad.to_str().unwrap(), "--out", &p(dir.path(), "r")]), 2);
    fs::write(&bad, "family = poisson\nspeed = 3\n").unwrap();
    assert_eq!(run(&["experiment", "--grid", bad.to_str().unwrap(), "--out", &p(dir.path(), "r")]), 2);
    assert_eq!(run(&["fit", "--series", &p(dir.path(), "missing.csv"), "--family", "poisson"]), 2);
    assert_eq!(run(&["--threads", "0", "verify", "--M", "2", "--seeds", "2", "--T", "50", "--out", &p(dir.path(), "v")]), 2);
}

#[test]
fn strict_experiment_reports_failed_trials() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("boom.ini");
    fs::write(&grid, "family = poisson\nM = 4\nrho = 4\ns = 16\nT = 200\ntrials = 2\nvalue_low = 0.5\nvalue_high = 1\n").unwrap();
    let out = p(dir.path(), "r");
    assert_eq!(run(&["experiment", "--grid", grid.to_str().unwrap(), "--out", &out]), 0);
    assert_eq!(run(&["experiment", "--grid", grid.to_str().unwrap(), "--out", &out, "--strict"]), 3);
    let csv = fs::read_to_string(dir.path().join("r/results.csv")).unwrap();
    assert!(csv.lines().count() == 2, "{csv}");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.ini");
    fs::write(&grid, SMALL_GRID).unwrap();
    let g = grid.to_str().unwrap();
    for threads in ["1", "4"] {
        let out = p(dir.path(), &format!("t{threads}"));
        assert_eq!(run(&["--threads", threads, "experiment", "--grid", g, "--out", &out]), 0);
        let series = p(dir.path(), &format!("t{threads}/x.csv"));
        assert_eq!(run(&["--threads", threads, "simulate", "--M", "6", "--s", "10", "--rho", "2", "--T", "300", "--seed", "8", "--out", &series]), 0);
        let fit = p(dir.path(), &format!("t{threads}/fit"));
        assert_eq!(run(&["--threads", threads, "fit", "--series", &series, "--family", "poisson", "--out", &fit]), 0);
    }
    let one = read_dir_sorted(&dir.path().join("t1"));
    let four = read_dir_sorted(&dir.path().join("t4"));
    assert!(one.len() >= 10);
    assert_eq!(one.iter().map(|f| &f.0).collect::<Vec<_>>(), four.iter().map(|f| &f.0).collect::<Vec<_>>());
    for ((name, a), (_, b)) in one.iter().zip(&four) {
        assert!(a == b, "{} differs between thread counts", name.display());
    }
}

#[test]
fn finished_cells_are_reused_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.ini");
    fs::write(&grid, SMALL_GRID).unwrap();
    let g = grid.to_str().unwrap();
    let out = p(dir.path(), "r");
    assert_eq!(run(&["experiment", "--grid", g, "--out", &out]), 0);
    let first = fs::read(dir.path().join("r/results.csv")).unwrap();

    // A doctored cell file with the same grid must be picked up verbatim.
    let cell_path = dir.path().join("r/cells/s6_T50.json");
    let mut cell: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cell_path).unwrap()).unwrap();
    cell["cell"]["mse_median"] = serde_json::json!(123.0);
    fs::write(&cell_path, serde_json::to_string(&cell).unwrap()).unwrap();
    assert_eq!(run(&["experiment", "--grid", g, "--out", &out]), 0);
    let second = fs::read_to_string(dir.path().join("r/results.csv")).unwrap();
    assert!(second.contains("123"), "{second}");

    // Recomputing the removed cell restores the original bytes; a new seed invalidates every cell.
    fs::remove_file(&cell_path).unwrap();
    assert_eq!(run(&["experiment", "--grid", g, "--out", &out]), 0);
    assert_eq!(fs::read(dir.path().join("r/results.csv")).unwrap(), first);
    assert_eq!(run(&["experiment", "--grid", g, "--seed", "5", "--out", &out]), 0);
    assert_ne!(fs::read(dir.path().join("r/results.csv")).unwrap(), first);
}

#[test]
fn burn_in_comparison_writes_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.ini");
    fs::write(&grid, "family = poisson\nM = 4\nrho = 2\ns = 4\nT = 60\ntrials = 2\n").unwrap();
    let out = p(dir.path(), "b");
    assert_eq!(run(&["experiment", "--grid", grid.to_str().unwrap(), "--out", &out, "--compare-burn-in"]), 0);
    for f in ["unmixed/results.csv", "mixed/results.csv", "burn_in_ratios.csv"] {
        assert!(dir.path().join("b").join(f).exists(), "{f}");
    }
    let ratios = fs::read_to_string(dir.path().join("b/burn_in_ratios.csv")).unwrap();
    assert!(ratios.starts_with("s,T,median_unmixed,median_mixed,ratio"));
}
