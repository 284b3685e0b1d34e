use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ranksel_cli::csvio::{read_panel, write_panel};
use ranksel_cli::{CliError, ReportBundle};
use ranksel_core::ranksum::LossPanel;
use ranksel_core::select::{rsr_from_panel, SelectionConfig};

fn ranksel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ranksel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_toy_data(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("x1,x2,y\n");
    for _ in 0..n {
        let x1: f64 = StandardNormal.sample(&mut rng);
        let x2: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        text.push_str(&format!("{x1},{x2},{}\n", 1.0 + 2.0 * x1 + e));
    }
    std::fs::write(path, text).unwrap();
}

fn panel_file(dir: &Path, cols: Vec<Vec<f64>>) -> std::path::PathBuf {
    let ids = (0..cols.len()).map(|j| format!("m{j}")).collect();
    let panel = LossPanel::new(cols, ids).unwrap();
    let path = dir.join("losses.csv");
    write_panel(&path, &panel).unwrap();
    path
}

fn read_bundle(dir: &Path) -> ReportBundle {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn select_keeps_exchangeable_candidates_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_toy_data(&data, 80, 1);
    let out1 = dir.path().join("a");
    let mut reports = Vec::new();
    for out in [&out1, &out1] {
        let o = ranksel(&[
            "select",
            "--data",
            data.to_str().unwrap(),
            "--response",
            "y",
            "--learners",
            "ols,ols",
            "--alpha",
            "0.1",
            "--folds",
            "5",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let bundle = read_bundle(&out1);
    let set = bundle.confidence_set.as_ref().unwrap();
    assert_eq!(set.selected, vec![0, 1]);
    assert!(out1.join("pvalues.csv").is_file());
    assert!(out1.join("timing.json").is_file());

    // the echoed configuration reproduces the run's configuration
    let cfg = bundle.run_config().unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.learners, vec!["ols", "ols"]);
    assert_eq!(cfg.to_pairs().into_iter().collect::<std::collections::BTreeMap<_, _>>(), bundle.config);
}

#[test]
fn select_separates_a_useless_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_toy_data(&data, 200, 2);
    let out = dir.path().join("o");
    let o = ranksel(&[
        "select", "--data", data.to_str().unwrap(), "--response", "y", "--learners", "ols,huber,huber_lasso",
        "--set", "k_path=3", "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = read_bundle(&out).confidence_set.unwrap();
    assert_eq!(set.model_ids.len(), 5);
    // the first path point is the null model, which cannot compete with a slope of 2
    assert!(!set.contains(2), "{:?}", set.p_values);
    assert!(set.contains(0) || set.contains(1));
}

#[test]
fn select_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_toy_data(&data, 30, 3);
    let out = dir.path().join("o");
    let d = data.to_str().unwrap();
    let o_dir = out.to_str().unwrap();

    let o = ranksel(&["select", "--data", d, "--response", "nope", "--learners", "ols,huber", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--response"), "{}", stderr(&o));

    let o = ranksel(&["select", "--data", d, "--learners", "ols,huber", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--response"));

    let o = ranksel(&["select", "--data", d, "--response", "y", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("candidate"));

    let o = ranksel(&["select", "--data", d, "--response", "y", "--learners", "ols,huber", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));

    std::fs::write(&data, "x1,y\n1,2\n3,oops\n").unwrap();
    let o = ranksel(&["select", "--data", d, "--response", "y", "--learners", "ols,huber", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("\"y\""), "{}", stderr(&o));

    std::fs::write(&data, "x1,y\n1,2\n3\n").unwrap();
    let o = ranksel(&["select", "--data", d, "--response", "y", "--learners", "ols,huber", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn panel_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..60).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v.abs()).collect())
        .collect();
    let path = panel_file(dir.path(), cols);
    let out = dir.path().join("o");
    let o = ranksel(&["panel", "--losses", path.to_str().unwrap(), "--alpha", "0.1", "--B", "500", "--seed", "11", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cli = read_bundle(&out).confidence_set.unwrap();
    let lib = rsr_from_panel(
        &read_panel(&path).unwrap(),
        &SelectionConfig { alpha: 0.1, draws: 500, seed: 11, ..SelectionConfig::default() },
    )
    .unwrap();
    assert_eq!(cli.p_values, lib.p_values);
    assert_eq!(cli.selected, lib.selected);
    assert_eq!(cli.model_ids, vec!["m0", "m1", "m2", "m3"]);
}

#[test]
fn panel_rejects_dominated_models() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let base: Vec<f64> = (0..150).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v.abs()).collect();
    let worse1: Vec<f64> = base.iter().map(|v| v + 1.0).collect();
    let worse2: Vec<f64> = base.iter().map(|v| 2.0 * v + 0.5).collect();
    let path = panel_file(dir.path(), vec![base, worse1, worse2]);
    let out = dir.path().join("o");
    let o = ranksel(&["panel", "--losses", path.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = read_bundle(&out).confidence_set.unwrap();
    assert_eq!(set.selected, vec![0]);
    // library-level Monte-Carlo over seeds: the dominated references are never kept
    let panel = read_panel(&path).unwrap();
    for seed in 0..20 {
        let lib = rsr_from_panel(&panel, &SelectionConfig { seed, ..SelectionConfig::default() }).unwrap();
        assert!(!lib.contains(1) && !lib.contains(2));
    }
}

#[test]
fn panel_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = dir.path().join("o");
    let p = path.to_str().unwrap();
    let o_dir = out.to_str().unwrap();

    std::fs::write(&path, "model_a\n1\n2\n").unwrap();
    let o = ranksel(&["panel", "--losses", p, "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    std::fs::write(&path, "model_a,model_b\n1,2\n").unwrap();
    let o = ranksel(&["panel", "--losses", p, "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    std::fs::write(&path, "model_a,model_b\n1,2\n3,NaN\n").unwrap();
    let o = ranksel(&["panel", "--losses", p, "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("model_b"), "{}", stderr(&o));

    let o = ranksel(&["panel", "--losses", "/nonexistent.csv", "--seed", "1", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));

    let o = ranksel(&["panel", "--losses", p, "--seed", "1", "--alpha", "2", "--out", o_dir]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_four() {
    let e: CliError = ranksel_core::Error::Numerical("diverged".into()).into();
    assert_eq!(e.exit_code(), 4);
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("sim.cfg");
    std::fs::write(&cfg, "# smoke design\nseed = 17\nreps = 2\nn = 40\ndraws = 100\n").unwrap();
    let mut args = vec!["simulate", "case1", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    ranksel(&args)
}

#[test]
fn simulate_case1_smoke_outputs_parse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = simulate(dir.path(), &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg[0]["case"], "case1");
    assert_eq!(agg[0]["methods"].as_array().unwrap().len(), 4);

    let mut rdr = csv::Reader::from_path(out.join("replicates.csv")).unwrap();
    assert_eq!(rdr.records().count(), 8);

    for name in ["setsize_vs_n.dat", "rates.dat"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 4, "{name}");
        for r in rows {
            let f: Vec<&str> = r.split_whitespace().collect();
            assert_eq!(f.len(), 4);
            assert!(f[0].parse::<f64>().is_ok() && f[1].parse::<f64>().is_ok() && f[2].parse::<f64>().is_ok());
        }
    }
}

#[test]
fn simulate_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(simulate(dir.path(), &["--threads", "1", "--out", a.to_str().unwrap()]).status.success());
    assert!(simulate(dir.path(), &["--threads", "8", "--out", b.to_str().unwrap()]).status.success());
    assert_eq!(
        std::fs::read(a.join("aggregate.json")).unwrap(),
        std::fs::read(b.join("aggregate.json")).unwrap()
    );
}

#[test]
fn simulate_case2_schema_and_dimension_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = ranksel(&["simulate", "case2", "--seed", "1", "--reps", "1", "--set", "p=50", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(n=200, p=200)") && stderr(&o).contains("(n=400, p=2000)"), "{}", stderr(&o));

    let o = ranksel(&["simulate", "case2", "--seed", "1", "--reps", "1", "--B", "100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let agg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    for m in agg[0]["methods"].as_array().unwrap() {
        for field in ["nonzeros", "coverage_rate", "oracle_rate", "cv_error"] {
            assert!(m[field]["mean"].is_number(), "{field} in {m}");
        }
    }
}
