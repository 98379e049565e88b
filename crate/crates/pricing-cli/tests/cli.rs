//! End-to-end behavior of the `pricing` binary: flag handling, exit
//! codes, file artifacts, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn pricing(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricing"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn bounds_peak_sits_at_the_robust_hinge_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let out = pricing(
        &["bounds", "--kind", "hinge", "--min", "0.01", "--max", "1.00", "--steps", "100", "--out", "b.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = read(dir.path(), "b.csv");
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(2)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().parse().unwrap(), f.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 100);
    let (best_param, best_value) =
        rows.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((best_param - 0.82).abs() <= 0.01, "peak at {best_param}");
    // The curve has a corner at its max, so a 0.01 grid undershoots it.
    assert!((best_value - 0.7715).abs() <= 3e-3, "peak value {best_value}");
}

#[test]
fn bounds_usage_and_domain_errors_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // steps = 0 is a usage error: exit 2
    let out = pricing(
        &["bounds", "--kind", "hinge", "--min", "0.1", "--max", "0.9", "--steps", "0", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("steps"), "{}", stderr(&out));
    // a range outside the guarantee's domain fails with a message
    let out = pricing(
        &["bounds", "--kind", "hinge", "--min", "0.5", "--max", "1.5", "--steps", "3", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    assert!(!dir.path().join("b.csv").exists(), "failed runs must not leave artifacts");
}

#[test]
fn tightness_flags_invalid_params_but_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = pricing(
        &["tightness", "--kind", "quantile_above", "--params", "0.25,0.6,0.5", "--out", "t.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = read(dir.path(), "t.csv");
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(3).unwrap().contains("invalid:"));
}

#[test]
fn simulate_fit_crossval_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = pricing(
        &["simulate", "--family", "uniform_band", "--g", "linear", "--n", "400", "--seed", "11", "--out", "d.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = pricing(
        &["fit", "--data", "d.csv", "--loss", "quantile:0.209", "--seed", "5", "--out", "p.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let policy = read(dir.path(), "p.csv");
    assert!(policy.contains("# loss: quantile:0.209"));
    assert!(policy.lines().any(|l| l == "theta_0,theta_1"), "two coefficients for two features");

    let out = pricing(
        &["crossval", "--data", "d.csv", "--loss", "hinge", "--demand-cap", "400", "--eval-cap", "400", "--out", "cv.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read(dir.path(), "cv.csv").lines().count(), 21, "schema + header + one row per grid point");
}

#[test]
fn fit_without_propensity_column_instructs_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bare.csv"), "x0,price,sold\n1.0,2.0,1\n1.0,1.0,0\n1.0,1.5,1\n")
        .unwrap();
    let out = pricing(
        &["fit", "--data", "bare.csv", "--loss", "hinge:0.8", "--out", "p.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("--propensity-model"), "{}", stderr(&out));

    let out = pricing(
        &[
            "fit",
            "--data",
            "bare.csv",
            "--loss",
            "hinge:0.8",
            "--out",
            "p.csv",
            "--propensity-model",
            "uniform",
            "--propensity-params",
            "0.5,2.5",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn experiment_grid_cardinality_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "scenario.family = uniform_band\n\
         scenario.g = linear\n\
         learners = hinge:0.8, quantile:0.3\n\
         n_grid = 300\n\
         replications = 2\n\
         base_seed = 3\n\
         test_size = 500\n\
         n_mc = 500\n\
         output_dir = out\n",
    )
    .unwrap();
    let out = pricing(&["experiment", "exp.cfg"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let results = read(dir.path(), "out/results.csv");
    let rows: Vec<&str> = results.lines().skip(2).collect();
    assert_eq!(rows.len(), 4, "2 learners x 1 size x 2 reps");
    assert!(rows.iter().all(|r| r.ends_with(",ok")), "{results}");
    let summary = read(dir.path(), "out/summary.csv");
    assert_eq!(summary.lines().count(), 2 + 2);

    // a config mistake is reported, not half-run
    std::fs::write(dir.path().join("bad.cfg"), "scenario.family = uniform_band\n").unwrap();
    let out = pricing(&["experiment", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("scenario.g"), "{}", stderr(&out));
}

#[test]
fn reruns_are_byte_identical_across_commands() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = "scenario.family = uniform_band\n\
               scenario.g = step\n\
               learners = hinge_cv, model_free\n\
               n_grid = 200\n\
               replications = 2\n\
               base_seed = 77\n\
               demand_cap = 200\n\
               eval_cap = 200\n\
               test_size = 300\n\
               n_mc = 300\n\
               nonconvex_evals = 500\n\
               nonconvex_multistarts = 1\n\
               output_dir = out\n";
    for dir in [dir_a.path(), dir_b.path()] {
        std::fs::write(dir.join("exp.cfg"), cfg).unwrap();
        let runs = [
            vec!["simulate", "--family", "shifted_exponential", "--g", "linear", "--n", "300", "--seed", "4", "--price", "exponential", "--price-params", "0.4", "--out", "sim.csv"],
            vec!["bounds", "--kind", "quantile", "--min", "0.05", "--max", "0.95", "--steps", "19", "--out", "bounds.csv"],
            vec!["tightness", "--kind", "hinge_above", "--params", "0.6,0.8", "--out", "tight.csv"],
            vec!["fit", "--data", "sim.csv", "--loss", "hinge:0.8234", "--seed", "9", "--out", "policy.csv"],
            vec!["experiment", "exp.cfg"],
        ];
        for args in runs {
            let out = pricing(&args, dir);
            assert!(out.status.success(), "{:?}: {}", args, stderr(&out));
        }
    }
    for name in ["sim.csv", "bounds.csv", "tight.csv", "policy.csv", "out/results.csv", "out/summary.csv"] {
        assert_eq!(read(dir_a.path(), name), read(dir_b.path(), name), "{name} differs between reruns");
    }
}
