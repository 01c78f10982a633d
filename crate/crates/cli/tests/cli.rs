use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_flexsplit");

fn default_config() -> Value {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/default.json"
    ))
    .unwrap();
    serde_json::from_str(&text).unwrap()
}

fn run(args: &[&str], config: Option<&Value>, out: &Path) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg("--out").arg(out);
    if let Some(v) = config {
        let path = out.join("config.json");
        fs::create_dir_all(out).unwrap();
        fs::write(&path, v.to_string()).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).output().unwrap()
}

fn csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(rec.iter().map(String::from))
                .collect()
        })
        .collect()
}

fn f(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key]
        .parse()
        .unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

#[test]
fn missing_pathloss_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["network"]
        .as_object_mut()
        .unwrap()
        .remove("pathloss_exponent");
    let out = run(&["cfsma"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("network.pathloss_exponent"), "{err}");
}

#[test]
fn out_of_range_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    cfg["services"][1]["reliability_target"] = 1.5.into();
    let out = run(&["cfsma"], Some(&cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("services[1].reliability_target"));
}

#[test]
fn mar_sweep_matches_closed_form_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["--trials", "3000", "--plot-data", "mar-sweep"], None, d);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let rows = csv(&a.join("mar-sweep.csv"));
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let g = f(row, "gamma_linear");
        assert!((f(row, "p_dm_analytic") - g.powf(-0.5)).abs() < 1e-12);
        assert!((f(row, "p_cm_analytic") + f(row, "p_dm_analytic") - 1.0).abs() < 1e-12);
        assert!((f(row, "p_dm_empirical") - f(row, "p_dm_analytic")).abs() <= 0.04);
    }
    for file in ["mar-sweep.csv", "mar-sweep.plot.csv"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(a.join("mar-sweep.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["trials"], 3000);
    assert_eq!(
        manifest["config_hash"].as_str().unwrap(),
        rows[0]["config_hash"]
    );
}

#[test]
fn seed_changes_the_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        run(&["--trials", "500", "--seed", "1", "mar-sweep"], None, &a)
            .status
            .success()
    );
    assert!(
        run(&["--trials", "500", "--seed", "2", "mar-sweep"], None, &b)
            .status
            .success()
    );
    assert_ne!(
        fs::read(a.join("mar-sweep.csv")).unwrap(),
        fs::read(b.join("mar-sweep.csv")).unwrap()
    );
}

#[test]
fn default_config_is_infeasible_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["cfsma"], None, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let result: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfsma.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "Infeasible");
}

#[test]
fn slack_system_pins_gamma_at_the_box_edge() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = default_config();
    for s in cfg["services"].as_array_mut().unwrap() {
        s["user_density_per_km2"] = 10.0.into();
        s["reliability_target"] = 0.5.into();
        s["sinr_threshold_db"] = (-10.0).into();
    }
    let out = run(&["cfsma"], Some(&cfg), dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfsma.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "Optimal");
    let g = result["gamma_star_db"]["embb"].as_f64().unwrap();
    assert!((g - 40.0).abs() < 1e-6, "{g}");
}

#[test]
fn sweep_and_queue_outputs_are_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(
        &fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/mid-load.json"
        ))
        .unwrap(),
    )
    .unwrap();
    cfg["experiment"]["eta_grid"] = serde_json::json!([0.1, 0.2]);
    cfg["experiment"]["monte_carlo"]["horizon_packets"] = 40_000.into();
    for cmd in ["eta-sweep", "queue-sim"] {
        let out = run(&[cmd], Some(&cfg), dir.path());
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let rows = csv(&dir.path().join("eta-sweep.csv"));
    assert_eq!(rows.len(), 4);
    for row in &rows {
        for key in [
            "p_cm_embb",
            "p_dm_embb",
            "p_cm_urllc",
            "p_dm_urllc",
            "urllc_reliability",
            "outage",
        ] {
            let p = f(row, key);
            assert!((0.0..=1.0).contains(&p), "{key} = {p}");
        }
    }
    for row in csv(&dir.path().join("queue-sim.csv")) {
        assert_eq!(row["status"], "stable");
        let (a, s, h) = (
            f(&row, "sojourn_analytic_s"),
            f(&row, "sojourn_sim_s"),
            f(&row, "sojourn_half_width_s"),
        );
        assert!((s - a).abs() <= 4.0 * h + 0.02 * a, "{row:?}");
    }
}

#[test]
fn bad_subcommand_is_a_usage_error() {
    let out = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
