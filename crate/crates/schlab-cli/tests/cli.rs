use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn schlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_schlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const GENTLE: &str = "equation = ch1d\nresolution = 128\nhorizon = 1\ndt = 1e-3\nu0.a = 0.5\n";
const STEEP: &str = "equation = ch1d\nresolution = 128\nhorizon = 1\ndt = 1e-3\nu0.a = 3\n";

#[test]
fn empty_config_is_rejected_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "empty.cfg", "");
    let o = schlab(&["run", "--config", &cfg], &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("equation: missing"));
}

#[test]
fn gentle_run_completes_with_monotone_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gentle.cfg", GENTLE);
    let out = dir.path().join("out");
    let o = schlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schlab-trajectory/1"));
    assert_eq!(lines.next(), Some("t,hs_norm,w1inf,min_slope,beta,status_flag"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 1001);
    let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(rows.last().unwrap()[5], "completed");
    assert_eq!(json(&out.join("summary.json"))["status"]["status"], "completed");
}

#[test]
fn steep_run_reports_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "steep.cfg", STEEP);
    let out = dir.path().join("out");
    let o = schlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["schema"], "schlab-summary/1");
    assert_eq!(s["status"]["status"], "breakdown");
    assert!(s["status"]["t_detect"].as_f64().unwrap() > 0.0);

    let forbid = schlab(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--override",
            "guards.forbid_breakdown=true",
        ],
        &[],
    );
    assert_eq!(code(&forbid), 3);
}

#[test]
fn single_path_ensemble_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEEP}noise.kind = linear\nnoise.b0 = 0.3\nseed = 42\n");
    let cfg = write_config(dir.path(), "lin.cfg", &text);
    let run_out = dir.path().join("run");
    let ens_out = dir.path().join("ens");
    assert_eq!(
        code(&schlab(
            &["run", "--config", &cfg, "--out", run_out.to_str().unwrap()],
            &[]
        )),
        0
    );
    assert_eq!(
        code(&schlab(
            &[
                "ensemble",
                "--config",
                &cfg,
                "--paths",
                "1",
                "--out",
                ens_out.to_str().unwrap()
            ],
            &[]
        )),
        0
    );
    let run = json(&run_out.join("summary.json"));
    let ens = json(&ens_out.join("ensemble.json"));
    let path = &ens["per_path"][0];
    assert_eq!(path["seed"], 42);
    assert_eq!(path["status"], run["status"]);
    assert_eq!(path["final_time"], run["final_time"]);
}

#[test]
fn replaying_a_path_by_seed_reproduces_its_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEEP}noise.kind = linear\nnoise.b0 = 0.3\n");
    let cfg = write_config(dir.path(), "lin.cfg", &text);
    let ens_out = dir.path().join("ens");
    let o = schlab(
        &[
            "ensemble",
            "--config",
            &cfg,
            "--paths",
            "3",
            "--seed",
            "10",
            "--out",
            ens_out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 0);
    let ens = json(&ens_out.join("ensemble.json"));
    let row = &ens["per_path"][2];
    let seed = row["seed"].as_u64().unwrap().to_string();
    assert_eq!(seed, "12");
    let run_out = dir.path().join("replay");
    assert_eq!(
        code(&schlab(
            &[
                "run",
                "--config",
                &cfg,
                "--seed",
                &seed,
                "--out",
                run_out.to_str().unwrap()
            ],
            &[]
        )),
        0
    );
    let run = json(&run_out.join("summary.json"));
    assert_eq!(row["status"], run["status"]);
    assert_eq!(row["rate_fit"], run["rate_fit"]);
}

#[test]
fn deterministic_ensemble_has_zero_width_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "steep.cfg", STEEP);
    let out = dir.path().join("ens");
    let o = schlab(
        &[
            "ensemble",
            "--config",
            &cfg,
            "--paths",
            "4",
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&o), 0);
    let f = &json(&out.join("ensemble.json"))["breaking_fraction"];
    assert_eq!(f["estimate"], 1.0);
    assert_eq!(f["ci_low"], f["ci_high"]);
}

#[test]
fn ensemble_output_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STEEP}noise.kind = linear\nnoise.b0 = 0.5\nexit.levels = 20, 40\n");
    let cfg = write_config(dir.path(), "lin.cfg", &text);
    let mut outputs = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("w{w}"));
        let o = schlab(
            &[
                "ensemble",
                "--config",
                &cfg,
                "--paths",
                "6",
                "--out",
                out.to_str().unwrap(),
            ],
            &[("SCHLAB_WORKERS", w)],
        );
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(out.join("ensemble.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn unknown_experiment_lists_valid_names() {
    let o = schlab(&["experiment", "exp_nothing"], &[]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    for name in schlab::experiments::EXPERIMENTS {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn experiment_writes_report_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = schlab(&["experiment", "exp_h1_conservation", "--out", out], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("exp_h1_conservation.json"));
    assert_eq!(r["schema"], "schlab-report/1");
    assert_eq!(r["pass"], true);
    assert!(r["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["source"].is_string()));

    // an unreachable tolerance must turn into a failing exit status
    let o = schlab(
        &[
            "experiment",
            "exp_h1_conservation",
            "--out",
            out,
            "--override",
            "tolerance=1e-15",
        ],
        &[],
    );
    assert_eq!(code(&o), 1);
    let o = schlab(&["experiment", "exp_h1_conservation", "--override", "nope=1"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn deterministic_breaking_rate_experiment_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = schlab(
        &["experiment", "exp_breaking_rate", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = json(&dir.path().join("exp_breaking_rate.json"));
    let rate = r["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "deterministic_rate")
        .unwrap()["measured"]
        .as_f64()
        .unwrap();
    assert!((-2.3..=-1.7).contains(&rate));
}

#[test]
fn field_file_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let f = schlab::SpectralField::from_fn_1d(64, |x| 0.5 * x.sin()).unwrap();
    schlab_cli::field_io::write_field(&dir.path().join("u0.field"), &f).unwrap();
    let cfg = write_config(
        dir.path(),
        "file.cfg",
        "equation = ch1d\nresolution = 64\nhorizon = 0.1\nu0.kind = file\nu0.path = u0.field\n",
    );
    let out = dir.path().join("out");
    assert_eq!(
        code(&schlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[])),
        0
    );
    let wrong = schlab(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--override",
            "resolution=32",
        ],
        &[],
    );
    assert_eq!(code(&wrong), 2);
    assert!(String::from_utf8_lossy(&wrong.stderr).contains("u0.path"));
    std::fs::write(dir.path().join("u0.field"), b"SCHLAB1 1 1 64\n\x00\x01").unwrap();
    let truncated = schlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&truncated), 2);
    assert!(String::from_utf8_lossy(&truncated.stderr).contains("truncated"));
}

#[test]
fn probe_stability_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "probe.cfg",
        "equation = ch1d\nresolution = 128\nhorizon = 0.5\nu0.a = 3\nsobolev_s = 4\nprobe.level = 1e9\nprobe.n_values = 4, 8\n",
    );
    let out = dir.path().join("probe");
    let o = schlab(
        &["probe-stability", "--config", &cfg, "--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("stability.json"));
    // a level nobody reaches leaves every exiting time undefined
    assert!(r["tau_reference"].is_null());
    assert_eq!(r["entries"].as_array().unwrap().len(), 2);
}
