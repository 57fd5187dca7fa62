use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use csdl::synthesis::trial_seed;
use csdl::{plant_instance, NoiseModel};

fn csdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csdl"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_column(path: &Path, values: &[f64]) {
    let mut text = String::from("value\n");
    for v in values {
        text.push_str(&format!("{v:.17e}\n"));
    }
    fs::write(path, text).unwrap();
}

fn planted_files(dir: &Path) -> (String, String) {
    let inst = plant_instance(150, 6, 2, 12, NoiseModel::iid(0.1), trial_seed(3, 0, 0)).unwrap();
    let input = dir.join("y.csv");
    let truth = dir.join("x.csv");
    write_column(&input, inst.observed.as_slice());
    write_column(&truth, inst.clean.as_slice());
    (input.to_string_lossy().into_owned(), truth.to_string_lossy().into_owned())
}

#[test]
fn fit_with_truth_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (input, truth) = planted_files(dir.path());
    let out = dir.path().join("fit");
    let res = csdl(&[
        "fit", "--input", &input, "--n", "6", "--k", "2", "--lambda", "12", "--sigma", "0.1", "--truth", &truth,
        "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["reconstruction.csv", "encoding.csv", "dictionary.csv", "report.toml"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report: toml::Value = toml::from_str(&fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    assert_eq!(report["mode"].as_str(), Some("constrained"));
    assert_eq!(report["signal_length"].as_integer(), Some(150));
    assert!(report["encoding_l11"].as_float().unwrap() <= 12.0 + 1e-10);
    let truth = &report["truth"];
    assert!(truth["mse_csdl"].as_float().unwrap() < truth["mse_zero"].as_float().unwrap());
    let certs = &report["certificates"];
    assert!(certs["lb_joint"].as_float().unwrap() <= certs["ub_joint"].as_float().unwrap());

    let dict = fs::read_to_string(out.join("dictionary.csv")).unwrap();
    assert_eq!(dict.lines().next(), Some("atom_0,atom_1"));
    assert_eq!(dict.lines().count(), 7);
    let recon = fs::read_to_string(out.join("reconstruction.csv")).unwrap();
    assert_eq!(recon.lines().count(), 151);
}

#[test]
fn fit_penalized_from_delta_without_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = planted_files(dir.path());
    let out = dir.path().join("pen");
    let res = csdl(&[
        "fit", "--input", &input, "--n", "6", "--k", "2", "--delta", "0.05", "--sigma", "0.1", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("report.toml")).unwrap();
    let report: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(report["mode"].as_str(), Some("penalized"));
    let lp = report["lambda_prime"].as_float().unwrap();
    assert!((lp - 0.1 * (2.0 * (2.0 * 150.0 / 0.05f64).ln()).sqrt()).abs() < 1e-12);
    assert!(report["certificates"]["ub_penalized"].as_float().is_some());
    assert!(report.get("truth").is_none());

    let out2 = dir.path().join("pen2");
    let res = csdl(&[
        "fit", "--input", &input, "--n", "6", "--k", "2", "--delta", "0.05", "--sigma", "0.1",
        "--lambda-prime-rule", "with_atom_length", "--out", out2.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let report: toml::Value = toml::from_str(&fs::read_to_string(out2.join("report.toml")).unwrap()).unwrap();
    assert!((report["lambda_prime"].as_float().unwrap() - lp * 6f64.sqrt()).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let res = csdl(&["fit", "--input", missing.to_str().unwrap(), "--n", "2", "--k", "1", "--lambda", "1"]);
    assert_eq!(res.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "value\n1\n2\nx\n").unwrap();
    let res = csdl(&["fit", "--input", bad.to_str().unwrap(), "--n", "2", "--k", "1", "--lambda", "1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains(":4:"));

    let res = csdl(&["fit", "--input", bad.to_str().unwrap(), "--n", "2", "--k", "1", "--delta", "0.1"]);
    assert_eq!(res.status.code(), Some(1));

    let short = dir.path().join("short.csv");
    fs::write(&short, "1\n2\n").unwrap();
    let res = csdl(&["fit", "--input", short.to_str().unwrap(), "--n", "5", "--k", "1", "--lambda", "1"]);
    assert_eq!(res.status.code(), Some(1));

    let res = csdl(&["exp1", "--trials", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "trials = 4\nseed = 11\ngrid = [40, 80]\niterations = 15\nout = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let res = csdl(&["exp1", "--config", cfg.to_str().unwrap(), "--trials", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let (meta, records) = csdl::harness::read_trials(&out.join("exp1_trials.csv")).unwrap();
    assert_eq!(meta.get("trials"), Some("2"));
    assert_eq!(meta.get("master_seed"), Some("11"));
    assert_eq!(meta.get("iterations"), Some("15"));
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.wall_time_s.is_none()));

    // Re-summarizing the per-trial file reproduces the summary written by the run.
    let again = dir.path().join("again.csv");
    let res = csdl(&[
        "summarize",
        "--input",
        out.join("exp1_trials.csv").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let recomputed = fs::read_to_string(&again).unwrap();
    let written = fs::read_to_string(out.join("exp1_summary.csv")).unwrap();
    assert_eq!(recomputed.lines().count(), written.lines().count());
    // Per-trial values are stored to 12 digits, so only the last digit may move.
    for (a, b) in recomputed.lines().zip(written.lines()) {
        for (x, y) in a.split(',').zip(b.split(',')) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()), "{x} vs {y}"),
                _ => assert_eq!(x, y),
            }
        }
    }

    fs::write(&cfg, "trails = 4\n").unwrap();
    let res = csdl(&["exp1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn per_trial_csv_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let res = csdl(&[
            "exp2", "--trials", "3", "--grid", "4,8", "--iterations", "10", "--workers", workers, "--seed", "5",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        fs::read(out.join("exp2_trials.csv")).unwrap()
    };
    let one = run("1", "w1");
    assert_eq!(one, run("4", "w4"));
    assert_eq!(one, run("1", "w1b"));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("# csdl_csv_v1\n"));
    assert!(!text.contains('\r'));
}

#[test]
fn timing_flag_fills_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let res = csdl(&[
        "exp4", "--trials", "2", "--grid", "60", "--iterations", "5", "--timing", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let (_, records) = csdl::harness::read_trials(&out.join("exp4_trials.csv")).unwrap();
    assert!(records.iter().all(|r| r.wall_time_s.is_some() && r.mse_identity.is_none()));
}
