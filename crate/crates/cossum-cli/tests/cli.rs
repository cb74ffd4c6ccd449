//! End-to-end runs of the compiled binary through temp directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cossum")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should launch")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("write temp file");
    path
}

fn reference_params(dir: &Path) -> PathBuf {
    write_file(
        dir,
        "params.toml",
        "gamma = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]\n\
         phi = [4.47213595499957939, 0.44721359549995794, 2.23606797749978969, \
         3.87298334620741689, 1.73205080756887729, 3.88587191201541037, \
         2.64575131106459059]\n",
    )
}

fn report_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout should be a JSON report")
}

#[test]
fn generate_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let csv = dir.path().join("samples.csv");
    run_ok(&[
        "generate",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "100",
        "--k",
        "20",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "k,t,value");
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn seeded_noise_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    for out in [&first, &second] {
        run_ok(&[
            "generate",
            "--params",
            params.to_str().unwrap(),
            "--n",
            "50",
            "--k",
            "10",
            "--noise",
            "0.5",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().next().unwrap().starts_with("k,t,value,clean"));
}

#[test]
fn recover_round_trips_the_reference_signal() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let csv = dir.path().join("samples.csv");
    run_ok(&[
        "generate",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "100",
        "--k",
        "20",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = run_ok(&[
        "recover",
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "esprit",
        "--k",
        "20",
        "--truth",
        params.to_str().unwrap(),
    ]);
    let report = report_json(&out);
    assert_eq!(report["schema"], 1);
    assert_eq!(report["method"], "esprit");
    assert_eq!(report["m"], 7);
    let e_phi = report["errors"]["e_phi"].as_f64().unwrap();
    assert!(e_phi < 1e-8, "e_phi = {e_phi}");
}

#[test]
fn rational_route_detects_the_term_count() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let csv = dir.path().join("samples.csv");
    run_ok(&[
        "generate",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "100",
        "--k",
        "20",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = run_ok(&[
        "recover",
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "espira1",
        "--k",
        "20",
    ]);
    let report = report_json(&out);
    assert_eq!(report["m"], 7);
    assert_eq!(report["phi"].as_array().unwrap().len(), 7);
}

#[test]
fn direct_solver_agrees_with_the_rational_route() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_file(
        dir.path(),
        "small.toml",
        "gamma = [2.0, -1.0]\nphi = [1.3, 3.7]\n",
    );
    let csv = dir.path().join("samples.csv");
    run_ok(&[
        "generate",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "40",
        "--k",
        "8",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let prony = report_json(&run_ok(&[
        "recover",
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "prony",
        "--fixed-m",
        "2",
        "--k",
        "8",
    ]));
    let espira = report_json(&run_ok(&[
        "recover",
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "espira1",
        "--k",
        "8",
    ]));
    let phi_a = prony["phi"].as_array().unwrap();
    let phi_b = espira["phi"].as_array().unwrap();
    assert_eq!(phi_a.len(), phi_b.len());
    for (a, b) in phi_a.iter().zip(phi_b) {
        let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        assert!((a - b).abs() < 1e-8, "prony {a} vs espira {b}");
    }
}

#[test]
fn truncated_csv_exits_with_the_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.csv", "k,t,value\n0,0.1\n");
    let out = run(&[
        "recover",
        "--input",
        bad.to_str().unwrap(),
        "--k",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr: {stderr}");
}

#[test]
fn mismatched_time_column_exits_with_the_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(
        dir.path(),
        "bad.csv",
        "k,t,value\n0,0.05,1.0\n1,0.15,1.0\n2,0.99,1.0\n",
    );
    let out = run(&[
        "recover",
        "--input",
        bad.to_str().unwrap(),
        "--k",
        "31.41592653589793",
    ]);
    assert_eq!(out.status.code(), Some(2 + 1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(dir.path(), "s.csv", "k,t,value\n0,0.1,1.0\n");
    // Unknown flag: clap's native usage failure.
    let out = run(&["recover", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    // Prony without a term count: our own usage failure.
    let out = run(&[
        "recover",
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "prony",
        "--k",
        "15.707963267948966",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Missing K entirely.
    let out = run(&["recover", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    // All-zero data defeats every detector.
    let mut text = String::from("k,t,value\n");
    for k in 0..20 {
        let t = (2 * k + 1) as f64 * std::f64::consts::PI / 20.0;
        text.push_str(&format!("{k},{t:.16e},0.0\n"));
    }
    let zeros = write_file(dir.path(), "zeros.csv", &text);
    let out = run(&[
        "recover",
        "--input",
        zeros.to_str().unwrap(),
        "--method",
        "espira1",
        "--k",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn dct_dump_has_full_and_half_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let csv = dir.path().join("samples.csv");
    run_ok(&[
        "generate",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "64",
        "--k",
        "16",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let full = dir.path().join("full.csv");
    run_ok(&[
        "dct",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        full.to_str().unwrap(),
    ]);
    let half = dir.path().join("half.csv");
    run_ok(&[
        "dct",
        "--input",
        csv.to_str().unwrap(),
        "--half-spectrum",
        "--out",
        half.to_str().unwrap(),
    ]);
    let full_rows = std::fs::read_to_string(&full).unwrap().lines().count();
    let half_rows = std::fs::read_to_string(&half).unwrap().lines().count();
    assert_eq!(full_rows, 65);
    assert_eq!(half_rows, 33);
}

#[test]
fn bessel_approximation_stays_within_tolerance() {
    let out = run_ok(&["bessel", "--method", "espira2"]);
    let report = report_json(&out);
    let max_error = report["max_error"].as_f64().unwrap();
    assert!(max_error < 1e-5, "max_error = {max_error}");
    for phi in report["phi"].as_array().unwrap() {
        let phi = phi.as_f64().unwrap();
        assert!((0.0..=1.05).contains(&phi), "phi = {phi}");
    }
}

#[test]
fn noise_bench_emits_trial_and_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_file(
        dir.path(),
        "small.toml",
        "gamma = [3.0, 1.5]\nphi = [0.9, 2.6]\n",
    );
    let out_csv = dir.path().join("bench.csv");
    run_ok(&[
        "noise-bench",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "400",
        "--k",
        "10",
        "--amplitude",
        "0.3",
        "--trials",
        "3",
        "--methods",
        "esprit,espira2",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kind,seed,method,e_f,e_phi,e_gamma,snr_db,psnr_db,note");
    let trial_rows = lines.iter().filter(|l| l.starts_with("trial,")).count();
    let summary_rows = lines
        .iter()
        .filter(|l| {
            l.starts_with("min,") || l.starts_with("max,") || l.starts_with("average,")
        })
        .count();
    assert_eq!(trial_rows, 6);
    assert_eq!(summary_rows, 6);
    // Same base seed twice: trial rows must repeat exactly.
    let again = dir.path().join("bench2.csv");
    run_ok(&[
        "noise-bench",
        "--params",
        params.to_str().unwrap(),
        "--n",
        "400",
        "--k",
        "10",
        "--amplitude",
        "0.3",
        "--trials",
        "3",
        "--methods",
        "esprit,espira2",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn config_file_fills_in_defaults_but_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let params = reference_params(dir.path());
    let csv = dir.path().join("samples.csv");
    let config = write_file(
        dir.path(),
        "run.toml",
        "n = 100\nk = 20.0\nmethod = \"prony\"\nfixed_m = 7\n",
    );
    run_ok(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    // Config supplies K and the method.
    let from_config = report_json(&run_ok(&[
        "recover",
        "--config",
        config.to_str().unwrap(),
        "--input",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(from_config["method"], "prony");
    assert_eq!(from_config["m"], 7);
    // The flag overrides the config method.
    let overridden = report_json(&run_ok(&[
        "recover",
        "--config",
        config.to_str().unwrap(),
        "--input",
        csv.to_str().unwrap(),
        "--method",
        "espira2",
    ]));
    assert_eq!(overridden["method"], "espira2");

    let bad_config = write_file(dir.path(), "bad.toml", "unknown_key = 1\n");
    let out = run(&[
        "recover",
        "--config",
        bad_config.to_str().unwrap(),
        "--input",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
