//! End-to-end tests against the compiled binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn qkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr_str(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

fn temp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("qkd-cli-test-{}-{name}", std::process::id()));
    path
}

#[test]
fn rate_reports_positive_key_at_curve_a_point() {
    let output = qkd(&["rate", "--mu", "0.19", "--length-km", "50", "--format", "json"]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    let rates = &doc["results"]["key_rates"];
    let r_final = rates["R_final"].as_f64().unwrap();
    assert!(
        (8.0e-5..1.0e-4).contains(&r_final),
        "R_final = {r_final}"
    );
    assert_eq!(rates["strategy"], "both");
}

#[test]
fn missing_required_key_is_named() {
    let output = qkd(&["rate", "--length-km", "50"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr_str(&output).contains("'mu'"), "{}", stderr_str(&output));

    let output = qkd(&["sweep"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr_str(&output).contains("'distances_km'"),
        "{}",
        stderr_str(&output)
    );

    let output = qkd(&["montecarlo", "--mu", "0.19", "--length-km", "20"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr_str(&output).contains("'pulses'"),
        "{}",
        stderr_str(&output)
    );
}

#[test]
fn unknown_config_key_rejected_with_location() {
    let config = temp_path("unknown.conf");
    std::fs::write(&config, "mu = 0.19\nwavelength = 1550\n").unwrap();
    let output = qkd(&["rate", "--config", config.to_str().unwrap(), "--length-km", "20"]);
    assert_eq!(output.status.code(), Some(1));
    let err = stderr_str(&output);
    assert!(err.contains("line 2"), "{err}");
    assert!(err.contains("wavelength"), "{err}");
    std::fs::remove_file(&config).ok();
}

#[test]
fn precision_controls_significant_digits() {
    let output = qkd(&[
        "rate",
        "--mu",
        "0.19",
        "--length-km",
        "20",
        "--precision",
        "3",
    ]);
    assert!(output.status.success());
    let text = stdout_str(&output);
    assert!(text.contains("mu,1.90e-1"), "{text}");
}

#[test]
fn sweep_is_byte_identical_across_reruns() {
    let config = temp_path("sweep.conf");
    std::fs::write(
        &config,
        "protocol = efficient_pdc\ndistances_km = 10,60,120\n",
    )
    .unwrap();
    let out_a = temp_path("sweep-a.csv");
    let out_b = temp_path("sweep-b.csv");
    for out in [&out_a, &out_b] {
        let output = qkd(&[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr_str(&output));
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for path in [&config, &out_a, &out_b] {
        std::fs::remove_file(path).ok();
    }
}

#[test]
fn empty_distance_list_yields_header_only() {
    let config = temp_path("empty.conf");
    std::fs::write(&config, "distances_km =\n").unwrap();
    let output = qkd(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    assert_eq!(
        stdout_str(&output),
        "l_km,mu,Q_t,E_t,Q_nt,E_nt,r,R_t,R_both,R_final,x_star\n"
    );
    std::fs::remove_file(&config).ok();
}

#[test]
fn montecarlo_passes_and_echoes_seed() {
    let output = qkd(&[
        "montecarlo",
        "--mu",
        "0.19",
        "--length-km",
        "20",
        "--pulses",
        "1000000",
        "--seed",
        "42",
        "--format",
        "json",
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    assert_eq!(doc["results"]["rng"]["seed"], 42);
    assert_eq!(doc["results"]["rng"]["algorithm"], "chacha8");
    assert_eq!(doc["results"]["pass"], true);
    let max_z = doc["results"]["max_abs_z"].as_f64().unwrap();
    assert!(max_z < 5.0, "max |z| = {max_z}");
}

#[test]
fn statistical_threshold_failure_exits_3() {
    let config = temp_path("tight.conf");
    std::fs::write(
        &config,
        "mu = 0.19\nlength_km = 20\npulses = 100000\nseed = 11\nz_threshold = 1e-4\n",
    )
    .unwrap();
    let output = qkd(&["montecarlo", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(3), "{}", stderr_str(&output));
    // the report is still emitted before the failure status
    assert!(stdout_str(&output).contains("observable,empirical,analytic,se,z"));
    std::fs::remove_file(&config).ok();
}

#[test]
fn attack_reports_ratio_against_reference_odds() {
    let output = qkd(&[
        "attack",
        "--mu",
        "0.19",
        "--length-km",
        "20",
        "--pulses",
        "500000",
        "--seed",
        "3",
        "--block-fraction",
        "1.0",
        "--format",
        "json",
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    let attack = &doc["results"]["attack"];
    let r_observed = attack["r_observed"].as_f64().unwrap();
    let r_1 = attack["r_reference"]["r_1"].as_f64().unwrap();
    let r_2 = attack["r_reference"]["r_2"].as_f64().unwrap();
    assert!(
        r_observed > r_2,
        "full block should push r above r_2: {r_observed} vs {r_2}"
    );
    assert!(r_1 < r_2);
}

/// The JSON report's config echo must reproduce the run: feeding it back
/// as a config file yields an identical report.
#[test]
fn json_report_round_trips_through_its_config_echo() {
    let output = qkd(&[
        "rate",
        "--mu",
        "0.19",
        "--length-km",
        "30",
        "--format",
        "json",
    ]);
    assert!(output.status.success());
    let first = stdout_str(&output);
    let doc: serde_json::Value = serde_json::from_str(&first).unwrap();

    let mut lines = String::new();
    for (key, value) in doc["config"].as_object().unwrap() {
        let rendered = match value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        lines.push_str(&format!("{key} = {rendered}\n"));
    }
    let config = temp_path("roundtrip.conf");
    std::fs::write(&config, &lines).unwrap();

    let output = qkd(&["rate", "--config", config.to_str().unwrap()]);
    // format comes from the echoed config, so this is JSON again
    assert!(output.status.success(), "{}", stderr_str(&output));
    let second = stdout_str(&output);
    assert_eq!(first, second);
    std::fs::remove_file(&config).ok();
}

#[test]
fn degenerate_observables_exit_2() {
    let config = temp_path("dead.conf");
    // no receiver efficiency and no background: nothing ever detects
    std::fs::write(&config, "mu = 0.19\nlength_km = 20\neta_b = 0\np_d = 0\n").unwrap();
    let output = qkd(&["rate", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{}", stderr_str(&output));
    assert!(stderr_str(&output).contains("degenerate"), "{}", stderr_str(&output));
    std::fs::remove_file(&config).ok();
}

#[test]
fn cutoff_locates_ideal_reach() {
    let config = temp_path("cutoff.conf");
    std::fs::write(
        &config,
        "protocol = ideal_single_photon\ncutoff_lo_km = 150\ncutoff_hi_km = 220\n",
    )
    .unwrap();
    let output = qkd(&[
        "cutoff",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(output.status.success(), "{}", stderr_str(&output));
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    let cutoff = doc["results"]["cutoff_km"].as_f64().unwrap();
    assert!((cutoff - 171.5).abs() < 1.0, "cutoff = {cutoff}");
    std::fs::remove_file(&config).ok();
}
