use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_drs-inekf");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn sha256_file(p: &Path) -> String {
    Sha256::digest(std::fs::read(p).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn print_config_emits_parseable_defaults() {
    let o = run(&["--print-config"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["gait", "surface", "control_surface", "rates", "sensor_noise", "filter", "trials"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["trials"]["n_trials"], 100);

    // the printed config is itself a valid config
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &String::from_utf8(o.stdout).unwrap());
    let again = run(&["--print-config", "--config", &cfg]);
    assert_eq!(code(&again), 0);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&again.stdout).unwrap(), v);
}

#[test]
fn sim_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = run(&["sim", "--seed", "1", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(sha256_file(&a), sha256_file(&b));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["outputs"][0]["sha256"], sha256_file(&a));
    assert!(manifest["config"]["gait"]["duration"].is_number());

    let c = dir.path().join("c.jsonl");
    run(&["sim", "--seed", "2", "--out", c.to_str().unwrap()]);
    assert_ne!(sha256_file(&a), sha256_file(&c));
}

#[test]
fn sim_tiny_duration_has_truth() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 0.01}}"#);
    let out = dir.path().join("nested/dir/s.jsonl");
    let o = run(&["sim", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.contains(r#""kind":"truth""#)));
}

#[test]
fn config_errors_exit_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.jsonl");
    let out = out.to_str().unwrap();

    let cfg = write_config(dir.path(), "amp.json", r#"{"surface": {"pitch_amplitude": 0.35}}"#);
    let o = run(&["sim", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("surface.pitch_amplitude"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "type.json", r#"{"rates": {"imu": "fast"}}"#);
    let o = run(&["sim", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rates.imu"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "broken.json", r#"{"gait": "#);
    assert_eq!(code(&run(&["sim", "--config", &cfg, "--out", out])), 2);

    assert_eq!(code(&run(&["sim", "--config", "/nonexistent/c.json", "--out", out])), 2);
    assert!(!Path::new(out).exists());
}

#[test]
fn estimate_noiseless_keystone() {
    let dir = TempDir::new().unwrap();
    let z9 = vec!["0"; 9].join(",");
    let z144 = vec!["0"; 144].join(",");
    let zero = format!(
        r#"{{"gyro_cov":[{z9}],"accel_cov":[{z9}],"contact_vel_cov":[{z9}],"fk_pos_cov":[{z9}],
            "surface_orient_cov":[{z9}],"jump_cov":[{z144}]}}"#
    );
    let cfg = write_config(dir.path(), "c.json", &format!(r#"{{"sensor_noise": {zero}}}"#));
    let stream = dir.path().join("s.jsonl");
    let o = run(&["sim", "--config", &cfg, "--out", stream.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = dir.path().join("m.csv");
    let o = run(&["estimate", stream.to_str().unwrap(), "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let (header, rows) = csv_rows(&csv);
    assert_eq!(header, ["t", "variant", "pos_err", "vel_err", "roll_err", "pitch_err", "yaw_err", "nees"]);
    assert!(rows.len() >= 3000);
    for r in &rows {
        assert_eq!(r[1], "proposed");
        for v in &r[2..7] {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-5, "{r:?}");
        }
    }
    assert!(dir.path().join("m.csv.manifest.json").exists());
}

#[test]
fn estimate_variants_differ_in_yaw_on_rocking_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 10}}"#);
    let stream = dir.path().join("s.jsonl");
    assert_eq!(code(&run(&["sim", "--config", &cfg, "--seed", "5", "--out", stream.to_str().unwrap()])), 0);
    let mut final_yaw = Vec::new();
    for variant in ["proposed", "position-only"] {
        let csv = dir.path().join(format!("{variant}.csv"));
        let o = run(&[
            "estimate",
            stream.to_str().unwrap(),
            "--config",
            &cfg,
            "--variant",
            variant,
            "--seed",
            "11",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let (_, rows) = csv_rows(&csv);
        assert!(rows.iter().all(|r| r[1] == variant));
        final_yaw.push(rows.last().unwrap()[6].parse::<f64>().unwrap().abs());
    }
    assert!(final_yaw[0] < final_yaw[1], "{final_yaw:?}");

    assert_eq!(code(&run(&["estimate", stream.to_str().unwrap(), "--variant", "bogus", "--out", "x.csv"])), 2);
}

#[test]
fn estimate_rejects_bad_streams() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 0.5}}"#);
    let stream = dir.path().join("s.jsonl");
    assert_eq!(code(&run(&["sim", "--config", &cfg, "--out", stream.to_str().unwrap()])), 0);
    let text = std::fs::read_to_string(&stream).unwrap();
    let out = dir.path().join("m.csv");
    let out = out.to_str().unwrap();

    // truncated last line
    let bad = dir.path().join("truncated.jsonl");
    std::fs::write(&bad, &text[..text.len() - 20]).unwrap();
    let o = run(&["estimate", bad.to_str().unwrap(), "--out", out]);
    assert_ne!(code(&o), 0);
    let n_lines = text.lines().count();
    assert!(stderr(&o).contains(&format!("line {n_lines}")), "{}", stderr(&o));

    // move the first IMU record (t = 0) after a later kinematics sample
    let mut lines: Vec<&str> = text.lines().collect();
    let i = lines.iter().position(|l| l.contains(r#""kind":"imu""#)).unwrap();
    let imu = lines.remove(i);
    let j = lines.iter().position(|l| l.contains(r#""kind":"fk_pos""#) && !l.contains(r#""t":0.0"#)).unwrap();
    lines.insert(j + 1, imu);
    let bad = dir.path().join("reordered.jsonl");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let o = run(&["estimate", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains(&format!("line {}:", j + 2)), "{}", stderr(&o));

    let o = run(&["estimate", "/nonexistent.jsonl", "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(!Path::new(out).exists());
}

#[test]
fn montecarlo_smoke_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 5}, "trials": {"n_trials": 2}}"#);
    let out = dir.path().join("missing/out");
    let start = Instant::now();
    let o = run(&["montecarlo", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(start.elapsed().as_secs() < 30);
    // two short trials may or may not meet the gating thresholds
    assert!(matches!(code(&o), 0 | 4), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("yaw observable on rocking surface"));

    let (header, rows) = csv_rows(&out.join("rocking_aggregate.csv"));
    assert_eq!(header, ["t", "variant", "metric", "p10", "p50", "p90"]);
    assert!(!rows.is_empty());
    for r in &rows {
        let p: Vec<f64> = r[3..6].iter().map(|v| v.parse().unwrap()).collect();
        assert!(p[0] <= p[1] && p[1] <= p[2], "{r:?}");
    }
    for tag in ["rocking", "control"] {
        for metric in ["pos_err", "vel_err", "roll_err", "pitch_err", "yaw_err", "nees"] {
            let svg = std::fs::read_to_string(out.join(format!("plots/{tag}_{metric}.svg"))).unwrap();
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            assert_eq!(svg.matches("<polyline").count(), 2);
        }
        assert!(out.join(format!("trials/{tag}/trial_001.csv")).exists());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2 * (1 + 2 + 6));
}

#[test]
fn montecarlo_outputs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 3}, "trials": {"n_trials": 3}}"#);
    let digest = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        run(&["montecarlo", "--config", &cfg, "--seed", "9", "--jobs", jobs, "--out", out.to_str().unwrap()]);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| (Path::new(f["path"].as_str().unwrap()).strip_prefix(&out).unwrap().to_owned(), f["sha256"].clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(digest("a", "1"), digest("b", "3"));
}

#[test]
fn montecarlo_gating_failure_exits_4() {
    let dir = TempDir::new().unwrap();
    // a level "rocking" surface leaves yaw unobservable for both variants
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"surface": {"pitch_amplitude": 0.0}, "gait": {"duration": 8}, "trials": {"n_trials": 4}}"#,
    );
    let o = run(&["montecarlo", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("yaw observable on rocking surface"), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn montecarlo_unwritable_output_exits_2() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"gait": {"duration": 1}, "trials": {"n_trials": 1}}"#);
    let o = run(&["montecarlo", "--config", &cfg, "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn montecarlo_full_reference_run_passes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["montecarlo", "--out", dir.path().join("full").to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}\n{}", stderr(&o));
    assert!(!stdout.contains("FAIL"));
    assert_eq!(stdout.matches("PASS").count(), 9);
}
