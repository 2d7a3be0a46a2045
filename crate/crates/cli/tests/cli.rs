use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn leggett(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leggett"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn settings_standard_at_30() {
    let o = leggett(&["settings", "--phi", "30", "--geometry", "standard"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["phi_deg"], 30.0);
    let b1 = &v["triplets"][0]["b"];
    assert!((b1[0].as_f64().unwrap() - 0.96593).abs() < 1e-5);
    assert!((b1[1].as_f64().unwrap() - 0.25882).abs() < 1e-5);
    assert!(b1[2].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn settings_zero_angle_and_tetrahedron() {
    let o = leggett(&["settings", "--phi", "0"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for t in v["triplets"].as_array().unwrap() {
        assert_eq!(t["b"], t["b_prime"]);
    }
    let o = leggett(&["settings", "--geometry", "tetrahedron", "--phi", "30"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["xi"].as_f64().unwrap() - 0.40825).abs() < 1e-5);
    assert_eq!(v["triplets"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(leggett(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(leggett(&["settings"]).status.code(), Some(1));
    assert_eq!(leggett(&["--format", "xml", "xi"]).status.code(), Some(1));
    assert_eq!(leggett(&["audit"]).status.code(), Some(1));
    assert_eq!(leggett(&["settings", "--phi", "200"]).status.code(), Some(2));
    assert_eq!(leggett(&["bound", "--eta", "1.5"]).status.code(), Some(2));
    assert_eq!(
        leggett(&["eta", "--scan", "/nonexistent/scan.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(leggett(&["--help"]).status.code(), Some(0));
}

#[test]
fn bound_summary_and_rows() {
    let o = leggett(&["bound", "--phi=-30,30", "--visibility", "0.984"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1].parse::<f64>().unwrap() - 1.82745).abs() < 1e-5);
    assert!((rows[0][2].parse::<f64>().unwrap() - 1.90094).abs() < 1e-5);
    let err = stderr(&o);
    assert!(err.contains("threshold visibility: 0.942809"));
    assert!(err.contains("0.528"));

    let o = leggett(&["--format", "json", "bound", "--phi", "25", "--visibility", "0.984"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["summary"]["min_falsifiable_eta_grid"].as_f64().unwrap() - 0.545).abs() < 1e-3);
}

#[test]
fn predict_matches_closed_form() {
    let o = leggett(&["predict", "--phi", "30", "--visibility", "1"]);
    let rows = csv_rows(&stdout(&o));
    assert!((rows[0][1].parse::<f64>().unwrap() - 1.931852).abs() < 1e-6);
}

#[test]
fn xi_values() {
    let o = leggett(&["xi", "--dirs", "1,0,0;0,1,0;0,0,1"]);
    let rows = csv_rows(&stdout(&o));
    assert!((rows[0][2].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    let o = leggett(&["--format", "json", "xi", "--dirs", "0,0,-1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["xi"].as_f64().unwrap().abs() < 1e-4);
    assert_eq!(leggett(&["xi", "--dirs", "1,0"]).status.code(), Some(1));
}

#[test]
fn default_scan_is_the_interleaved_grid() {
    let o = leggett(&["--seed", "3", "scan"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 22);
    assert_eq!(rows[0][0], "-55.0");
    assert_eq!(rows[21][0], "55.0");
    assert!(stdout(&o).starts_with("phi_deg,L_exp,sigma_L,bound,L_qm,sigmas\n"));
}

#[test]
fn exact_scan_has_zero_sigma() {
    let o = leggett(&["--exact", "scan"]);
    for r in csv_rows(&stdout(&o)) {
        assert_eq!(r[2], "0.0");
        assert_eq!(r[1], r[4]);
        assert_eq!(r[5], "");
    }
}

#[test]
fn seeded_scan_is_reproducible_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    let a = out("a.csv");
    let b = out("b.csv");
    for p in [&a, &b] {
        let o = leggett(&["--seed", "42", "--out", p.to_str().unwrap(), "scan", "--preset", "wide"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(out("a.csv.quads.csv")).unwrap(),
        fs::read(out("b.csv.quads.csv")).unwrap()
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "scan");
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    let quads = fs::read_to_string(out("a.csv.quads.csv")).unwrap();
    assert!(quads.starts_with("setting_id,c_pp,c_mm,c_mp,c_pm,C,sigma_C\n"));

    let c = out("c.csv");
    leggett(&["--seed", "43", "--out", c.to_str().unwrap(), "scan"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn scan_from_config_file_and_json_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"phi_deg":[-30,30],"model":{"kind":"singlet","V":0.984},"mean_pairs_per_setting":72000,"seed":5,
            "misalignment":{"kind":"dial_offset","delta_deg":0.2}}"#,
    )
    .unwrap();
    let o = leggett(&["--format", "json", "scan", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["provenance"]["seed"], 5);
    assert_eq!(v["config"]["misalignment"]["kind"], "dial_offset");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);

    fs::write(
        &cfg,
        r#"{"phi_deg":[],"model":{"kind":"singlet","V":0.9},"mean_pairs_per_setting":1,"seed":1}"#,
    )
    .unwrap();
    assert_eq!(
        leggett(&["scan", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

fn write_scan(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("scan.csv");
    let o = leggett(&["--seed", "2008", "--out", p.to_str().unwrap(), "scan"]);
    assert!(o.status.success());
    p
}

#[test]
fn eta_table_from_scan() {
    let dir = tempfile::tempdir().unwrap();
    let scan = write_scan(dir.path());
    let scan_rows = csv_rows(&fs::read_to_string(&scan).unwrap());
    let max_sigmas = scan_rows
        .iter()
        .map(|r| r[5].parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);

    let o = leggett(&["eta", "--scan", scan.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("eta,excess,sigma_excess,best_phi_deg,sigmas\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 11);
    let sig: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(sig.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(rows[10][0], "1.0");
    assert!((sig[10] - max_sigmas).abs() < 1e-9);
    assert!(stderr(&o).contains("smallest eta with sigmas >= 3.65"));
}

#[test]
fn audit_verdicts() {
    let o = leggett(&["audit", "--family", "leggett", "--eta", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("flatness") && l.contains("FAIL")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("compatibility") && l.contains("FAIL")));
    assert!(text.contains("verdict: FAIL"));

    let o = leggett(&["audit", "--family", "zero"]);
    assert!(stdout(&o).contains("verdict: PASS"));

    let o = leggett(&["--format", "json", "audit", "--family", "leggett", "--eta", "0.3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passes"], false);
}

#[test]
fn audit_model_file_with_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(
        &model,
        r#"{"family":"leggett","eta":0.1,"lambda_samples":8,"seed":3,"subdivisions":2}"#,
    )
    .unwrap();
    let out = dir.path().join("audit.json");
    let o = leggett(&[
        "--out",
        out.to_str().unwrap(),
        "audit",
        "--model",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: FAIL"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["compatibility"]["passes"], false);
    assert!(dir.path().join("audit.json.manifest.json").exists());
}
