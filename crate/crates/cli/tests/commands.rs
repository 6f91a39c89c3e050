use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mwcz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwcz"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn repo_configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SHORT_PULSE: &str = r#"
[pulse]
amp = 0.05
duration = 10.0
waveform_samples = 21

[propagation]
stride = 200
"#;

fn run_ok(args: &[&str]) -> Output {
    let out = mwcz(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn simulate_writes_trace_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_PULSE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run_ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(header.starts_with("t_ns,p_00_to_00,"), "{header}");
    assert!(header.ends_with(",cphase_rad"));
    for name in ["trace.csv", "gate.json", "waveform.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let waveform = fs::read_to_string(a.join("waveform.csv")).unwrap();
    assert_eq!(waveform.lines().next(), Some("t_ns,amplitude_GHz"));
    assert_eq!(waveform.lines().count(), 22);
}

#[test]
fn missing_preset_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = mwcz(&["simulate", "--preset", "con42", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("con42"));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn malformed_config_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[pulse]\namplitude = 0.3\n");
    let out = mwcz(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_with_k_above_n_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scan]\npoints = 5\nk = 6\n");
    let start = std::time::Instant::now();
    let out = mwcz(&["scan", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn optimize_respects_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SHORT_PULSE}dt = 0.004\n\n[optimize]\nbudget = 3\nfree_params = [\"carrier_offset\"]\n"),
    );
    let out = dir.path().join("o");
    run_ok(&["optimize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let iterations = fs::read_to_string(out.join("iterations.csv")).unwrap();
    let rows = iterations.lines().count() - 1;
    assert!((1..=3).contains(&rows), "{iterations}");
    for name in ["waveform_initial.csv", "waveform_optimized.csv", "optimize.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn scan_rows_sorted_by_detuning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "{SHORT_PULSE}dt = 0.004\n\n[optimize]\nfree_params = [\"carrier_offset\"]\n\n\
             [scan]\ndelta_min = 0.08\ndelta_max = 0.12\npoints = 4\nk = 2\nbudget = 1\n"
        ),
    );
    let out = dir.path().join("o");
    run_ok(&["scan", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"]);
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta_GHz,best_error,iterations_used,collision_flag"));
    let deltas: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(deltas.len(), 4);
    assert!(deltas.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 4);
}

#[test]
fn noiseless_xeb_has_unit_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 3\n[xeb]\ncycles = [0, 2, 5, 10]\ncircuits_per_cycle = 30\np_dep = 0.0\nshots = 0\n",
    );
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();
    run_ok(&["xeb-generate", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    run_ok(&["xeb-analyze", "--config", cfg.to_str().unwrap(), "--out", out_s]);
    let csv = fs::read_to_string(out.join("xeb.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m_cycles,alpha,sqrt_purity,leak"));
    for line in lines {
        let alpha: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((alpha - 1.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn analyze_only_uses_existing_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_configs().join("xeb.toml");
    let gen = dir.path().join("gen");
    run_ok(&["xeb-generate", "--config", cfg.to_str().unwrap(), "--out", gen.to_str().unwrap(), "--seed", "5"]);
    let records = gen.join("records.json");

    let analysis = dir.path().join("analysis");
    let out = mwcz(&[
        "xeb-analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        analysis.to_str().unwrap(),
        "--records",
        records.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!analysis.join("records.json").exists());
    let csv = fs::read_to_string(analysis.join("xeb.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let leak: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&leak), "{r:?}");
    }
    assert!(analysis.join("xeb_fit.json").exists());
}

#[test]
fn readout_correct_inverts_prepared_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.txt");
    // Row 0 of the joint matrix: |00⟩ prepared.
    let row0 = [0.9551 * 0.9475, 0.9551 * 0.0525, 0.0449 * 0.9475, 0.0449 * 0.0525];
    fs::write(&input, format!("{},{},{},{}\n0.25 0.25 0.25 0.25\n", row0[0], row0[1], row0[2], row0[3])).unwrap();
    let out = dir.path().join("o");
    run_ok(&[
        "readout-correct",
        "--config",
        repo_configs().join("xeb.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("corrected.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("row,p_00,p_01,p_10,p_11,clipped_mass,condition_number"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    assert!((first[1] - 1.0).abs() < 1e-9 && first[2..5].iter().all(|v| v.abs() < 1e-9), "{first:?}");
}

#[test]
fn shipped_configs_validate() {
    for entry in fs::read_dir(repo_configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = mwcz_core::config::RunConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}
