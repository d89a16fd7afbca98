use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use qdt_cli::commands::paths;
use qdt_cli::StudyConfig;
use serde_json::Value;
use tempfile::TempDir;

fn qdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdt"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("qdt runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The two-ion config with fewer trials so each stage takes well under a second.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = StudyConfig::two_ion();
    cfg.experiment.n_trials = 2000;
    let path = dir.join("study.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn complex_matrix(rows: &[&[(f64, f64)]]) -> Value {
    Value::Array(rows.iter().map(|r| Value::Array(r.iter().map(|&(re, im)| serde_json::json!([re, im])).collect())).collect())
}

fn identity4() -> Value {
    let z = (0.0, 0.0);
    let o = (1.0, 0.0);
    complex_matrix(&[&[o, z, z, z], &[z, o, z, z], &[z, z, o, z], &[z, z, z, o]])
}

/// All files under `dir` except the manifest, keyed by relative path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                if rel != "manifest.json" {
                    out.push((rel, fs::read(&p).unwrap()));
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn shipped_config_matches_builtin() {
    let shipped = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/two_ion.json")).unwrap();
    assert_eq!(shipped, StudyConfig::two_ion().to_json());
    let tmp = TempDir::new().unwrap();
    let out = qdt(tmp.path(), &["config"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), shipped);
}

#[test]
fn simulate_writes_histograms_of_the_expected_shape() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    let out = qdt(&run, &["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let raw = read_json(run.join(paths::RAW));
    let counts = raw["counts"].as_array().unwrap();
    assert_eq!(counts.len(), 2);
    for fam in counts {
        let rows = fam.as_array().unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 61));
    }
    assert!(run.join("simulate/reference.csv").exists());
    assert!(run.join("simulate/probing_1.csv").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        assert_eq!(code(&qdt(dir, &["--seed", "42", "simulate", cfg.to_str().unwrap()])), 0);
        assert_eq!(code(&qdt(dir, &["fit"])), 0);
    }
    assert_eq!(snapshot(&a), snapshot(&b));

    let c = tmp.path().join("c");
    assert_eq!(code(&qdt(&c, &["--seed", "43", "simulate", cfg.to_str().unwrap()])), 0);
    assert_ne!(fs::read(a.join(paths::RAW)).unwrap(), fs::read(c.join(paths::RAW)).unwrap());
}

#[test]
fn missing_poisson_means_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut v: Value = serde_json::from_str(&StudyConfig::two_ion().to_json()).unwrap();
    v["experiment"].as_object_mut().unwrap().remove("poisson_means");
    let cfg = write_json(tmp.path(), "bad.json", &v);
    let out = qdt(&tmp.path().join("run"), &["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("poisson_means"), "{}", stderr(&out));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = qdt(&tmp.path().join("run"), &["simulate", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn stages_need_their_upstream() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let out = qdt(&run, &["fit"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));

    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    assert_eq!(code(&qdt(&run, &["bounds"])), 4);
    assert_eq!(code(&qdt(&run, &["fit"])), 0);
    let out = qdt(&run, &["bootstrap", "--t", "2"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("bounds"), "{}", stderr(&out));
    assert_eq!(code(&qdt(&run, &["report"])), 4);
}

#[test]
fn rerunning_upstream_invalidates_downstream() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    assert_eq!(code(&qdt(&run, &["fit"])), 0);
    assert_eq!(code(&qdt(&run, &["bounds"])), 0);
    assert_eq!(code(&qdt(&run, &["fit", "--bins", "6"])), 0);
    assert_eq!(code(&qdt(&run, &["bootstrap", "--t", "2"])), 4);
}

#[test]
fn corrupted_histograms_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    let raw = run.join(paths::RAW);
    let text = fs::read_to_string(&raw).unwrap();
    let pos = text.find(|c: char| c.is_ascii_digit() && c != '0').unwrap();
    let mut bytes = text.into_bytes();
    bytes[pos] = if bytes[pos] == b'9' { b'8' } else { bytes[pos] + 1 };
    fs::write(&raw, bytes).unwrap();
    let out = qdt(&run, &["fit"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("histograms.json"), "{}", stderr(&out));
}

#[test]
fn too_few_settings_is_a_precondition_failure() {
    let tmp = TempDir::new().unwrap();
    let mut v: Value = serde_json::from_str(&StudyConfig::two_ion().to_json()).unwrap();
    // the identity setting alone sees only one of the three subspaces
    v["experiment"]["unitaries"].as_array_mut().unwrap().truncate(1);
    v["experiment"]["n_trials"] = Value::from(2000);
    let cfg = write_json(tmp.path(), "one_setting.json", &v);
    let run = tmp.path().join("run");
    let out = qdt(&run, &["simulate", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = qdt(&run, &["fit"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).to_lowercase().contains("rank"), "{}", stderr(&out));
}

#[test]
fn full_resolution_bins_use_the_identity_rule() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    let out = qdt(&run, &["fit", "--bins", "61"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rule = read_json(run.join(paths::BIN_RULE));
    let edges: Vec<u64> = rule.as_array().unwrap().iter().map(|e| e.as_u64().unwrap()).collect();
    assert_eq!(edges, (0..=61).collect::<Vec<_>>());
    assert_eq!(code(&qdt(&run, &["fit", "--bins", "62"])), 2);
    assert_eq!(code(&qdt(&run, &["fit", "--bins", "0"])), 2);
}

#[test]
fn bounds_for_builtin_and_custom_observables() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    assert_eq!(code(&qdt(&run, &["fit"])), 0);
    let estimate = read_json(run.join(paths::ESTIMATE));
    assert_eq!(estimate["converged"], Value::Bool(true));
    assert!(estimate["s_sigma"].as_f64().unwrap() <= 0.3);
    assert!(estimate["s_q"].as_f64().unwrap() <= 0.25);

    let id = write_json(tmp.path(), "identity.json", &serde_json::json!({ "label": "identity", "matrix": identity4() }));
    let out = qdt(&run, &["bounds", "--observable", "bell", "--observable", "second-ion-bright", "--observable", id.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bounds = read_json(run.join(paths::BOUNDS));
    let row = bounds[0].as_array().unwrap();
    let get = |k: usize, f: &str| row[k][f].as_f64().unwrap();
    assert!(get(0, "upper") - get(0, "lower") <= 1e-6);
    assert!(get(1, "upper") - get(1, "lower") > 1e-6);
    assert!((get(2, "lower") - 1.0).abs() <= 1e-9 && (get(2, "upper") - 1.0).abs() <= 1e-9);
}

#[test]
fn bad_observable_files_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = small_config(tmp.path());
    assert_eq!(code(&qdt(&run, &["simulate", cfg.to_str().unwrap()])), 0);
    assert_eq!(code(&qdt(&run, &["fit"])), 0);

    let mut m = identity4();
    m[0][1] = serde_json::json!([0.5, 0.0]);
    let skew = write_json(tmp.path(), "skew.json", &serde_json::json!({ "label": "skew", "matrix": m }));
    let out = qdt(&run, &["bounds", "--observable", skew.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let z = (0.0, 0.0);
    let qubit = write_json(tmp.path(), "qubit.json", &serde_json::json!({ "label": "z", "matrix": complex_matrix(&[&[(1.0, 0.0), z], &[z, (-1.0, 0.0)]]) }));
    assert_eq!(code(&qdt(&run, &["bounds", "--observable", qubit.to_str().unwrap()])), 2);

    let garbled = tmp.path().join("garbled.json");
    fs::write(&garbled, "{\"label\": \"x\"}").unwrap();
    let out = qdt(&run, &["bounds", "--observable", garbled.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("matrix"), "{}", stderr(&out));
}

#[test]
fn smoke_run_with_two_resamples() {
    let tmp = TempDir::new().unwrap();
    let run = tmp.path().join("run");
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/two_ion.json");
    let start = Instant::now();
    let out = qdt(&run, &["run", cfg, "--t", "2", "--workers", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(start.elapsed() < Duration::from_secs(60));

    let md = String::from_utf8(out.stdout).unwrap();
    for row in ["| True |", "| M.L. |", "| SDPs |", "| Basic C.I. |", "| Bias corrected C.I. |"] {
        assert!(md.contains(row), "missing {row} in\n{md}");
    }
    assert!(md.contains("Λ₀ = "));
    assert_eq!(fs::read_to_string(run.join(paths::TABLE_MD)).unwrap(), md);
    for p in [paths::TABLE_CSV, paths::PLOT_HISTOGRAMS, paths::PLOT_LOGLIKE, paths::PLOT_MI, paths::PLOT_BOOTSTRAP] {
        assert!(run.join(p).exists(), "{p}");
    }
    let records = fs::read_to_string(run.join(paths::RECORDS)).unwrap();
    assert_eq!(records.lines().count(), 2);

    // report is idempotent
    let before = snapshot(&run);
    assert_eq!(code(&qdt(&run, &["report"])), 0);
    assert_eq!(snapshot(&run), before);
}
