use std::path::{Path, PathBuf};
use std::process::Command;

use meanfield::experiment::{load_config, parse_config, validate};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meanfield"))
}

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"{
  "kind": "coupling_rate",
  "seed": 5,
  "n_list": [20, 40, 80],
  "time": {"t_end": 0.2, "dt": 0.01},
  "replicas": 4,
  "model": {"family": "ou"},
  "thresholds": {"slope_max": 10.0}
}"#;

#[test]
fn shipped_configs_validate() {
    for p in configs() {
        let cfg = load_config(&p).unwrap();
        assert_eq!(validate(&cfg), vec![], "{}", p.display());
    }
}

#[test]
fn empty_n_list_names_the_field() {
    let cfg = parse_config(&SMALL.replace("[20, 40, 80]", "[]")).unwrap();
    let v = validate(&cfg);
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].field, "n_list");
}

#[test]
fn non_spd_gamma_is_a_violation() {
    let text = r#"{"kind": "eks", "seed": 1, "n_list": [10], "time": {"t_end": 1, "dt": 0.1},
                   "model": {"gamma": [[1.0, 2.0], [2.0, 1.0]]}}"#;
    let v = validate(&parse_config(text).unwrap());
    assert!(v.iter().any(|x| x.field == "model.gamma"), "{v:?}");
}

#[test]
fn schema_errors_are_reported() {
    let cases = [
        (SMALL.replace("\"seed\": 5,", ""), "seed"),
        (SMALL.replace("[20, 40, 80]", "[40, 20, 80]"), "n_list"),
        (SMALL.replace("[20, 40, 80]", "[20, 40]"), "n_list"),
        (SMALL.replace("coupling_rate", "teleport"), "kind"),
        (SMALL.replace("\"family\": \"ou\"", "\"famly\": \"ou\""), "model"),
        (SMALL.replace("\"dt\": 0.01", "\"dt\": 0"), "time.dt"),
    ];
    for (text, field) in cases {
        let v = validate(&parse_config(&text).unwrap());
        assert!(v.iter().any(|x| x.field == field), "{field}: {v:?}");
    }
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\"kind\": \"cbo\",");
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    let missing_seed = write(dir.path(), "noseed.json", &SMALL.replace("\"seed\": 5,", ""));
    let status = bin()
        .arg("run")
        .arg(&missing_seed)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());

    let status = bin().arg("validate").arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&a).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bin()
        .args(["run", "--threads", "3"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in ["manifest.json", "summary.json", "coupling_n20.csv", "rate_fit.json"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["model"]["lambda"], 1.0);
    let csv = std::fs::read_to_string(a.join("coupling_n20.csv")).unwrap();
    assert!(csv.starts_with("time,n,replicas,mse\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn threshold_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.json",
        &SMALL.replace("\"slope_max\": 10.0", "\"slope_max\": -10.0"),
    );
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(4));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn runtime_failure_exits_3() {
    // An explicit step far beyond the stability limit overflows.
    let text = r#"{"kind": "eks", "seed": 1, "n_list": [50], "time": {"t_end": 100000, "dt": 1000},
                   "model": {"forward": [[30.0, 0.0], [0.0, 30.0]], "compare_modes": false}}"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "unstable.json", text);
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}
