use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn subnyq(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_subnyq"));
    cmd.args(args).env_remove("SUBNYQ_SEED");
    if let Some(s) = seed {
        cmd.env("SUBNYQ_SEED", s);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, extra_pulse: &str) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!(
            r#"
[run]
sample_rate = "2G"
duration = "300u"
master_seed = 2

[soi]
kind = "qam16_real"
rate = "200M"
rms = 1

[interference]
kind = "gaussian"
rate = "200M"
rms = 1

[mixing]
a11 = 1
a12 = 0.5
a21 = 0.3
a22 = 1

[pulse]
{extra_pulse}
"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in [
        "qam16_gaussian.toml",
        "nrz_eye.toml",
        "gaussian_pair.toml",
        "rank_one.toml",
    ] {
        let p = scenario_path(name);
        let o = subnyq(&["validate", "--config", p.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}

#[test]
fn invalid_config_exits_one_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ratio = 0.05\nwidth = \"-1n\"");
    let o = subnyq(&["validate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("pulse"), "{}", stderr(&o));

    let o = subnyq(
        &[
            "run",
            "--config",
            "/nonexistent.toml",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(subnyq(&["run"], None).status.code(), Some(1));
    assert_eq!(subnyq(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(subnyq(&["--help"], None).status.code(), Some(0));
    let p = scenario_path("qam16_gaussian.toml");
    let o = subnyq(
        &[
            "sweep",
            "--config",
            p.to_str().unwrap(),
            "--ratios",
            "0.01,2",
            "--out",
            "/tmp",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_outputs_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ratio = 0.05");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = subnyq(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["moment2.csv", "moment4.csv", "eye.csv", "report.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let o = subnyq(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ],
        Some("12345"),
    );
    assert_eq!(o.status.code(), Some(0));
    let ra: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let rb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(ra["config"]["master_seed"], 2);
    assert_eq!(rb["config"]["master_seed"], 12345);
    assert_ne!(ra["moment2"], rb["moment2"]);

    let o = subnyq(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
        ],
        Some("seven"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SUBNYQ_SEED"));
}

#[test]
fn sweep_is_reproducible_and_accepts_unit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "ratio = 0.05");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = subnyq(
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--ratios",
                "1,0.1,1e-2",
                "--trials",
                "1",
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["sweep.csv", "trials.csv", "sweep.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let table = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("1.0000000000000000e0,"));
}
