use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CIRCLE: &str = r#"
seed = 7
sigma = 0.5
eps = 0.05
samples = 2000

[manifold]
kind = "circle"
radius = 1.0
ambient_dim = 2

[net]
sphere_net_cap = 16
n0_cap = 120
"#;

fn mfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfit")).args(args).output().expect("spawn mfit")
}

fn mfit_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfit")).args(args).env(key, val).output().expect("spawn mfit")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&b)])), 0);
    for f in ["clean.mfpc", "noisy.mfpc", "dataset.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_samples_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &CIRCLE.replace("samples = 2000", "samples = 0"));
    let out = mfit(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("samples"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("bogus = 1\n{CIRCLE}"));
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))])), 2);
}

#[test]
fn missing_arguments_exit_2() {
    assert_eq!(code(&mfit(&["fit", "--config", "x.toml"])), 2);
    assert_eq!(code(&mfit(&["frobnicate"])), 2);
}

#[test]
fn corrupted_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let data = dir.path().join("data");
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let mut bytes = fs::read(data.join("noisy.mfpc")).unwrap();
    bytes[0] = b'X';
    fs::write(data.join("noisy.mfpc"), &bytes).unwrap();
    let out = mfit(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&dir.path().join("fit"))]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    let report = dir.path().join("r.json");
    let out = mfit(&["evaluate", "--truth", s(&cfg), "--artifact", s(&data.join("noisy.mfpc")), "--report", s(&report)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let out = mfit_env(
        &["fit", "--config", s(&cfg), "--data", s(dir.path()), "--out", s(&dir.path().join("o"))],
        "MF_THREADS",
        "zero",
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn sampled_mode_reports_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = CIRCLE.replace("samples = 2000", "samples = 2000\nmode = \"sampled\"\nper_call = 100");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let data = dir.path().join("data");
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let out = mfit(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&dir.path().join("fit"))]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[support-oracle]"), "{err}");
}

#[test]
fn evaluating_clean_samples_gives_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let data = dir.path().join("data");
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let report = dir.path().join("r.json");
    let out = mfit(&["evaluate", "--truth", s(&cfg), "--artifact", s(&data.join("clean.mfpc")), "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let key = "\"artifact_to_truth\": ";
    let at = text.find(key).unwrap() + key.len();
    let val: f64 = text[at..].split(|c| c == ',' || c == '\n').next().unwrap().trim().parse().unwrap();
    assert!(val < 1e-9, "{val}");
}

#[test]
fn fit_then_evaluate_circle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let data = dir.path().join("data");
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let (f1, f2) = (dir.path().join("f1"), dir.path().join("f2"));
    let out = mfit_env(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&f1)], "MF_THREADS", "1");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = mfit_env(&["fit", "--config", s(&cfg), "--data", s(&data), "--out", s(&f2)], "MF_THREADS", "2");
    assert_eq!(code(&out), 0);
    for f in ["net.mfpc", "manifold.json", "fit_log.json"] {
        assert_eq!(fs::read(f1.join(f)).unwrap(), fs::read(f2.join(f)).unwrap(), "{f}");
    }
    let log = fs::read_to_string(f1.join("fit_log.json")).unwrap();
    assert!(log.contains("\"sphere_net_cap\": 16"));
    assert!(log.contains("log10_theoretical_samples"));

    let report = dir.path().join("reports/manifold.json");
    let out = mfit(&["evaluate", "--truth", s(&cfg), "--artifact", s(&f1.join("manifold.json")), "--report", s(&report)]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.contains("spectral_vs_contour"));
    assert!(!stdout.contains("FAIL"));

    let out = mfit(&["evaluate", "--truth", s(&cfg), "--artifact", s(&f1.join("net.mfpc")), "--report", s(&report)]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&report).unwrap().contains("acceptance_rate"));
}

#[test]
fn evaluate_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CIRCLE);
    let cfg3 = write_config(dir.path(), "c3.toml", &CIRCLE.replace("ambient_dim = 2", "ambient_dim = 3"));
    let data = dir.path().join("data");
    assert_eq!(code(&mfit(&["generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let out = mfit(&["evaluate", "--truth", s(&cfg3), "--artifact", s(&data.join("clean.mfpc")), "--report", s(&dir.path().join("r"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}
