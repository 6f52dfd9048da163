//! End-to-end tests of the `gdp` binary, driven through real processes so
//! exit codes and on-disk artifacts are covered.

use std::path::Path;
use std::process::{Command, Output};

fn gdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdp"))
        .args(args)
        .output()
        .expect("spawn gdp")
}

fn ok(args: &[&str]) -> String {
    let out = gdp(args);
    assert!(
        out.status.success(),
        "gdp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = gdp(args);
    assert_eq!(out.status.code(), Some(1), "gdp {args:?} should exit 1");
    String::from_utf8(out.stderr).unwrap()
}

fn path(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn gen_dataset(dir: &Path, households: &str, days: &str) {
    ok(&[
        "gen",
        "--households",
        households,
        "--days",
        days,
        "--seed",
        "7",
        "--out",
        &path(dir),
    ]);
}

#[test]
fn gen_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_dataset(&a, "2", "1");
    gen_dataset(&b, "2", "1");
    for name in ["household_000.csv", "household_001.csv"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert!(!fa.is_empty());
        assert_eq!(fa, fb);
    }
    assert_ne!(
        std::fs::read(a.join("household_000.csv")).unwrap(),
        std::fs::read(a.join("household_001.csv")).unwrap()
    );
}

#[test]
fn compress_decompress_roundtrip_across_processes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_dataset(&data, "1", "2");
    let input = data.join("household_000.csv");
    let container = tmp.path().join("stream.gdpc");
    let meter_state = tmp.path().join("meter.gdps");
    let headend_state = tmp.path().join("headend.gdps");
    let restored = tmp.path().join("restored.csv");

    ok(&[
        "compress",
        "--input",
        &path(&input),
        "--state",
        &path(&meter_state),
        "--out",
        &path(&container),
        "--pattern",
        "#4",
        "--apdu-size",
        "4",
    ]);
    ok(&[
        "decompress",
        "--container",
        &path(&container),
        "--state",
        &path(&headend_state),
        "--out",
        &path(&restored),
    ]);
    assert_eq!(
        std::fs::read(&input).unwrap(),
        std::fs::read(&restored).unwrap(),
        "roundtripped CSV differs"
    );
    // both ends converged on the same state
    assert_eq!(
        std::fs::read(&meter_state).unwrap(),
        std::fs::read(&headend_state).unwrap()
    );

    // appending a second batch against the existing state keeps working
    let input2 = data.join("household_000.csv");
    ok(&[
        "compress",
        "--input",
        &path(&input2),
        "--state",
        &path(&meter_state),
        "--out",
        &path(&container),
        "--apdu-size",
        "96",
    ]);
    ok(&[
        "decompress",
        "--container",
        &path(&container),
        "--state",
        &path(&tmp.path().join("headend2.gdps")),
        "--out",
        &path(&restored),
    ]);
}

#[test]
fn state_inspect_reports_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_dataset(&data, "1", "1");
    let state = tmp.path().join("s.gdps");
    ok(&[
        "compress",
        "--input",
        &path(&data.join("household_000.csv")),
        "--state",
        &path(&state),
        "--out",
        &path(&tmp.path().join("c.gdpc")),
        "--pattern",
        "#4",
    ]);
    let report = ok(&["state", "inspect", "--state", &path(&state)]);
    assert!(report.contains("pattern: [L52 L72 L16,2 L91 L41]"), "got: {report}");
    assert!(report.contains("4-byte bases:"));
    assert!(report.contains("state size:"));
}

#[test]
fn pattern_mismatch_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_dataset(&data, "1", "1");
    let input = path(data.join("household_000.csv").as_path());
    let state = path(tmp.path().join("s.gdps").as_path());
    let container = path(tmp.path().join("c.gdpc").as_path());
    ok(&["compress", "--input", &input, "--state", &state, "--out", &container, "--pattern", "#4"]);
    let err = fails(&["compress", "--input", &input, "--state", &state, "--out", &container, "--pattern", "#1"]);
    assert!(err.contains("pattern mismatch"), "got: {err}");
    // missing pattern on a fresh state is also an error
    let err = fails(&["compress", "--input", &input, "--state", &path(&tmp.path().join("new.gdps")), "--out", &path(&tmp.path().join("new.gdpc"))]);
    assert!(err.contains("--pattern is required"), "got: {err}");
}

#[test]
fn bench_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_dataset(&data, "3", "2");
    let out = tmp.path().join("report");
    let stdout = ok(&[
        "bench",
        "--dataset",
        &path(&data),
        "--pattern",
        "#4",
        "--sizes",
        "1,96",
        "--out",
        &path(&out),
    ]);
    assert!(stdout.contains("gdp"));
    let gains = std::fs::read_to_string(out.join("gains.csv")).unwrap();
    assert!(gains.starts_with("compressor,size,mean_gain,std"));
    assert_eq!(gains.lines().count(), 1 + 4 * 2, "4 compressors x 2 sizes");
    assert!(out.join("totals.csv").exists());
    let growth = std::fs::read_to_string(out.join("state_growth.csv")).unwrap();
    assert_eq!(growth.lines().count(), 1 + 2, "2 sampled days");
}

#[test]
fn baseline_subcommand_compresses() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_dataset(&data, "1", "1");
    let input = path(data.join("household_000.csv").as_path());
    let out = tmp.path().join("d.bin");
    let stdout = ok(&["baseline", "--kind", "delta", "--input", &input, "--out", &path(&out)]);
    assert!(stdout.starts_with("delta: 96 readings"));
    let compressed = std::fs::metadata(&out).unwrap().len();
    assert!(compressed < 96 * 49, "delta output {compressed} not smaller than raw");
    let err = fails(&["baseline", "--kind", "bogus", "--input", &input, "--out", &path(&out)]);
    assert!(err.contains("unknown baseline"));
}
