//! End-to-end tests of the released binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qldpc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qldpc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../qldpc/fixtures")
        .join(name)
}

#[test]
fn code_reports_builtin_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(&["code", "--builtin", "bb144"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("n = 144, k = 12"), "{text}");
    assert!(text.contains("css check (hx * hz^T = 0): ok"), "{text}");

    let out = qldpc(&["code", "--builtin", "cbb126"], dir.path());
    assert!(stdout(&out).contains("n = 126, k = 12"));
}

#[test]
fn code_accepts_fixture_spec_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fixture("cbb154.spec");
    let out = qldpc(&["code", "--spec", spec.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("n = 154, k = 6"));
}

#[test]
fn code_rejects_empty_spec_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.spec");
    std::fs::write(&path, "# nothing here\n\n").unwrap();
    let out = qldpc(&["code", "--spec", path.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn code_exports_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("mats");
    let out = qldpc(
        &[
            "code",
            "--builtin",
            "bb72",
            "--export",
            export.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    for name in ["hx", "hz", "lx", "lz"] {
        let text = std::fs::read_to_string(export.join(format!("{name}.txt"))).unwrap();
        assert!(text
            .lines()
            .all(|l| l.chars().all(|c| c == '0' || c == '1')));
        assert_eq!(text.lines().next().unwrap().len(), 72);
    }
}

#[test]
fn decode_weight_one_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(
        &[
            "decode",
            "--builtin",
            "bb72",
            "--sector",
            "z",
            "--error",
            "5",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("converged: true"), "{text}");
    assert!(text.contains("syndrome check: satisfied"), "{text}");
    assert!(
        text.contains("logical failure vs injected error: false"),
        "{text}"
    );
}

#[test]
fn decode_dem_zero_syndrome() {
    let dir = tempfile::tempdir().unwrap();
    let dem = dir.path().join("toy.dem");
    std::fs::write(
        &dem,
        "error(0.1) D0 D1 L0\nerror(0.2) D1 D2\nerror(0.05) D2\n",
    )
    .unwrap();
    let out = qldpc(
        &[
            "decode",
            "--dem",
            dem.to_str().unwrap(),
            "--syndrome",
            "zeros",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("estimate weight = 0"), "{text}");
    assert!(text.contains("syndrome check: satisfied"));
}

#[test]
fn decode_reports_speculative_method_tag() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(
        &[
            "decode",
            "--builtin",
            "cbb154",
            "--decoder",
            "spec",
            "--phi",
            "8",
            "--wmax",
            "1",
            "--error",
            "3,40,77,101",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.contains("method = initial_bp")
            || text.contains("method = test_vector(")
            || text.contains("method = failure"),
        "{text}"
    );
}

#[test]
fn decode_failure_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    // A single mechanism cannot explain the syndrome (1, 0): D0 fires alone,
    // so BP cannot converge. Decoding failure is data, not a process error.
    let dem = dir.path().join("under.dem");
    std::fs::write(&dem, "error(0.4) D0 D1\n").unwrap();
    let syn = dir.path().join("syn.txt");
    std::fs::write(&syn, "10").unwrap();
    let out = qldpc(
        &[
            "decode",
            "--dem",
            dem.to_str().unwrap(),
            "--decoder",
            "bp",
            "--syndrome",
            syn.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "exit code must be 0 for completed runs"
    );
    assert!(stdout(&out).contains("converged: false"));
}

#[test]
fn simulate_csv_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "simulate",
        "--builtin",
        "bb72",
        "--noise",
        "capacity:0.03",
        "--decoder",
        "spec",
        "--phi",
        "8",
        "--wmax",
        "1",
        "--stop",
        "shots:1500",
        "--seed",
        "7",
    ];
    let mut csvs = Vec::new();
    for (threads, out_name) in [("1", "a"), ("4", "b")] {
        let mut args: Vec<&str> = common.to_vec();
        args.extend_from_slice(&["--threads", threads, "--out", out_name]);
        let out = qldpc(&args, dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
        csvs.push(std::fs::read(dir.path().join(format!("{out_name}.csv"))).unwrap());
    }
    assert_eq!(csvs[0], csvs[1], "CSV output must not depend on --threads");
}

#[test]
fn simulate_replay_reproduces_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(
        &[
            "simulate",
            "--builtin",
            "bb72",
            "--noise",
            "capacity:0.04",
            "--decoder",
            "bp",
            "--stop",
            "errors:20",
            "--seed",
            "11",
            "--out",
            "orig",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let out = qldpc(
        &[
            "simulate",
            "--replay",
            "orig.manifest.json",
            "--out",
            "replayed",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let a = std::fs::read(dir.path().join("orig.csv")).unwrap();
    let b = std::fs::read(dir.path().join("replayed.csv")).unwrap();
    assert_eq!(a, b, "replay must reproduce the CSV byte for byte");
}

#[test]
fn simulate_dem_with_rounds_populates_per_round_rate() {
    let dir = tempfile::tempdir().unwrap();
    let dem = dir.path().join("toy.dem");
    std::fs::write(
        &dem,
        "error(0.05) D0 L0\nerror(0.08) D0 D1\nerror(0.04) D1 D2 L0\nerror(0.05) D2\n",
    )
    .unwrap();
    let out = qldpc(
        &[
            "simulate",
            "--dem",
            dem.to_str().unwrap(),
            "--rounds",
            "3",
            "--stop",
            "shots:500",
            "--seed",
            "3",
            "--out",
            "demrun",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("demrun.csv")).unwrap();
    let row = csv.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields.len(), 6);
    assert!(!fields[4].is_empty(), "ler_per_round column empty: {row}");
    let json = std::fs::read_to_string(dir.path().join("demrun.json")).unwrap();
    assert!(json.contains("\"ler_per_round\""));
}

#[test]
fn simulate_rejects_exhaustive_sampling_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(
        &[
            "simulate",
            "--builtin",
            "bb72",
            "--noise",
            "capacity:0.03",
            "--decoder",
            "spec",
            "--exhaustive",
            "--ns",
            "5",
            "--stop",
            "shots:10",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("--exhaustive conflicts"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn simulate_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = qldpc(
        &[
            "simulate",
            "--builtin",
            "bb72",
            "--noise",
            "capacity:0.03",
            "--stop",
            "shots:10",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("--seed is required"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "decoder = spec\nphi = 4\nwmax = 1\nseed = 9\nstop = shots:300\n",
    )
    .unwrap();
    // Config alone.
    let out = qldpc(
        &[
            "simulate",
            "--builtin",
            "bb72",
            "--noise",
            "capacity:0.03",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "c1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = std::fs::read_to_string(dir.path().join("c1.manifest.json")).unwrap();
    assert!(manifest.contains("\"phi_size\": 4"), "{manifest}");
    assert!(manifest.contains("\"seed\": 9"));
    // CLI flag overrides the config value.
    let out = qldpc(
        &[
            "simulate",
            "--builtin",
            "bb72",
            "--noise",
            "capacity:0.03",
            "--config",
            cfg.to_str().unwrap(),
            "--phi",
            "6",
            "--out",
            "c2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = std::fs::read_to_string(dir.path().join("c2.manifest.json")).unwrap();
    assert!(manifest.contains("\"phi_size\": 6"), "{manifest}");
}
