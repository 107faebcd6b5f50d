use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use twophoton::bifr::{Header, HEADER_LEN};
use twophoton::export::read_pattern_csv;
use twophoton_core::visibility::{fit_fringe_visibility, FitOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twophoton"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small sensor so frame files stay a few hundred kilobytes.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.cfg");
    let text = format!(
        "# small sensor\nwidth = 128\nheight = 16\nstrip_start = 2\nstrip_end = 13\n\
         mean_pairs = 3\npsi = 0.6\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn pattern_writes_files_whose_fits_can_be_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["pattern", "--out", arg(dir.path()), "--d", "0.3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("d = 0.3 m"), "{stdout}");
    for name in [
        "intensity.csv",
        "coincidence.csv",
        "excess.csv",
        "excess.pgm",
        "visibility.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let pgm = fs::read(dir.path().join("coincidence.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));

    // refit the exported intensity and compare with the reported fit
    let intensity = read_pattern_csv(&dir.path().join("intensity.csv")).unwrap();
    let period = 812e-9 * 50e-3 / 0.7e-3;
    let fit = fit_fringe_visibility(&intensity, period, &FitOptions::default()).unwrap();
    let line = stdout.lines().find(|l| l.starts_with("fitted")).unwrap();
    let reported: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!((fit.signed_visibility() - reported).abs() < 1e-6, "{line}");
}

#[test]
fn simulate_is_deterministic_and_analyze_reads_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--config",
            arg(&cfg),
            "--out",
            arg(&out_dir),
            "--frames",
            "200",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push(out_dir.join("frames.bifr"));
    }
    let (a, b) = (fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap());
    assert_eq!(a.len() as u64, HEADER_LEN + 200 * 128 * 16 * 2);
    assert!(a == b, "same seed must give identical files");

    let other = dir.path().join("c");
    let out = run(&[
        "simulate",
        "--config",
        arg(&cfg),
        "--out",
        arg(&other),
        "--frames",
        "200",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    assert!(fs::read(other.join("frames.bifr")).unwrap() != a);

    let report = dir.path().join("report");
    let out = run(&["analyze", arg(&files[0]), "--out", arg(&report)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("frames 200:"), "{stdout}");
    assert!(report.join("counters.csv").is_file());
}

#[test]
fn header_only_file_fails_with_empty_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.bifr");
    let header = Header {
        width: 128,
        height: 16,
        frames: 0,
    };
    fs::write(&path, header.to_bytes()).unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(&[
        "analyze",
        arg(&path),
        "--config",
        arg(&cfg),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("no accepted pairs"), "{stderr}");

    // a sensor shape that disagrees with the configuration is a setup error
    let other = dir.path().join("other.bifr");
    fs::write(
        &other,
        Header {
            width: 64,
            height: 8,
            frames: 0,
        }
        .to_bytes(),
    )
    .unwrap();
    let out = run(&[
        "analyze",
        arg(&other),
        "--config",
        arg(&cfg),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn truncated_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.bifr");
    let header = Header {
        width: 128,
        height: 16,
        frames: 4,
    };
    let mut bytes = header.to_bytes().to_vec();
    bytes.extend(vec![0u8; 128 * 16 * 2 + 10]);
    fs::write(&path, bytes).unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(&[
        "analyze",
        arg(&path),
        "--config",
        arg(&cfg),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_accepts_repeated_distances() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--out",
        arg(dir.path()),
        "--d",
        "0.063",
        "--d",
        "0.87",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut r = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    let v12: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(v12[0] > v12[1]);
    assert!(dir.path().join("circle.csv").is_file());
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "no_such_key = 1\n",
        "distance = -1\n",
        "psi = 1.5\n",
        "efficiency = abc\n",
        "strip_end = 900\n",
    ];
    for text in cases {
        let cfg = dir.path().join("bad.cfg");
        fs::write(&cfg, text).unwrap();
        let out = run(&["pattern", "--config", arg(&cfg), "--out", arg(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    let out = run(&[
        "pattern",
        "--d",
        "0.3",
        "--d",
        "0.5",
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_frame_file_is_reported() {
    let out = run(&["analyze", "/nonexistent/frames.bifr"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}
