use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bacs");

fn bacs(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    text.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .unwrap_or_else(|| panic!("{key} missing from `{text}`"))
        .parse()
        .unwrap()
}

fn small_clip(dir: &Path) {
    let out = bacs(&[
        "synth",
        "-o",
        dir.to_str().unwrap(),
        "--width",
        "64",
        "--height",
        "64",
        "--frame-count",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn encode_decode_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("clip");
    small_clip(&clip);
    assert_eq!(fs::read_dir(&clip).unwrap().count(), 8);

    let stream = tmp.path().join("s.bacs");
    let trace = tmp.path().join("trace.csv");
    let out = bacs(&[
        "encode",
        "-i",
        clip.to_str().unwrap(),
        "-o",
        stream.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--target-sr",
        "0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(field(&stdout(&out), "average_sr") <= 0.1);
    let csv = fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().next(), Some("frame,m,storage,threshold,sr,psnr,ssim"));
    assert_eq!(csv.lines().count(), 9);

    let decoded = tmp.path().join("out");
    let out = bacs(&[
        "decode",
        "-i",
        stream.to_str().unwrap(),
        "-o",
        decoded.to_str().unwrap(),
        "--iterations",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&decoded).unwrap().count(), 8);
    let first = fs::read(decoded.join("frame_00000.pgm")).unwrap();
    assert!(first.starts_with(b"P5\n64 64\n255\n"));
}

#[test]
fn encoding_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let clip = tmp.path().join("clip");
    small_clip(&clip);
    let streams: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let p = tmp.path().join(format!("{i}.bacs"));
            let out = bacs(&["encode", "-i", clip.to_str().unwrap(), "-o", p.to_str().unwrap(), "--target-sr", "0.1"]);
            assert!(out.status.success());
            fs::read(p).unwrap()
        })
        .collect();
    assert_eq!(streams[0], streams[1]);
}

#[test]
fn run_reports_quality() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("run.csv");
    let out = bacs(&[
        "run",
        "--synthetic",
        "--width",
        "64",
        "--height",
        "64",
        "--frame-count",
        "6",
        "--target-sr",
        "0.1",
        "--iterations",
        "20",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(field(&text, "average_sr") <= 0.1);
    assert!(field(&text, "mean_psnr") > 20.0);
    let csv = fs::read_to_string(&trace).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').count(), 7);
    assert!(!row.ends_with(','), "quality columns filled: {row}");
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("codec.conf");
    fs::write(&cfg, "# rates\ntarget_sr = 0.02\nhigh_sr = 0.25\n").unwrap();
    let base = ["run", "--synthetic", "--width", "64", "--height", "64", "--frame-count", "20", "--iterations", "5"];

    let mut args = base.to_vec();
    args.extend(["--config", cfg.to_str().unwrap()]);
    let from_file = field(&stdout(&bacs(&args)), "average_sr");
    assert!(from_file <= 0.02);

    args.extend(["--target-sr", "0.15"]);
    let overridden = bacs(&args);
    assert!(overridden.status.success());
    assert!(field(&stdout(&overridden), "average_sr") > 0.02);
}

#[test]
fn sweep_rows_sorted_by_target() {
    let out = bacs(&[
        "sweep",
        "--synthetic",
        "--width",
        "64",
        "--height",
        "64",
        "--frame-count",
        "10",
        "--no-quality",
        "--targets",
        "0.3,0.05,0.1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let targets: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(targets, vec![0.05, 0.1, 0.3]);
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (target, achieved): (f64, f64) = (cols[0].parse().unwrap(), cols[2].parse().unwrap());
        assert!(achieved <= target);
    }
}

#[test]
fn without_block_storage_rate_follows_threshold() {
    let run = |extra: &[&str]| {
        let mut args = vec![
            "encode",
            "--synthetic",
            "--width",
            "128",
            "--height",
            "128",
            "--frame-count",
            "20",
            "--target-sr",
            "0.05",
            "-o",
            "/dev/null",
        ];
        args.extend_from_slice(extra);
        let out = bacs(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        field(&stdout(&out), "average_sr")
    };
    let low = run(&["--no-bss", "--no-dt", "--threshold-init", "0.01"]);
    let high = run(&["--no-bss", "--no-dt", "--threshold-init", "0.2"]);
    assert!(low > high, "{low} vs {high}");
    assert!(low > 0.05, "unbudgeted rate {low} should exceed the target");
    for th in ["0.01", "0.2"] {
        assert!(run(&["--threshold-init", th]) <= 0.05);
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // config error
    let out = bacs(&["run", "--synthetic", "--target-sr", "0.5", "--high-sr", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = bacs(&["run", "--synthetic", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    // I/O error
    let out = bacs(&["encode", "-i", "/nonexistent/dir", "-o", "x.bacs"]);
    assert_eq!(out.status.code(), Some(3));

    // stream corruption
    let clip = tmp.path().join("clip");
    small_clip(&clip);
    let stream = tmp.path().join("s.bacs");
    assert!(bacs(&["encode", "-i", clip.to_str().unwrap(), "-o", stream.to_str().unwrap(), "--target-sr", "0.1"])
        .status
        .success());
    let bytes = fs::read(&stream).unwrap();
    fs::write(&stream, &bytes[..bytes.len() - 3]).unwrap();
    let out = bacs(&["decode", "-i", stream.to_str().unwrap(), "-o", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated frame 7"));
}
