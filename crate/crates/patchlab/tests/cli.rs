//! Command-line behaviour: exit codes, reproducibility, report contents.

use std::path::PathBuf;
use std::process::Command;

fn out_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("patchlab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], out: &PathBuf) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_patchlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned())
}

#[test]
fn kirchhoff_ellipse_verifies() {
    let (code, stdout) = run(&["verify", "--patch", "@kirchhoff"], &out_dir("verify"));
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("pass             true"), "{stdout}");
}

#[test]
fn square_is_not_stationary() {
    let (code, _) = run(&["verify", "--patch", "@square"], &out_dir("verify-square"));
    assert_eq!(code, 2);
}

#[test]
fn thresholds_of_the_euler_case() {
    let out = out_dir("thresholds");
    let (code, _) = run(&["thresholds", "--alpha", "0", "--m-max", "5", "--format", "csv"], &out);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(out.join("thresholds.csv")).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.split(',').nth(1).unwrap().is_empty())
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let expected = [0.25, 1.0 / 3.0, 0.375, 0.4];
    assert_eq!(values.len(), 4);
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e).abs() < 1e-12, "{v} vs {e}");
    }
}

#[test]
fn errors_exit_with_one() {
    let out = out_dir("errors");
    assert_eq!(run(&["verify", "--patch", "/nonexistent/patch.json"], &out).0, 1);
    assert_eq!(run(&["fastrot", "--alpha", "1.5"], &out).0, 1);
    assert_eq!(run(&["nonsense"], &out).0, 1);
    let bad = out.join("bad.json");
    std::fs::write(&bad, r#"{"type": "ellipse", "center": [0, 0], "a": 2}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_patchlab"))
        .args(["verify", "--patch", bad.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`b`"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cases: [&[&str]; 4] = [
        &["steiner", "--alpha", "0.5", "--grid", "64", "--seed", "9", "--format", "csv"],
        &["fastrot", "--alpha", "0.5", "--omega", "0.3", "--seed", "4", "--grid", "96", "--format", "csv"],
        &["verify", "--patch", "@kirchhoff", "--format", "csv"],
        &["thresholds", "--alpha", "0.25", "--format", "txt"],
    ];
    for args in cases {
        let (a, b) = (out_dir(&format!("det-a-{}", args[0])), out_dir(&format!("det-b-{}", args[0])));
        let (ca, sa) = run(args, &a);
        let (cb, sb) = run(args, &b);
        assert_eq!(ca, cb);
        let file = |d: &PathBuf| {
            let ext = if args.contains(&"csv") { "csv" } else { "txt" };
            std::fs::read(d.join(format!("{}.{ext}", args[0]))).unwrap()
        };
        assert_eq!(file(&a), file(&b), "{args:?}");
        assert_eq!(sa.lines().filter(|l| !l.contains(" -> ")).collect::<Vec<_>>(), sb.lines().filter(|l| !l.contains(" -> ")).collect::<Vec<_>>());
    }
}

#[test]
fn csv_rows_carry_their_resolution() {
    let cases: [(&[&str], &str); 3] = [
        (&["steiner", "--grid", "48", "--format", "csv"], "h"),
        (&["fastrot", "--alpha", "0.3", "--grid", "64", "--format", "csv"], "grid"),
        (&["verify", "--patch", "@kirchhoff", "--format", "csv"], "boundary_nodes"),
    ];
    for (args, col) in cases {
        let out = out_dir(&format!("res-{}", args[0]));
        let (code, _) = run(args, &out);
        assert_eq!(code, 0, "{args:?}");
        let csv = std::fs::read_to_string(out.join(format!("{}.csv", args[0]))).unwrap();
        let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
        let k = header.iter().position(|h| *h == col).unwrap_or_else(|| panic!("{col} missing in {header:?}"));
        for line in csv.lines().skip(1) {
            assert!(!line.split(',').nth(k).unwrap().is_empty(), "{line}");
        }
    }
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let out = out_dir("env");
    let o = Command::new(env!("CARGO_BIN_EXE_patchlab"))
        .args(["thresholds", "--m-max", "3"])
        .env("PATCHLAB_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("thresholds.txt").exists());
}
