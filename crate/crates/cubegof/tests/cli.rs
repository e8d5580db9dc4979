// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use cubegof::cli::{DiscoverRecord, LimitRecord};
use cubegof::io::{read_records, OutputFormat};

fn cubegof(tables: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cubegof")).arg("--tables").arg(tables).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn discover_on_a_small_cube() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..12).map(|i| format!("{},{}\n", (i as f64 + 0.5) / 12.0, ((i * 5) % 12) as f64 / 12.0 + 0.01)).collect();
    let input = write(dir.path(), "cube.csv", &format!("x,y\n{rows}"));
    let out = cubegof(dir.path(), &["discover", "--method", "prod-p", "--test", "ks", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs: Vec<DiscoverRecord> = read_records(&out.stdout[..], OutputFormat::Csv).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert_eq!((r.n, r.m), (2, 12));
    assert!(r.p_final > 0.0 && r.p_final <= 1.0);
    assert_eq!(r.axes.split(';').count(), 2);
}

#[test]
#[allow(clippy::approx_constant)]
fn empty_input_gives_the_counting_limit() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "empty.csv", "x,y,z\n");
    let out = cubegof(dir.path(), &["--format", "json", "limit", "--method", "pcs-sum", "--cl", "0.9", "--input", &input]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs: Vec<LimitRecord> = read_records(&out.stdout[..], OutputFormat::Json).unwrap();
    assert_eq!((recs[0].n, recs[0].m), (3, 0));
    assert!((recs[0].mu_lim - 2.3026).abs() < 1e-3);
}

#[test]
fn usage_errors_exit_1_and_run_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cubegof(dir.path(), &["limit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = write(dir.path(), "bad.csv", "x,y\n0.1,0.2\n0.3,oops\n");
    let out = cubegof(dir.path(), &["discover", "--method", "volume", "--test", "ks", "--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let outside = write(dir.path(), "outside.csv", "0.1,1.5\n");
    let out = cubegof(dir.path(), &["discover", "--method", "volume", "--test", "ks", "--input", &outside]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    let out = cubegof(dir.path(), &["limit", "--method", "poisson", "--input", &missing.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transform_then_limit() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "raw.csv", "e\n0.5\n2.0\n7.5\n");
    let out = cubegof(dir.path(), &["transform", "--input", &input, "--model", "exponential(0.5)"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let cube = write(dir.path(), "cube.csv", &text);
    let first: f64 = text.lines().nth(1).unwrap().trim().parse().unwrap();
    assert!((first - (1.0 - (-0.25f64).exp())).abs() < 1e-12);

    let out = cubegof(dir.path(), &["limit", "--method", "single-pcs", "--input", &cube]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs: Vec<LimitRecord> = read_records(&out.stdout[..], OutputFormat::Csv).unwrap();
    assert!(recs[0].mu_lim > 2.3 && recs[0].mu_lim < 20.0);
}

#[test]
fn tabulate_reports_and_reuses_tables() {
    let dir = tempfile::tempdir().unwrap();
    let first = cubegof(dir.path(), &["tabulate", "--test", "maxgap", "--m", "3,4"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let path = dir.path().join("fixed/maxgap/m00003-t100000-s1.cgof");
    let before = std::fs::metadata(&path).unwrap().modified().unwrap();
    let again = cubegof(dir.path(), &["tabulate", "--test", "maxgap", "--m", "3,4"]);
    assert!(again.status.success());
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(std::fs::metadata(&path).unwrap().modified().unwrap(), before);
    assert!(dir.path().join("manifest.tsv").exists());
}
