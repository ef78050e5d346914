//! End-to-end runs of the `ymbar` binary and the snapshot format.

use std::fs;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ymbar::cli::snapshot::{read_snapshot, write_snapshot};
use ymbar::cli::{Command as Sub, RunManifest};
use ymbar::functional::ymbar;
use ymbar::{Background, Connection, FormPQ, TorusGeometry};

fn ymbar_bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ymbar")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("run.manifest");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .trim()
}

#[test]
fn manifest_parses_and_round_trips() {
    let m = RunManifest::parse(
        "# small run\nrun.command = flow\ngeometry.n = 1\ngeometry.grid = 16\ngeometry.period = 2pi\n\
         geometry.dealias = off\nbundle.rank = 2\nflow.max_steps = 7\n",
    )
    .unwrap();
    assert_eq!(m.command, Some(Sub::Flow));
    assert_eq!((m.n, m.grid, m.dealias, m.flow.max_steps), (1, 16, false, 7));
    assert!((m.period - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    let again = RunManifest::parse(&m.to_text()).unwrap();
    assert_eq!(again.to_text(), m.to_text());

    for bad in ["geometry.n = 3", "geometry.grid = 7", "bundle.rank = 2\nbundle.background = on", "flow.safety = 0"] {
        let m = RunManifest::parse(bad).and_then(|m| m.validate().map(|_| m));
        assert!(matches!(m, Err(ymbar::Error::Config(_))), "{bad} accepted");
    }
    assert!(RunManifest::parse("geometry.colour = red").is_err());
    assert!(RunManifest::parse("geometry.n = 1\ngeometry.n = 2").is_err());
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let g = TorusGeometry::new(2, 8, 2.0 * std::f64::consts::PI, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a01 = FormPQ::random(&g, 1, (0, 1), 2, 0.2, &mut rng).unwrap();
    let a = Connection::new(a01, Some(Background::holomorphic_pair())).unwrap();
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &a, 99).unwrap();
    let back = read_snapshot(&mut bytes.as_slice(), true).unwrap();
    assert_eq!(back.seed, 99);
    assert_eq!(ymbar(&back.connection).to_bits(), ymbar(&a).to_bits());
    assert_eq!(back.connection.background().map(|b| b.coeffs()), a.background().map(|b| b.coeffs()));

    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    assert!(matches!(read_snapshot(&mut corrupt.as_slice(), true), Err(ymbar::Error::Format(_))));
    let short = &bytes[..bytes.len() - 3];
    assert!(matches!(read_snapshot(&mut &short[..], true), Err(ymbar::Error::Format(_))));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let wrong = write_manifest(dir.path(), "run.command = flow\n");
    assert_eq!(ymbar_bin(&["verify", "--manifest", &wrong, "--out", out]).0, 2);

    let missing = dir.path().join("nope.manifest");
    assert_eq!(ymbar_bin(&["verify", "--manifest", missing.to_str().unwrap()]).0, 3);

    let bad_snap = dir.path().join("bad.ymb");
    fs::write(&bad_snap, b"not a snapshot").unwrap();
    let m = write_manifest(dir.path(), &format!("input.snapshot = {}\n", bad_snap.display()));
    let (code, _, err) = ymbar_bin(&["inspect", "--manifest", &m, "--out", out]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn verify_on_a_curve_skips_two_form_checks() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "geometry.n = 1\ngeometry.grid = 8\n");
    let out = dir.path().join("out");
    let (code, stdout, err) = ymbar_bin(&["verify", "--manifest", &m, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}{err}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(value(&report, "summary.status"), "pass");
    assert!(value(&report, "summary.skip").parse::<usize>().unwrap() > 0);
    assert_eq!(value(&report, "summary.fail"), "0");
}

#[test]
fn verify_without_dealiasing_flags_product_checks() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "geometry.n = 1\ngeometry.dealias = off\n");
    let out = dir.path().join("out");
    let (code, _, _) = ymbar_bin(&["verify", "--manifest", &m, "--out", out.to_str().unwrap()]);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(code, 1);
    assert!(value(&report, "summary.flagged").parse::<usize>().unwrap() > 0);
}

#[test]
fn flow_is_deterministic_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "geometry.n = 2\nbundle.rank = 2\nflow.max_steps = 3\nflow.snapshot_every = 2\n");
    let mut csv = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let (code, stdout, err) = ymbar_bin(&["flow", "--manifest", &m, "--out", out.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(code, 0, "{stdout}{err}");
        assert_eq!(value(&stdout, "flow.monotone"), "true");
        assert!(out.join("final.ymb").exists());
        assert!(out.join("snapshot_000002.ymb").exists());
        csv.push(fs::read_to_string(out.join("trace.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
    assert!(csv[0].starts_with("step,t,dt,energy,grad_norm,f02_norm,f11_norm,accepted\n"));
    assert_eq!(csv[0].lines().count(), 1 + 4);

    // the final snapshot reloads to the last traced energy
    let out = dir.path().join("a");
    let m2 = write_manifest(dir.path(), &format!("input.snapshot = {}\n", out.join("final.ymb").display()));
    let (code, stdout, _) = ymbar_bin(&["inspect", "--manifest", &m2, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let last: f64 = csv[0].lines().last().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    let reloaded: f64 = value(&stdout, "state.energy").parse().unwrap();
    assert!((reloaded - last).abs() <= 1e-12 * last, "{reloaded} vs {last}");
    assert_eq!(value(&stdout, "state.seed"), "5");
}
