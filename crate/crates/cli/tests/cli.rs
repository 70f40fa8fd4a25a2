use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bosewitness"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bosewitness")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(p).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn state_make_writes_sparse_entries() {
    let dir = tempfile::tempdir().unwrap();
    let noon = dir.path().join("noon.json");
    ok(&["state", "make", "noon:N=4,theta=0.7854", "-o", noon.to_str().unwrap()]);
    let v = read_json(&noon);
    assert_eq!(v["entries"].as_array().unwrap().len(), 2);
    assert_eq!(v["kind"], "pure");

    let rp = dir.path().join("rp.json");
    ok(&["state", "make", "relphase:N=100", "-o", rp.to_str().unwrap()]);
    assert_eq!(read_json(&rp)["entries"].as_array().unwrap().len(), 101);
}

#[test]
fn truncated_mixture_records_tail_mass() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mix.json");
    assert!(!run(&["state", "make", "cohmix:alpha2=2,nmax=10", "-o", p.to_str().unwrap()]).status.success());
    ok(&["state", "make", "cohmix:alpha2=2,nmax=10,allow_truncation=true", "-o", p.to_str().unwrap()]);
    let v = read_json(&p);
    assert_eq!(v["kind"], "mixed");
    let tail = v["discarded_mass"].as_f64().unwrap();
    assert!(tail > 1e-3 && tail < 1e-2, "{tail}");
}

#[test]
fn descriptor_errors_report_column() {
    let out = run(&["state", "make", "noon:N=4,x"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column 10"), "{err}");
    let out = run(&["state", "make", "nosuchstate:N=4"]);
    assert!(!out.status.success());
}

#[test]
fn state_files_feed_the_battery() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rp.json");
    ok(&["state", "make", "relphase:N=1000", "-o", p.to_str().unwrap()]);
    let g = golden("relphase1000.json");
    ok(&["witness", "run", "--state", p.to_str().unwrap(), "--expect", g.to_str().unwrap()]);
}

#[test]
fn relative_phase_verdicts_match_golden() {
    let g = golden("relphase1000.json");
    ok(&["witness", "run", "-d", "relphase:N=1000", "--expect", g.to_str().unwrap()]);
}

#[test]
fn noon_high_order_correlation_verdicts_match_golden() {
    let g = golden("noon4_order4.json");
    ok(&["witness", "run", "-d", "noon:N=4", "--correlation-order", "4,4", "--expect", g.to_str().unwrap()]);
}

#[test]
fn separable_states_never_fire() {
    let g = golden("separable.json");
    for seed in 0..10 {
        let d = format!("separable:structure=case2,pairs=2,seed={seed}");
        ok(&["witness", "run", "-d", &d, "--expect", g.to_str().unwrap()]);
    }
}

#[test]
fn golden_mismatch_exits_with_three() {
    let g = golden("relphase1000.json");
    let out = run(&["witness", "run", "-d", "noon:N=4", "--expect", g.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verdict mismatch"));
}

#[test]
fn witness_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (j, c) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    ok(&[
        "witness",
        "run",
        "-d",
        "binomial:N=10,theta=pi/8",
        "--json",
        j.to_str().unwrap(),
        "--csv",
        c.to_str().unwrap(),
    ]);
    let reports = read_json(&j);
    let rows = csv_rows(&c);
    assert_eq!(reports.as_array().unwrap().len(), rows.len());
    let header = csv::Reader::from_path(&c).unwrap().headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["test_id", "paper_eq", "frame", "verdict", "lhs", "rhs", "margin", "tolerance", "params"]
    );
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let runs: Vec<Output> =
        (0..2).map(|_| ok(&["witness", "run", "-d", "cohmix:alpha2=2", "--format", "csv"])).collect();
    assert_eq!(runs[0].stdout, runs[1].stdout);
    let runs: Vec<Output> = (0..2)
        .map(|_| ok(&["scan", "fringe", "-d", "binomial:N=12,theta=pi/8", "--points", "9", "-R", "200", "--seed", "5"]))
        .collect();
    assert_eq!(runs[0].stdout, runs[1].stdout);
    let runs: Vec<Output> = (0..2)
        .map(|_| ok(&["sample", "-d", "binomial:N=10,theta=pi/8", "--pulse", "pi/2,0", "-R", "50", "--seed", "9"]))
        .collect();
    assert_eq!(runs[0].stdout, runs[1].stdout);
}

#[test]
fn fringe_scan_has_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fringe.csv");
    ok(&["scan", "fringe", "-d", "relphase:N=100", "--points", "41", "-R", "0", "-o", p.to_str().unwrap()]);
    let rows = csv_rows(&p);
    assert_eq!(rows.len(), 41);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    // The p = 0 state has its fringe zero at phi = 0, with the mean rising through it.
    let crossings: Vec<f64> = pts
        .windows(2)
        .filter(|w| w[0].1 < 0.0 && w[1].1 >= 0.0)
        .map(|w| w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .collect();
    assert!(crossings.iter().any(|x| x.abs() < 1e-6), "{crossings:?}");
    assert!(rows.iter().all(|r| r[3].is_empty() && r[4].is_empty()));
}

#[test]
fn hup_region_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("hup.csv");
    ok(&["scan", "hup-region", "--J", "1000", "--xi", "1", "-o", p.to_str().unwrap()]);
    let rows = csv_rows(&p);
    assert_eq!(rows.len(), 201);
    let first: Vec<f64> = (0..3).map(|i| rows[0][i].parse().unwrap()).collect();
    assert_eq!(first, [0.0, 0.0, 1_001_000.0]);
    assert!(rows.iter().all(|r| &r[3] == "false"));

    ok(&["scan", "hup-region", "--J", "1", "--xi", "10", "--points", "11", "-o", p.to_str().unwrap()]);
    let rows = csv_rows(&p);
    assert_eq!(rows.len(), 11);
    let excluded: Vec<&csv::StringRecord> = rows.iter().filter(|r| &r[3] == "true").collect();
    assert!(!excluded.is_empty());
    assert!(excluded.iter().all(|r| r[1].is_empty() && r[2].is_empty()));
}

#[test]
fn sample_records_use_consecutive_seeds() {
    let out = ok(&[
        "sample",
        "-d",
        "binomial:N=10,theta=pi/8",
        "--pulse",
        "pi/2,0",
        "-R",
        "400",
        "--records",
        "3",
        "--seed",
        "7",
        "--summary-only",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = v.as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for (k, r) in recs.iter().enumerate() {
        assert_eq!(r["seed"].as_u64(), Some(7 + k as u64));
        assert_eq!(r["R"].as_u64(), Some(400));
        assert!(r["samples"].as_array().unwrap().is_empty());
        let (m, var) = (r["sample_mean"].as_f64().unwrap(), r["predicted_variance"].as_f64().unwrap());
        assert!((m - r["predicted_mean"].as_f64().unwrap()).abs() < 5.0 * (var / 400.0).sqrt());
    }
}

#[test]
fn sequence_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.json");
    std::fs::write(
        &seq,
        r#"[{"pulse":{"theta":1.5707963267948966,"phi":0.0}},{"free":{"T":1.0,"chi":0.01}},"phase_changer",{"pulse":{"theta":1.5707963267948966,"phi":0.5}}]"#,
    )
    .unwrap();
    let out = ok(&["sample", "-d", "fock:occ=6/0", "--sequence", seq.to_str().unwrap(), "-R", "10"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["samples"].as_array().unwrap().len(), 10);
}

#[test]
fn reproduce_targets_produce_data() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["hup-j1-xi10", "witness-summary"] {
        let p = dir.path().join(id);
        ok(&["reproduce", id, "-o", p.to_str().unwrap()]);
        assert!(std::fs::metadata(&p).unwrap().len() > 0, "{id}");
    }
}
