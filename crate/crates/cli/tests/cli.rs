use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIVE_EDGES: &str = "u1 o1\nu1 o2\nu2 o1\nu2 o3\nu3 o2\n";

fn coldstart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldstart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = coldstart(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(&path).unwrap_or_else(|_| panic!("missing {}", path.display()))).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    let path = dir.join("five.txt");
    fs::write(&path, FIVE_EDGES).unwrap();
    path
}

/// A small generated network, returned as its edge-list path.
fn generated(dir: &Path) -> PathBuf {
    let out = dir.join("gen");
    ok(&[
        "generate",
        "--seed",
        "11",
        "--user-count",
        "600",
        "--item-count",
        "300",
        "--output-dir",
        s(&out),
    ]);
    out.join("edges.tsv")
}

#[test]
fn stats_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("stats");
    ok(&["stats", "--input", s(&input), "--output-dir", s(&out)]);

    let summary = json(out.join("summary.json"));
    assert_eq!(summary["users"], 3);
    assert_eq!(summary["items"], 3);
    assert_eq!(summary["links"], 5);
    assert_eq!(
        fs::read_to_string(out.join("knn_user.csv")).unwrap(),
        "k,value,count\n1,2,1\n2,1.75,2\n"
    );
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["command"], "stats");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["seed"], Value::Null);
}

#[test]
fn unreadable_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no-such-edges.txt");
    let out_dir = dir.path().join("out");
    let out = coldstart(&["stats", "--input", s(&missing), "--output-dir", s(&out_dir)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no-such-edges.txt"), "{err}");
    assert!(!out_dir.exists(), "nothing should be written on failure");
}

#[test]
fn malformed_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.txt");
    fs::write(&input, "u1 o1\nu2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = coldstart(&["stats", "--input", s(&input), "--output-dir", s(&out_dir)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!out_dir.exists());
}

#[test]
fn single_cell_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("sweep");
    ok(&[
        "sweep",
        "--input",
        s(&input),
        "--strategies",
        "RAN",
        "--R-grid",
        "1",
        "--realizations",
        "1",
        "--seed",
        "4",
        "--output-dir",
        s(&out),
    ]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "strategy,tau,R,L,mean_H,std_H,realizations,seed");
    assert!(lines[1].starts_with("RAN,0,1,6,"), "{}", lines[1]);
    assert!(lines[1].ends_with(",0,1,4"), "{}", lines[1]);
}

#[test]
fn rerun_with_recorded_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = generated(dir.path());
    let first = dir.path().join("first");
    ok(&[
        "sweep",
        "--input",
        s(&input),
        "--strategies",
        "MaxD,MinD,PA,RAN",
        "--tau-grid",
        "-2,2",
        "--R-grid",
        "1,10,50",
        "--realizations",
        "8",
        "--threads",
        "1",
        "--output-dir",
        s(&first),
    ]);
    let manifest = json(first.join("manifest.json"));
    assert_eq!(manifest["seed_generated"], true);
    let seed = manifest["seed"].as_u64().unwrap().to_string();

    let second = dir.path().join("second");
    ok(&[
        "sweep",
        "--input",
        s(&input),
        "--strategies",
        "MaxD,MinD,PA,RAN",
        "--tau-grid",
        "-2,2",
        "--R-grid",
        "1,10,50",
        "--realizations",
        "8",
        "--threads",
        "4",
        "--seed",
        &seed,
        "--output-dir",
        s(&second),
    ]);
    let a = fs::read(first.join("sweep.csv")).unwrap();
    let b = fs::read(second.join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 6 * 3);
    let digest = |m: &Value| m["outputs"][0]["sha256"].clone();
    assert_eq!(digest(&manifest), digest(&json(second.join("manifest.json"))));
}

#[test]
fn reshuffle_defaults_to_three_attempts_per_link() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("null");
    ok(&["reshuffle", "--input", s(&input), "--seed", "2", "--output-dir", s(&out)]);
    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["parameters"]["attempts"], 15);
    assert_eq!(manifest["seed"], 2);
    assert_eq!(json(out.join("reshuffle.json"))["attempts"], 15);

    let again = dir.path().join("stats");
    ok(&["stats", "--input", s(&out.join("edges.tsv")), "--output-dir", s(&again)]);
    let summary = json(again.join("summary.json"));
    assert_eq!((summary["users"].clone(), summary["links"].clone()), (3.into(), 5.into()));
}

#[test]
fn generated_network_round_trips_through_mapping_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = generated(dir.path());
    let gen = input.parent().unwrap();
    let out = dir.path().join("null");
    ok(&[
        "reshuffle",
        "--input",
        s(&input),
        "--user-map",
        s(&gen.join("users.tsv")),
        "--item-map",
        s(&gen.join("items.tsv")),
        "--attempts",
        "0",
        "--seed",
        "1",
        "--output-dir",
        s(&out),
    ]);
    for f in ["edges.tsv", "users.tsv", "items.tsv"] {
        assert_eq!(fs::read(gen.join(f)).unwrap(), fs::read(out.join(f)).unwrap(), "{f}");
    }
    let report = json(gen.join("generation.json"));
    assert!(report["correlation"].as_f64().unwrap() < 0.0);
}

#[test]
fn recommend_writes_ranked_lists() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("rec");
    ok(&["recommend", "--input", s(&input), "--L", "1", "--users", "u2,u3", "--output-dir", s(&out)]);
    assert_eq!(
        fs::read_to_string(out.join("recommendations.csv")).unwrap(),
        "user,rank,item,score\nu2,1,o2,0.5\nu3,1,o1,0.5\n"
    );

    let bad = coldstart(&["recommend", "--input", s(&input), "--users", "nobody"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("nobody"));
}

#[test]
fn invalid_combinations_are_rejected_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let out = dir.path().join("x");
    let cases: [&[&str]; 5] = [
        &["recommend", "--input", s(&input), "--engine", "ucf", "--top-k", "2", "--output-dir", s(&out)],
        &["reshuffle", "--input", s(&input), "--user-map", s(&input), "--output-dir", s(&out)],
        &["promote", "--input", s(&input), "--R", "1", "--output-dir", s(&out)],
        &["sweep", "--input", s(&input), "--realizations", "0", "--output-dir", s(&out)],
        &["sweep", "--output-dir", s(&out)],
    ];
    for args in cases {
        let res = coldstart(args);
        assert_eq!(res.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("Usage:"), "{args:?}");
    }
    let too_many = coldstart(&["promote", "--input", s(&input), "--strategy", "RAN", "--R", "4", "--seed", "1"]);
    assert!(!too_many.status.success());
    assert!(!out.exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture(dir.path());
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("cfg");
    fs::write(
        &cfg,
        format!(
            "# promotion defaults\ninput = {}\nstrategy = MaxD\nR = 1\nrealizations = 3\nseed = 5\nL = 1\n",
            input.display()
        ),
    )
    .unwrap();
    ok(&["promote", "--config", s(&cfg), "--seed", "6", "--output-dir", s(&out)]);
    let row = fs::read_to_string(out.join("promote.csv")).unwrap();
    assert!(row.lines().nth(1).unwrap().starts_with("MaxD,inf,1,1,"));
    assert!(row.lines().nth(1).unwrap().ends_with(",3,6"));
    assert_eq!(json(out.join("manifest.json"))["inputs"].as_array().unwrap().len(), 2);

    fs::write(&cfg, "surprise = 1\n").unwrap();
    let res = coldstart(&["stats", "--input", s(&input), "--config", s(&cfg)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("surprise"));
}
