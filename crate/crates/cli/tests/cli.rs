use std::path::Path;
use std::process::{Command, Output};

use fri_lab::config::{load, to_toml, validate};
use fri_lab::output::{lint_csv, manifest_path};
use fri_lab::registry::{find, REGISTRY};

fn fri_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fri-lab")).args(args).output().expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (Output, String) {
    let out = dir.join(format!("{name}.csv"));
    let mut all = vec!["run", "--output", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = fri_lab(&all);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (o, text)
}

#[test]
fn registry_lists_the_core_experiments() {
    let required = [
        "length-law",
        "edge-density",
        "truncation-decay",
        "theta-curve",
        "u-star-bisection",
        "continuity-scan",
        "t-star-scan",
        "coupling-agreement",
        "strong-percolation",
        "xi-frequency",
        "osss",
        "fkg",
        "revealment",
        "tree-enumeration",
        "j-scales",
    ];
    assert!(REGISTRY.len() >= 12);
    for name in required {
        assert!(find(name).is_some(), "{name} missing");
    }
    let listed = String::from_utf8(fri_lab(&["list"]).stdout).unwrap();
    for e in REGISTRY {
        assert!(listed.contains(e.name));
    }
}

#[test]
fn zero_trials_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let (o, text) = run_to(dir.path(), "z", &["--experiment", "length-law", "--trials", "0"]);
    assert!(o.status.success());
    assert_eq!(text.lines().count(), 1);
    assert_eq!(lint_csv(&text), Ok(0));
}

#[test]
fn reruns_are_byte_identical_across_shard_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--experiment", "subcritical-decay", "--trials", "300", "--set", "u=0.05", "--set", "R=[1,2,3]"];
    let (_, a) = run_to(dir.path(), "a", &args);
    let (_, b) = run_to(dir.path(), "b", &args);
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let mut more = args.to_vec();
    more.extend_from_slice(&["--shards", "7"]);
    let (_, c) = run_to(dir.path(), "c", &more);
    let strip = |t: &str| t.lines().map(|l| l.rsplitn(3, ',').nth(2).unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&c));
}

#[test]
fn every_experiment_emits_schema_conformant_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("length-law", &[]),
        ("edge-density", &["--set", "u_grid=[0.1,1.0]"]),
        ("truncation-decay", &["--set", "u=1", "--set", "L=[2,3]", "--set", "R=[2]"]),
        ("subcritical-decay", &["--set", "u=0.05", "--set", "R=[2,3]"]),
        ("theta-curve", &["--set", "u_grid=[0.05,0.2]", "--set", "R=[2]"]),
        ("u-star-bisection", &["--set", "R=[2]"]),
        ("continuity-scan", &["--set", "T_grid=[0.5,1.0]", "--set", "R=[2]"]),
        ("t-star-scan", &["--set", "u=0.2", "--set", "T_grid=[0.5,2.0]", "--set", "R=[2]"]),
        ("coupling-agreement", &["--set", "u=0.5", "--set", "T_grid=[0.5]", "--set", "R=[2]"]),
        ("strong-percolation", &["--set", "u=1", "--set", "R=[3]"]),
        ("xi-frequency", &["--set", "u=0.5", "--set", "u2=1.0", "--set", "R=[1]"]),
        ("u-tilde", &["--set", "u=1", "--set", "R=[3]"]),
        ("osss", &["--set", "u=0.3", "--set", "R=[2]", "--set", "L=[1]"]),
        ("revealment", &["--set", "u=0.3", "--set", "R=[2]", "--set", "L=[1]"]),
        ("fkg", &["--set", "u=1"]),
        ("tree-enumeration", &["--set", "k0=[4]"]),
        ("j-scales", &["--set", "k_max=5"]),
        ("pivotal", &["--set", "u=0.3", "--set", "R=[2]"]),
    ];
    assert_eq!(cases.len(), REGISTRY.len());
    for (name, extra) in cases {
        let mut args = vec!["--experiment", name, "--trials", "20"];
        args.extend_from_slice(extra);
        let (o, text) = run_to(dir.path(), name, &args);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let rows = lint_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(rows > 0, "{name} wrote no rows");
        assert!(text.lines().skip(1).all(|l| l.starts_with(name)));
        let manifest = std::fs::read_to_string(manifest_path(&dir.path().join(format!("{name}.csv")))).unwrap();
        assert!(manifest.contains("status = \"complete\""));
        assert!(manifest.contains(&format!("rows = {rows}")));
    }
}

#[test]
fn manifest_config_revalidates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_to(dir.path(), "m", &["--experiment", "edge-density", "--trials", "10", "--set", "u=0.5"]);
    assert!(o.status.success());
    let manifest: toml::Table = std::fs::read_to_string(manifest_path(&dir.path().join("m.csv"))).unwrap().parse().unwrap();
    let echoed = toml::to_string(manifest["config"].as_table().unwrap()).unwrap();
    let cfg = load(Some(&echoed), &[]).unwrap();
    assert_eq!(cfg.u, Some(0.5));
    let again = load(Some(&to_toml(&cfg)), &[]).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(validate(&cfg), validate(&again));
}

#[test]
fn unknown_experiment_exits_with_config_error() {
    let o = fri_lab(&["validate", "--experiment", "no-such-thing"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fri_lab(&["run", "--experiment", "no-such-thing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn low_dimension_is_accepted_with_warning() {
    let o = fri_lab(&["validate", "--experiment", "osss", "--set", "u=0.3", "--set", "d=2"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("theory requires d >= 3"));
}

#[test]
fn oversized_window_is_rejected() {
    let o = fri_lab(&["validate", "--experiment", "strong-percolation", "--set", "u=1", "--set", "R=[500]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beyond capacity"));
}

#[test]
fn missing_required_field_is_rejected() {
    let o = fri_lab(&["validate", "--experiment", "xi-frequency", "--set", "u=0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("u2"));
}

#[test]
fn defaults_round_trip_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let o = fri_lab(&["defaults", "--experiment", "j-scales"]);
    assert!(o.status.success());
    let path = dir.path().join("defaults.toml");
    std::fs::write(&path, &o.stdout).unwrap();
    let v = fri_lab(&["validate", "--config", path.to_str().unwrap()]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn dumped_trace_replays_and_tampering_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    let dump = format!("trace_dump={:?}", trace.to_str().unwrap());
    let (o, _) =
        run_to(dir.path(), "r", &["--experiment", "revealment", "--trials", "5", "--set", "u=0.3", "--set", "R=[3]", "--set", &dump]);
    assert!(o.status.success());
    let ok = fri_lab(&["replay-trace", trace.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    let flipped = match text.find("outcome 1") {
        Some(_) => text.replace("outcome 1", "outcome 0"),
        None => text.replace("outcome 0", "outcome 1"),
    };
    std::fs::write(&trace, flipped).unwrap();
    let bad = fri_lab(&["replay-trace", trace.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn linter_rejects_malformed_rows() {
    let header = "experiment,d,u,T,R,L,eps,extra,trials,successes,p_hat,ci_low,ci_high,seed,shards,intrusion_tol\n";
    assert!(lint_csv("a,b\n").is_err());
    assert!(lint_csv(&format!("{header}x,3,,,,,,k=1,10,11,1.1,0,1,1,1,1e-6\n")).is_err());
    assert!(lint_csv(&format!("{header}x,3,,,,,,novalue,10,5,0.5,0.2,0.8,1,1,1e-6\n")).is_err());
    assert_eq!(lint_csv(&format!("{header}x,3,0.5,1.0,4,2,0.2,k=1,10,5,0.5,0.2,0.8,1,1,1e-6\n")), Ok(1));
}
