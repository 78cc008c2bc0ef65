use netwave::cli::{main_with_args, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_UNSTABLE};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], cfg: &str, out: &Path) -> i32 {
    let mut all = vec!["netwave".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.push("--config".into());
    all.push(config(cfg).display().to_string());
    all.push("--out".into());
    all.push(out.display().to_string());
    main_with_args(all)
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes_follow_the_verdicts() {
    let dir = TempDir::new().unwrap();
    let cases: [(&[&str], &str, i32); 8] = [
        (&["lattice"], "lattice_dependent.json", EXIT_OK),
        (&["lattice"], "lattice_rank_deficient.json", EXIT_INVALID),
        (&["lattice"], "missing.json", EXIT_IO),
        (&["stability", "wave"], "star.json", EXIT_OK),
        (&["stability", "wave"], "triangle.json", EXIT_UNSTABLE),
        (&["stability", "wave"], "two_undamped.json", EXIT_UNSTABLE),
        (&["stability", "delays"], "family_half.json", EXIT_OK),
        (&["stability", "delays"], "family_one.json", EXIT_INCONCLUSIVE),
    ];
    for (i, (args, cfg, code)) in cases.iter().enumerate() {
        assert_eq!(run(args, cfg, &dir.path().join(i.to_string())), *code, "{args:?} {cfg}");
    }
}

#[test]
fn malformed_arguments_are_invalid() {
    assert_eq!(main_with_args(["netwave", "simulate", "nothing"]), EXIT_INVALID);
    assert_eq!(main_with_args(["netwave", "lattice", "--grid-step=-1/2"]), EXIT_INVALID);
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run(&["simulate", "wave", "--seed", "11", "--horizon", "2"], "star.json", out), EXIT_OK);
    }
    for name in ["field.csv", "energy.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    // metadata differs only by the output directory it records
    let strip = |dir: &Path| {
        let mut v = read(&dir.join("metadata.json"));
        v["run"]["options"]["out"] = Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
    let c = dir.path().join("c");
    assert_eq!(run(&["simulate", "wave", "--seed", "12", "--horizon", "2"], "star.json", &c), EXIT_OK);
    assert_ne!(fs::read(a.join("field.csv")).unwrap(), fs::read(c.join("field.csv")).unwrap());
}

#[test]
fn outputs_embed_the_run_description() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["stability", "wave", "--seed", "3"], "triangle.json", dir.path()), EXIT_UNSTABLE);
    let verdict = read(&dir.path().join("verdict.json"));
    let embedded = &verdict["run"]["config"];
    assert_eq!(embedded, &read(&config("triangle.json")));
    assert_eq!(verdict["run"]["options"]["seed"], 3);
    assert!(verdict["run"]["tolerances"].is_object());
}

#[test]
fn simulations_write_trajectories() {
    let dir = TempDir::new().unwrap();
    let diff = dir.path().join("difference");
    assert_eq!(run(&["simulate", "difference", "--format", "json"], "scalar_stable.json", &diff), EXIT_OK);
    assert!(read(&diff.join("trajectory.json")).is_object());
    let transport = dir.path().join("transport");
    assert_eq!(run(&["simulate", "transport"], "transport_loop.json", &transport), EXIT_OK);
    let energy = fs::read_to_string(transport.join("energy.csv")).unwrap();
    assert!(energy.lines().count() > 2);
}

#[test]
fn batches_report_every_run() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["batch"], "batch.json", dir.path()), EXIT_OK);
    let report = read(&dir.path().join("batch.json"));
    let codes: Vec<i64> = report["runs"].as_array().unwrap().iter().map(|r| r["exit_code"].as_i64().unwrap()).collect();
    assert_eq!(codes, [0, 3, 3, 0, 0]);
    assert!(dir.path().join("001-stability-wave").join("verdict.json").exists());
}
