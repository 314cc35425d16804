use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logic-embed")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["train", "--help"]).status.code(), Some(0));
}

#[test]
fn gen_tree_summary_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-tree", "--depth", "7", "--out", p(dir.path())]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "V=127 E=642 Ec=15487");
    let edges = fs::read_to_string(dir.path().join("edges.tsv")).unwrap();
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 642);
    let comp = fs::read_to_string(dir.path().join("complement.tsv")).unwrap();
    assert_eq!(comp.lines().count(), 15487);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["gen-tree", "--depth", "3", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["train", "--facts", "/nonexistent/facts.tsv"]).status.code(), Some(2));
}

#[test]
fn unsupported_rule_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("f.tsv");
    let rules = dir.path().join("r.txt");
    fs::write(&facts, "a\tr\tb\nb\ts\ta\n").unwrap();
    fs::write(&rules, "RevImp(r, s)\n").unwrap();
    let out = run(&["train", "--facts", p(&facts), "--rules", p(&rules), "--model", "Tucker2", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not supported"));
}

#[test]
fn puzzle_report_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["puzzle", "--model", "B", "--constrained", "--seeds", "2", "--ent-dim", "8", "--steps", "50"];
    for d in [&a, &b] {
        let mut v = args.to_vec();
        v.extend(["--out", p(d.path())]);
        assert!(run(&v).status.success());
    }
    let ja = fs::read_to_string(a.path().join("puzzle.json")).unwrap();
    let jb = fs::read_to_string(b.path().join("puzzle.json")).unwrap();
    assert_eq!(ja, jb);
    let v: serde_json::Value = serde_json::from_str(&ja).unwrap();
    for k in ["p_at_10", "mrr", "map"] {
        assert!(v["metrics"][k].is_number(), "{k}");
    }
}

#[test]
fn config_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# puzzle run\nent_dim = 6\nsteps = 20\nconstrained = true\nseeds = 1\n").unwrap();
    let out = dir.path().join("out");
    let res = run(&["puzzle", "--config", p(&cfg), "--ent-dim", "9", "--out", p(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("puzzle.json")).unwrap()).unwrap();
    let echo = &v["config_echo"];
    assert_eq!(echo["ent_dim"], 9);
    assert_eq!(echo["constrained"], true);
    assert_eq!(echo["train"]["steps"], 20);
}

#[test]
fn train_then_eval_lp() {
    let dir = tempfile::tempdir().unwrap();
    let facts = dir.path().join("f.tsv");
    let test = dir.path().join("t.tsv");
    fs::write(&facts, "a\tr\tb\nb\tr\tc\nc\tr\td\n").unwrap();
    fs::write(&test, "a\tr\tc\n").unwrap();
    let out = dir.path().join("run");
    let t = run(&["train", "--facts", p(&facts), "--ent-dim", "4", "--steps", "10", "--out", p(&out)]);
    assert!(t.status.success());
    assert!(out.join("model.ckpt").exists());
    let e = run(&[
        "eval-lp", "--checkpoint", p(&out.join("model.ckpt")), "--facts", p(&facts), "--test", p(&test),
        "--filtered", "--threads", "2", "--out", p(&out),
    ]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("link_prediction.json")).unwrap()).unwrap();
    let mrr = v["metrics"]["mrr"].as_f64().unwrap();
    assert!(mrr > 0.0 && mrr <= 1.0);
}

#[test]
fn verify_theory_lists_counterexamples() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["verify-theory", "--dim", "3", "--trials", "5", "--out", p(dir.path())]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("theory.json")).unwrap()).unwrap();
    let trials = v["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 5);
    assert!(trials.iter().all(|t| t["verified"] == true));
}
