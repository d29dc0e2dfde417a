use std::path::Path;
use std::process::{Command, Output};

fn mdvi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdvi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn gen(dir: &Path, seed: &str, name: &str) {
    let out = mdvi(
        dir,
        &["garnet", "gen", "--states", "8", "--actions", "2", "--branching", "2", "--discount", "0.9", "--seed", seed, "--out", name],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn garnet_gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "7", "a.json");
    gen(dir.path(), "7", "b.json");
    gen(dir.path(), "8", "c.json");
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_ne!(read("a.json"), read("c.json"));
}

#[test]
fn run_mdvi_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "1", "mdp.json");
    let out = mdvi(
        dir.path(),
        &["run", "mdvi", "--mdp", "mdp.json", "--alpha", "0.9", "--iters", "20", "--samples", "2", "--seed", "4", "--trace", "t.csv"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,k,samples,sup_error_last,wall_ms"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn exact_run_with_nonstationary_column() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "1", "mdp.json");
    let out = mdvi(
        dir.path(),
        &["run", "mdvi", "--mdp", "mdp.json", "--alpha", "0.5", "--iters", "10", "--exact", "--nonstationary", "--trace", "t.csv"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("seed,k,samples,sup_error_last,sup_error_ns,wall_ms\n"));
}

#[test]
fn run_qlearning() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "2", "mdp.json");
    let out = mdvi(
        dir.path(),
        &["run", "qlearning", "--mdp", "mdp.json", "--iters", "15", "--samples", "1", "--rate-exp", "0.8", "--trace", "q.csv"],
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("qlearning(w=0.8,M=1)"));
    let rows = std::fs::read_to_string(dir.path().join("q.csv")).unwrap().lines().count();
    assert_eq!(rows, 17);
}

#[test]
fn params_prints_alpha_k_m() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["params", "--theorem", "1", "--gamma", "0.9", "--eps", "0.1", "--delta", "0.1", "--states", "8", "--actions", "2"];
    let out = mdvi(dir.path(), &args);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("alpha = 0.9"));
    assert!(text.contains("K = 141"));
    assert!(text.contains("M = 127966"));
}

#[test]
fn validation_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "1", "mdp.json");
    let bad_alpha = mdvi(dir.path(), &["run", "mdvi", "--mdp", "mdp.json", "--alpha", "1.5", "--iters", "5", "--trace", "t.csv"]);
    assert_eq!(bad_alpha.status.code(), Some(1));
    let missing = mdvi(dir.path(), &["run", "qlearning", "--mdp", "nope.json", "--iters", "5", "--trace", "t.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    let bad_theorem = mdvi(
        dir.path(),
        &["params", "--theorem", "3", "--gamma", "0.9", "--eps", "0.1", "--delta", "0.1", "--states", "8", "--actions", "2"],
    );
    assert_eq!(bad_theorem.status.code(), Some(1));
    assert_eq!(mdvi(dir.path(), &["no-such-command"]).status.code(), Some(1));
}

#[test]
fn verify_lemmas_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "5", "mdp.json");
    let out = mdvi(
        dir.path(),
        &["verify", "lemmas", "--mdp", "mdp.json", "--alpha", "0.9", "--iters", "20", "--samples", "4", "--seeds", "3", "--report", "r.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["lemmas"].as_array().unwrap().len(), 6);
}

#[test]
fn sweep_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "errors = [0.01, 0.1]\nseeds = 3\n[mdp]\nsource = \"garnet\"\nstates = 6\nactions = 2\nbranching = 2\ndiscount = 0.9\n\
         [algorithm]\nkind = \"qlearning\"\niterations = 40\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let res = mdvi(dir.path(), &["--threads", "2", "sweep", "--config", "cfg.toml", "--out", out]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["records.csv", "sweep.json", "resolved.toml", "convergence.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["schema_version"], 1);
    assert_eq!(sweep["errors"][0], 0.1);
}

#[test]
fn malformed_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "errors = []\nseeds = 1\n").unwrap();
    let out = mdvi(dir.path(), &["sweep", "--config", "cfg.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cfg.toml"));
}
