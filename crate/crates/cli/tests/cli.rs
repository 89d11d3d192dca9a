use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn walkalloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkalloc"))
        .args(args)
        .env_remove("WALKALLOC_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let out = dir.join("out");
    let cfg = format!(
        r#"
strategies = ["nbrw-dense", "one-choice"]
l = [2, 3]
seeds = 3
base_seed = 11
save_traces = true
output_dir = "{}"
{extra}

[graph]
kind = "fixture"
name = "heawood"
"#,
        out.display()
    );
    let p = dir.join("exp.toml");
    fs::write(&p, cfg).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn params_worked_example() {
    let o = walkalloc(&["params", "--n", "1125899906842624", "--d", "4", "--l", "40"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for line in ["k=8", "delta=1", "rho=150", "h=2"] {
        assert!(s.lines().any(|l| l == line), "missing {line} in\n{s}");
    }
}

#[test]
fn params_json_and_rho_constant() {
    let o = walkalloc(&[
        "params",
        "--n",
        "1125899906842624",
        "--d",
        "4",
        "--l",
        "40",
        "--rho-constant",
        "8",
        "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["params"]["rho"], 200);
    assert_eq!(
        walkalloc(&["params", "--n", "100", "--d", "4", "--l", "4", "--rho-constant", "7"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(walkalloc(&["run", "--config", "missing.toml"]).status.code(), Some(1));
    assert_eq!(walkalloc(&["bogus"]).status.code(), Some(1));
    assert_eq!(walkalloc(&["params", "--n", "x"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "strategies = []\nseeds = 1\n[graph]\nkind = \"fixture\"\nname = \"k4\"\n",
    )
    .unwrap();
    assert_eq!(
        walkalloc(&["run", "--config", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(walkalloc(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    assert_eq!(walkalloc(&["generate", "--n", "7", "--d", "3"]).status.code(), Some(2));
    assert_eq!(
        walkalloc(&["generate", "--n", "8", "--d", "3", "--min-girth", "6"])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "strategies = [\"one-choice\"]\nseeds = 1\n[graph]\nkind = \"fixture\"\nname = \"nope\"\n",
    )
    .unwrap();
    assert_eq!(
        walkalloc(&["run", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn generate_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("g.edges");
    let o = walkalloc(&[
        "generate",
        "--n",
        "10",
        "--d",
        "3",
        "--seed",
        "7",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next(), Some("10 3"));
    assert_eq!(text.lines().count(), 16);
    let o = walkalloc(&["generate", "--fixture", "petersen"]);
    assert!(stdout(&o).starts_with("10 3\n"));
}

#[test]
fn run_then_analyze_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = walkalloc(&["run", "--config", &cfg, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 3 + 3);

    let trace = out.join("traces/nbrw-dense_l3_s0.jsonl");
    let metrics = dir.path().join("m.csv");
    let o = walkalloc(&[
        "analyze",
        "--trace",
        trace.to_str().unwrap(),
        "--fixture",
        "heawood",
        "--delta",
        "1",
        "--potential-every",
        "7",
        "--out",
        metrics.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = fs::read_to_string(&metrics).unwrap();
    assert!(m.starts_with("run,metric,t,value\n"));
    assert!(m.contains("nbrw-dense_l3_s0,replay_violations,14,0\n"));
    assert!(m.contains(",ln_phi,0,"));

    let o = walkalloc(&["analyze", "--results", out.join("results.csv").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("one-choice,0,3,"));

    // Heawood traces are far below any witness threshold: the builder reports
    // why and exits 2.
    let o = walkalloc(&[
        "witness",
        "build",
        "--trace",
        trace.to_str().unwrap(),
        "--k",
        "4",
        "--rho",
        "5",
        "--h",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("threshold-not-met"));
}

#[test]
fn witness_verify_on_planted_trace() {
    // Root walk 0..=8 on fresh nodes with fillers to load 2, then one planted
    // child per subpath, each filled to load 1.
    let dir = tempfile::tempdir().unwrap();
    let mut lines = vec![r#"{"n":60,"d":2,"l":8,"r_G":1,"strategy":"nbrw-dense","seed":0}"#.to_string()];
    let mut loads = vec![0usize; 60];
    let mut push = |walk: Vec<usize>, lines: &mut Vec<String>| {
        let chosen = *walk.iter().min_by_key(|&&u| loads[u]).unwrap();
        let t = lines.len() - 1;
        lines.push(format!(
            r#"{{"t":{t},"walk":{w:?},"choices":{w:?},"chosen":{chosen},"height":{h}}}"#,
            w = walk,
            h = loads[chosen]
        ));
        loads[chosen] += 1;
    };
    let root: Vec<usize> = (0..=8).collect();
    for _ in 0..19 {
        push(root.clone(), &mut lines);
    }
    for i in 0..4 {
        let mut child = vec![2 * i + 1];
        child.extend(10 + 10 * i..18 + 10 * i);
        for _ in 0..9 {
            push(child.clone(), &mut lines);
        }
    }
    let trace = dir.path().join("t.jsonl");
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let tree = dir.path().join("tree.json");
    let o = walkalloc(&[
        "witness",
        "build",
        "--trace",
        trace.to_str().unwrap(),
        "--k",
        "4",
        "--rho",
        "1",
        "--h",
        "1",
        "--c",
        "1",
        "--out",
        tree.to_str().unwrap(),
    ]);
    assert!(
        o.status.success(),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let o = walkalloc(&[
        "witness",
        "verify",
        "--tree",
        tree.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("ok: lambda=5"));

    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&tree).unwrap()).unwrap();
    v["lambda"] = serde_json::json!(6);
    fs::write(&tree, v.to_string()).unwrap();
    let o = walkalloc(&[
        "witness",
        "verify",
        "--tree",
        tree.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("lambda"));
}

#[test]
fn run_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let mut outputs = Vec::new();
    for (w, sub) in [("1", "a"), ("8", "b")] {
        let od = dir.path().join(sub);
        let o = walkalloc(&[
            "run",
            "--config",
            &cfg,
            "--workers",
            w,
            "--output-dir",
            od.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let text = fs::read_to_string(od.join("results.csv")).unwrap();
        let stripped: Vec<String> = text
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect();
        outputs.push(stripped);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn workers_env_is_honoured_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let run = |val: &str| {
        Command::new(env!("CARGO_BIN_EXE_walkalloc"))
            .args(["run", "--config", &cfg])
            .env("WALKALLOC_WORKERS", val)
            .output()
            .unwrap()
    };
    assert!(run("2").status.success());
    let bad = run("zero");
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("WALKALLOC_WORKERS"));
}
