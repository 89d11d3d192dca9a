use std::fs;

use walkalloc_core::allocator::{max_load, run_allocation, Strategy};
use walkalloc_core::graph::{generate_random_regular, girth, load_fixture, moore_bound, GraphSpec, RegularGraph};
use walkalloc_core::harness::{read_results_csv, run_experiment, ExperimentConfig};
use walkalloc_core::metrics::{check_n_delta, lower_bound_stat, read_metrics_csv};
use walkalloc_core::rng::seeded;
use walkalloc_core::trace::{read_trace, write_trace};
use walkalloc_core::Error;

/// Every labelled cubic graph on `n` nodes, by backtracking over the edges of
/// `K_n` in lexicographic order.
fn all_cubic_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(
        n: usize,
        pairs: &[(usize, usize)],
        i: usize,
        deg: &mut Vec<usize>,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if chosen.len() == 3 * n / 2 {
            out.push(chosen.clone());
            return;
        }
        if i == pairs.len() {
            return;
        }
        let (u, v) = pairs[i];
        // Node u sees no edges after its last pair; it must be full by then.
        let last_for_u = i + 1 == pairs.len() || pairs[i + 1].0 != u;
        if deg[u] < 3 && deg[v] < 3 {
            deg[u] += 1;
            deg[v] += 1;
            chosen.push((u, v));
            if !last_for_u || deg[u] == 3 {
                go(n, pairs, i + 1, deg, chosen, out);
            }
            chosen.pop();
            deg[u] -= 1;
            deg[v] -= 1;
        }
        if !last_for_u || deg[u] == 3 {
            go(n, pairs, i + 1, deg, chosen, out);
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut out = Vec::new();
    go(n, &pairs, 0, &mut vec![0; n], &mut Vec::new(), &mut out);
    out
}

#[test]
fn cubic_graphs_on_eight_nodes_respect_moore_bound() {
    let graphs = all_cubic_graphs(8);
    // 19355 labelled cubic graphs on 8 vertices (OEIS A002829).
    assert_eq!(graphs.len(), 19355);
    let best = graphs
        .iter()
        .map(|e| girth(&RegularGraph::from_edges(8, e).unwrap()))
        .max()
        .unwrap();
    assert_eq!(best, 4);
    assert!(moore_bound(3, 5) > 8);
    assert_eq!(moore_bound(3, 5), 10);
    assert_eq!(girth(&load_fixture("petersen").unwrap()), 5);
    let err = generate_random_regular(&GraphSpec::random(8, 3, 1).with_min_girth(5)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleGirth { .. }), "{err:?}");
}

#[test]
fn trace_survives_disk_and_analysis() {
    let g = load_fixture("heawood").unwrap();
    let s = Strategy::nbrw_dense(3).unwrap();
    let tr = run_allocation(&g, &s, 200, 4, false, &mut seeded(4));
    let dir = tempfile::tempdir().unwrap();
    for name in ["t.jsonl", "t.jsonl.gz"] {
        let p = dir.path().join(name);
        write_trace(&tr, &p).unwrap();
        let back = read_trace(&p).unwrap();
        assert_eq!(back.balls, tr.balls);
        assert_eq!(back.loads, tr.loads);
        assert!(back.replay_violations(Some(&g)).is_empty());
        assert_eq!(lower_bound_stat(&back).unwrap(), lower_bound_stat(&tr).unwrap());
        assert_eq!(check_n_delta(&back, 2).unwrap(), check_n_delta(&tr, 2).unwrap());
    }
}

#[test]
fn random_graph_experiment_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
strategies = ["nbrw-dense", "nbrw-sparse", "one-choice", "d-choice(2)"]
l = [3]
r_g = 2
seeds = 3
base_seed = 5
output_dir = "{}"
save_traces = true

[graph]
kind = "random-regular"
n = 512
d = 6
min_girth = 5
seed = 3

[metrics]
n_delta_delta = 2
potential = true
potential_every = 128
"#,
        dir.path().display()
    ))
    .unwrap();
    let res = run_experiment(&cfg).unwrap();
    assert!(res.girth >= 5);
    assert_eq!(res.rows.len(), 12);
    assert_eq!(read_results_csv(dir.path().join("results.csv")).unwrap(), res.rows);
    let metrics = read_metrics_csv(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.iter().any(|m| m.metric == "ln_phi" && m.t == 512));
    for row in &res.rows {
        assert!(row.max_load >= 1);
        if let Some(implied) = row.implied_lower_bound {
            assert!(implied <= row.max_load);
        }
    }
    let traces: Vec<_> = fs::read_dir(dir.path().join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 12);
    let one = read_trace(dir.path().join("traces/one-choice_l0_s1.jsonl")).unwrap();
    assert_eq!(one.balls.len(), 512);
    assert_eq!(
        max_load(&one),
        res.rows.iter().find(|r| r.seed == one.seed).unwrap().max_load
    );
}
