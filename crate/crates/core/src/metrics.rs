//! Diagnostics over finished traces: path multiplicities, the pigeonhole lower
//! bound, placement uniformity, the neighbourhood potential, and a small CSV
//! format for metric series.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{place, AllocationTrace, Strategy};
use crate::error::{Error, Result};
use crate::graph::{NodeId, RegularGraph};
use crate::rng::substream;

/// The lexicographically smaller of `seq` and its reverse.
pub fn canonical(seq: &[NodeId]) -> Vec<NodeId> {
    let rev_smaller = seq.iter().rev().lt(seq.iter());
    if rev_smaller {
        seq.iter().rev().copied().collect()
    } else {
        seq.to_vec()
    }
}

/// How many walks contain each orientation-free subpath of a fixed length.
#[derive(Debug, Clone, Default)]
pub struct PathMultiplicityIndex {
    /// Subpath length in edges.
    pub subpath_length: usize,
    pub counts: HashMap<Vec<NodeId>, usize>,
    pub max_multiplicity: usize,
    /// Canonical form of a most frequent subpath; ties go to the smallest key.
    pub argmax_path: Vec<NodeId>,
}

impl PathMultiplicityIndex {
    /// Indexes all subpaths with `len` edges. A walk that contains the same
    /// subpath twice still counts once for it.
    pub fn build<'a>(walks: impl IntoIterator<Item = &'a [NodeId]>, len: usize) -> Self {
        let mut counts: HashMap<Vec<NodeId>, usize> = HashMap::new();
        let mut seen: Vec<Vec<NodeId>> = Vec::new();
        for w in walks {
            if w.len() < len + 1 {
                continue;
            }
            seen.clear();
            for s in w.windows(len + 1) {
                let key = canonical(s);
                if seen.contains(&key) {
                    continue;
                }
                *counts.entry(key.clone()).or_insert(0) += 1;
                seen.push(key);
            }
        }
        let (argmax_path, max_multiplicity) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(k, &c)| (k.clone(), c))
            .unwrap_or_default();
        PathMultiplicityIndex {
            subpath_length: len,
            counts,
            max_multiplicity,
            argmax_path,
        }
    }

    pub fn count(&self, path: &[NodeId]) -> usize {
        self.counts.get(&canonical(path)).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NDeltaCheck {
    pub delta: usize,
    pub holds: bool,
    pub max_multiplicity: usize,
    /// `6 log_{d-1} n / delta`.
    pub threshold: f64,
    /// `12 log_{d-1} n / delta`, the count used when branching.
    pub threshold_branch: f64,
    pub holds_branch: bool,
    pub argmax_path: Vec<NodeId>,
}

pub fn ndelta_threshold(n: usize, d: usize, delta: usize) -> f64 {
    6.0 * (n as f64).ln() / ((d - 1) as f64).ln() / delta as f64
}

/// Whether no path of `delta` edges lies in `6 log_{d-1} n / delta` or more
/// chosen walks.
pub fn check_n_delta(trace: &AllocationTrace, delta: usize) -> Result<NDeltaCheck> {
    let threshold = ndelta_threshold(trace.n, trace.d, delta.max(1));
    check_n_delta_with(trace, delta, threshold)
}

pub fn check_n_delta_with(trace: &AllocationTrace, delta: usize, threshold: f64) -> Result<NDeltaCheck> {
    if delta < 1 {
        return Err(Error::Config("delta must be at least 1".into()));
    }
    let idx = PathMultiplicityIndex::build(trace.walks()?, delta);
    let m = idx.max_multiplicity as f64;
    Ok(NDeltaCheck {
        delta,
        holds: m < threshold,
        max_multiplicity: idx.max_multiplicity,
        threshold,
        threshold_branch: 2.0 * threshold,
        holds_branch: m < 2.0 * threshold,
        argmax_path: idx.argmax_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundStat {
    /// Multiplicity of the most frequently chosen full walk.
    pub tau_hat: usize,
    /// `ceil(tau_hat / (l + 1))`: some candidate of that walk carries at least
    /// this many balls.
    pub implied_load: usize,
    /// `log_d n / (6 l r_G)` when the trace carries parameters.
    pub tau_theory: Option<f64>,
    pub argmax_walk: Vec<NodeId>,
}

pub fn lower_bound_stat(trace: &AllocationTrace) -> Result<LowerBoundStat> {
    let (Some(l), Some(len)) = (trace.strategy.l(), trace.strategy.walk_length()) else {
        return Err(Error::InvalidStrategy(format!(
            "{} does not sample walks",
            trace.strategy
        )));
    };
    let idx = PathMultiplicityIndex::build(trace.walks()?, len);
    Ok(LowerBoundStat {
        tau_hat: idx.max_multiplicity,
        implied_load: idx.max_multiplicity.div_ceil(l + 1),
        tau_theory: trace.params.as_ref().map(|p| p.tau),
        argmax_walk: idx.argmax_path,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformityReport {
    /// `n` times the largest per-ball placement frequency of any node in any
    /// window.
    pub alpha_hat: f64,
    pub n1_used: usize,
    pub trials: usize,
    /// Ball-index windows `[start, end)`.
    pub windows: Vec<(usize, usize)>,
    /// `n` times the largest frequency inside each window.
    pub window_alpha: Vec<f64>,
    /// Placement frequency per ball slot, averaged over all windows.
    pub per_node_freq: Vec<f64>,
    /// Fewer than `1000 n` trials.
    pub undersampled: bool,
}

const UNIFORMITY_WINDOWS: usize = 16;

fn windows(n1: usize) -> Vec<(usize, usize)> {
    let w = UNIFORMITY_WINDOWS.min(n1).max(1);
    (0..w).map(|i| (i * n1 / w, (i + 1) * n1 / w)).collect()
}

/// Runs `trials` independent allocations of `n1` balls and estimates how
/// likely each ball slot is to land on each node.
pub fn estimate_uniformity(
    g: &RegularGraph,
    strategy: &Strategy,
    n1: usize,
    trials: usize,
    seed: u64,
) -> UniformityReport {
    let n = g.n();
    let n1 = n1.max(1);
    let wins = windows(n1);
    let mut window_of = vec![0usize; n1];
    for (i, &(a, b)) in wins.iter().enumerate() {
        window_of[a..b].fill(i);
    }
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || {
                let counts = vec![0u64; wins.len() * n];
                (counts, vec![0usize; n], Vec::new(), Vec::new(), Vec::new(), Vec::new())
            },
            |(mut counts, mut loads, mut walk, mut choices, mut scratch, mut placed), r| {
                let mut rng = substream(seed, r as u64);
                placed.clear();
                for &w in window_of.iter() {
                    let u = place(&loads, g, strategy, &mut rng, &mut walk, &mut choices, &mut scratch);
                    loads[u] += 1;
                    placed.push(u);
                    counts[w * n + u] += 1;
                }
                for &u in &placed {
                    loads[u] = 0;
                }
                (counts, loads, walk, choices, scratch, placed)
            },
        )
        .map(|acc| acc.0)
        .reduce(
            || vec![0u64; wins.len() * n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let t = trials.max(1) as f64;
    let window_alpha: Vec<f64> = wins
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let slots = t * (b - a) as f64;
            let max = counts[i * n..(i + 1) * n].iter().copied().max().unwrap_or(0);
            n as f64 * max as f64 / slots
        })
        .collect();
    let per_node_freq = (0..n)
        .map(|u| {
            let c: u64 = (0..wins.len()).map(|i| counts[i * n + u]).sum();
            c as f64 / (t * n1 as f64)
        })
        .collect();
    UniformityReport {
        alpha_hat: window_alpha.iter().copied().fold(0.0, f64::max),
        n1_used: n1,
        trials,
        windows: wins,
        window_alpha,
        per_node_freq,
        undersampled: trials < 1000 * n,
    }
}

/// `ln Phi(t)`, the largest nonempty-neighbour count, and the smallest number of
/// empty neighbours, sampled along a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSeries {
    pub timestamps: Vec<usize>,
    pub ln_phi: Vec<f64>,
    pub a_max: Vec<usize>,
    pub empty_min: Vec<usize>,
    /// `ln(n e^{d/4})`.
    pub ln_threshold: f64,
}

impl PotentialSeries {
    /// First sampled time at which `Phi` reaches `n e^{d/4}`.
    pub fn threshold_crossed_at(&self) -> Option<usize> {
        self.ln_phi
            .iter()
            .position(|&p| p >= self.ln_threshold)
            .map(|i| self.timestamps[i])
    }
}

/// `ln sum_a hist[a] e^a`.
fn ln_phi(hist: &[usize]) -> f64 {
    let top = hist.iter().rposition(|&c| c > 0).unwrap_or(0) as f64;
    let s: f64 = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(a, &c)| c as f64 * (a as f64 - top).exp())
        .sum();
    top + s.ln()
}

/// Replays `trace`, maintaining `a_t(u)` (nonempty neighbours of `u`)
/// incrementally, and samples at `t = 0, s, 2s, ...` and at the end.
pub fn potential_series(trace: &AllocationTrace, g: &RegularGraph, sample_every: usize) -> PotentialSeries {
    let n = g.n();
    let d = g.d();
    let step = sample_every.max(1);
    let mut loads = vec![0usize; n];
    let mut a = vec![0usize; n];
    let mut hist = vec![0usize; d + 1];
    hist[0] = n;
    let mut out = PotentialSeries {
        timestamps: Vec::new(),
        ln_phi: Vec::new(),
        a_max: Vec::new(),
        empty_min: Vec::new(),
        ln_threshold: (n as f64).ln() + d as f64 / 4.0,
    };
    let mut sample = |t: usize, hist: &[usize]| {
        let top = hist.iter().rposition(|&c| c > 0).unwrap_or(0);
        out.timestamps.push(t);
        out.ln_phi.push(ln_phi(hist));
        out.a_max.push(top);
        out.empty_min.push(d - top);
    };
    sample(0, &hist);
    let total = trace.balls.len();
    for (i, b) in trace.balls.iter().enumerate() {
        let v = b.chosen;
        if loads[v] == 0 {
            for &u in g.neighbors(v) {
                hist[a[u]] -= 1;
                a[u] += 1;
                hist[a[u]] += 1;
            }
        }
        loads[v] += 1;
        let t = i + 1;
        if t % step == 0 || t == total {
            sample(t, &hist);
        }
    }
    out
}

/// `min_u` of the number of empty nodes in `N(u)` after `t` balls.
pub fn empty_neighborhood_min(trace: &AllocationTrace, g: &RegularGraph, t: usize) -> usize {
    let loads = trace.loads_at(t);
    (0..g.n())
        .map(|u| g.neighbors(u).iter().filter(|&&v| loads[v] == 0).count())
        .min()
        .unwrap_or(0)
}

/// One row of a metrics CSV: `run,metric,t,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run: String,
    pub metric: String,
    pub t: usize,
    pub value: f64,
}

impl MetricRow {
    pub fn new(run: impl Into<String>, metric: impl Into<String>, t: usize, value: f64) -> Self {
        MetricRow {
            run: run.into(),
            metric: metric.into(),
            t,
            value,
        }
    }
}

pub const METRICS_HEADER: &str = "run,metric,t,value";

pub fn write_metrics_csv(rows: &[MetricRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::with_capacity(rows.len() * 32);
    buf.push_str(METRICS_HEADER);
    buf.push('\n');
    for r in rows {
        for field in [&r.run, &r.metric] {
            if field.contains([',', '\n', '"']) {
                return Err(Error::Config(format!("metric field {field:?} contains a delimiter")));
            }
        }
        buf.push_str(&format!("{},{},{},{}\n", r.run, r.metric, r.t, r.value));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => return Err(perr(1, "expected header run,metric,t,value")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(perr(i + 1, "expected 4 fields"));
        }
        let t = f[2].parse().map_err(|_| perr(i + 1, "bad t"))?;
        let value = f[3].parse().map_err(|_| perr(i + 1, "bad value"))?;
        rows.push(MetricRow::new(f[0], f[1], t, value));
    }
    Ok(rows)
}
