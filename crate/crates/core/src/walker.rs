//! Non-backtracking random walks and the choice sets built from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, RegularGraph};
use crate::params::Mode;

/// Node sequence `u_0 .. u_L` of a walk with `L` edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Walk {
    nodes: Vec<NodeId>,
}

impl Walk {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        Walk { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<NodeId> {
        self.nodes
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distinct visited nodes, sorted.
    pub fn as_set(&self) -> Vec<NodeId> {
        let mut s = self.nodes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// True when no node repeats.
    pub fn is_path(&self) -> bool {
        self.as_set().len() == self.nodes.len()
    }

    /// Whether consecutive nodes are adjacent in `g` and the walk never
    /// immediately reverses an edge.
    pub fn is_valid_in(&self, g: &RegularGraph) -> bool {
        is_nonbacktracking(g, &self.nodes)
    }
}

pub(crate) fn is_nonbacktracking(g: &RegularGraph, nodes: &[NodeId]) -> bool {
    nodes.iter().all(|&u| u < g.n())
        && nodes.windows(2).all(|w| g.has_edge(w[0], w[1]))
        && nodes.windows(3).all(|w| w[0] != w[2])
}

/// Samples a non-backtracking walk of `length` edges into `out`.
///
/// `u_0` is uniform over nodes, `u_1` uniform over the `d` neighbors of `u_0`,
/// and each later step uniform over the `d - 1` neighbors other than the
/// predecessor. The predecessor is skipped by index in the sorted adjacency,
/// so no draw is ever rejected.
pub fn sample_nbrw_into<R: Rng + ?Sized>(
    g: &RegularGraph,
    length: usize,
    rng: &mut R,
    out: &mut Vec<NodeId>,
) -> Result<()> {
    if length < 1 {
        return Err(Error::WalkTooShort);
    }
    out.clear();
    let d = g.d();
    let u0 = rng.gen_range(0..g.n());
    let u1 = g.neighbors(u0)[rng.gen_range(0..d)];
    out.push(u0);
    out.push(u1);
    for i in 1..length {
        let (prev, cur) = (out[i - 1], out[i]);
        let nbrs = g.neighbors(cur);
        let skip = nbrs.binary_search(&prev).expect("predecessor is a neighbor");
        let mut j = rng.gen_range(0..d - 1);
        if j >= skip {
            j += 1;
        }
        out.push(nbrs[j]);
    }
    debug_assert!(is_nonbacktracking(g, out));
    Ok(())
}

pub fn sample_nbrw<R: Rng + ?Sized>(g: &RegularGraph, length: usize, rng: &mut R) -> Result<Walk> {
    let mut nodes = Vec::with_capacity(length + 1);
    sample_nbrw_into(g, length, rng, &mut nodes)?;
    Ok(Walk { nodes })
}

/// A ball's candidate bins: every `spacing`-th node of its walk, from `u_0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceSet {
    pub walk: Walk,
    /// Positions in `walk` that are candidates.
    pub indices: Vec<usize>,
    pub mode: Mode,
    pub spacing: usize,
}

impl ChoiceSet {
    pub fn from_walk(walk: Walk, mode: Mode, spacing: usize) -> Self {
        let spacing = spacing.max(1);
        let indices = (0..=walk.len()).step_by(spacing).collect();
        ChoiceSet {
            walk,
            indices,
            mode,
            spacing,
        }
    }

    pub fn choices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.indices.iter().map(|&i| self.walk.nodes()[i])
    }
}

/// Samples a walk of `l` edges (dense) or `l * r_g` edges (sparse) and selects
/// its `l + 1` candidate positions.
pub fn make_choice_set<R: Rng + ?Sized>(
    g: &RegularGraph,
    l: usize,
    mode: Mode,
    r_g: usize,
    rng: &mut R,
) -> Result<ChoiceSet> {
    let spacing = match mode {
        Mode::Dense => 1,
        Mode::Sparse => r_g.max(1),
    };
    let walk = sample_nbrw(g, l * spacing, rng)?;
    Ok(ChoiceSet::from_walk(walk, mode, spacing))
}

/// Empirical visit frequencies of sampled walks.
#[derive(Debug, Clone)]
pub struct VisitStats {
    pub trials: usize,
    pub length: usize,
    /// `position_freq[i][v]`: fraction of walks with `u_i = v`.
    pub position_freq: Vec<Vec<f64>>,
    /// `inclusion_freq[v]`: fraction of walks visiting `v` at all.
    pub inclusion_freq: Vec<f64>,
    /// `max |position_freq - 1/n|`.
    pub max_position_deviation: f64,
    /// `max |inclusion_freq - (l+1)/n|`.
    pub max_inclusion_deviation: f64,
    /// Set when `girth <= l`, where the exact visit law need not hold.
    pub girth_warning: bool,
}

pub fn walk_visit_stats<R: Rng + ?Sized>(g: &RegularGraph, l: usize, trials: usize, rng: &mut R) -> Result<VisitStats> {
    if l < 1 {
        return Err(Error::WalkTooShort);
    }
    let n = g.n();
    let mut pos = vec![vec![0u64; n]; l + 1];
    let mut incl = vec![0u64; n];
    let mut buf = Vec::with_capacity(l + 1);
    let mut seen: Vec<NodeId> = Vec::with_capacity(l + 1);
    for _ in 0..trials {
        sample_nbrw_into(g, l, rng, &mut buf)?;
        seen.clear();
        for (i, &v) in buf.iter().enumerate() {
            pos[i][v] += 1;
            if !seen.contains(&v) {
                seen.push(v);
                incl[v] += 1;
            }
        }
    }
    let t = trials.max(1) as f64;
    let position_freq: Vec<Vec<f64>> = pos
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / t).collect())
        .collect();
    let inclusion_freq: Vec<f64> = incl.iter().map(|&c| c as f64 / t).collect();
    let uniform = 1.0 / n as f64;
    let max_position_deviation = position_freq
        .iter()
        .flatten()
        .map(|f| (f - uniform).abs())
        .fold(0.0, f64::max);
    let expected_incl = (l + 1) as f64 / n as f64;
    let max_inclusion_deviation = inclusion_freq
        .iter()
        .map(|f| (f - expected_incl).abs())
        .fold(0.0, f64::max);
    Ok(VisitStats {
        trials,
        length: l,
        position_freq,
        inclusion_freq,
        max_position_deviation,
        max_inclusion_deviation,
        girth_warning: g.girth() <= l,
    })
}
