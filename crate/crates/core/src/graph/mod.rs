//! Regular graphs: construction, validation, girth.

mod fixtures;
mod generate;
mod io;

use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DerivedParams, Mode};

pub use fixtures::{fixture_names, load_fixture};
pub use generate::{generate_random_regular, moore_bound};
pub use io::{edge_list_string, read_edge_list, write_edge_list};

pub type NodeId = usize;

/// Girth reported for acyclic graphs. A finite graph with minimum degree two
/// always has a cycle, so this never comes back from a valid [`RegularGraph`].
pub const INFINITE_GIRTH: usize = usize::MAX;

/// An immutable simple `d`-regular graph on nodes `0..n`.
///
/// Adjacency is stored as one flat array of `n * d` entries; the neighbors of
/// each node are sorted, which lets the walker skip the predecessor by index.
pub struct RegularGraph {
    n: usize,
    d: usize,
    adj: Vec<NodeId>,
    girth: OnceLock<usize>,
}

impl RegularGraph {
    /// Builds a graph from per-node neighbor lists, validating regularity,
    /// symmetry, and simplicity.
    pub fn from_adjacency(lists: Vec<Vec<NodeId>>) -> Result<Self> {
        let n = lists.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        let d = lists[0].len();
        if d < 2 {
            return Err(Error::InvalidGraph(format!("degree must be at least 2, got {d}")));
        }
        let mut adj = Vec::with_capacity(n * d);
        for (u, mut nbrs) in lists.into_iter().enumerate() {
            if nbrs.len() != d {
                return Err(Error::InvalidGraph(format!(
                    "node {u} has degree {} but node 0 has degree {d}",
                    nbrs.len()
                )));
            }
            nbrs.sort_unstable();
            for w in nbrs.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InvalidGraph(format!("parallel edge {u}-{}", w[0])));
                }
            }
            for &v in &nbrs {
                if v >= n {
                    return Err(Error::InvalidGraph(format!(
                        "node {u} lists neighbor {v} outside 0..{n}"
                    )));
                }
                if v == u {
                    return Err(Error::InvalidGraph(format!("self-loop at {u}")));
                }
            }
            adj.extend(nbrs);
        }
        let g = RegularGraph {
            n,
            d,
            adj,
            girth: OnceLock::new(),
        };
        for u in 0..n {
            for &v in g.neighbors(u) {
                if !g.has_edge(v, u) {
                    return Err(Error::InvalidGraph(format!("edge {u}-{v} is not symmetric")));
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from an undirected edge list where each edge appears once.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge {u}-{v} outside 0..{n}")));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        Self::from_adjacency(lists)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.d / 2
    }

    /// Sorted neighbors of `u`.
    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adj[u * self.d..(u + 1) * self.d]
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Length of the shortest cycle. Computed once and cached.
    pub fn girth(&self) -> usize {
        *self.girth.get_or_init(|| compute_girth(self))
    }

    pub fn cached_girth(&self) -> Option<usize> {
        self.girth.get().copied()
    }
}

impl Clone for RegularGraph {
    fn clone(&self) -> Self {
        let girth = OnceLock::new();
        if let Some(&g) = self.girth.get() {
            let _ = girth.set(g);
        }
        RegularGraph {
            n: self.n,
            d: self.d,
            adj: self.adj.clone(),
            girth,
        }
    }
}

impl PartialEq for RegularGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d && self.adj == other.adj
    }
}

impl Eq for RegularGraph {}

impl fmt::Debug for RegularGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegularGraph")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("girth", &self.girth.get())
            .finish()
    }
}

/// Computes the girth from scratch, bypassing the cache.
pub fn girth(g: &RegularGraph) -> usize {
    compute_girth(g)
}

struct BfsScratch {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    parent: Vec<NodeId>,
    epoch: u32,
    queue: VecDeque<NodeId>,
}

impl BfsScratch {
    fn new(n: usize) -> Self {
        BfsScratch {
            stamp: vec![0; n],
            dist: vec![0; n],
            parent: vec![0; n],
            epoch: 0,
            queue: VecDeque::new(),
        }
    }

    /// Shortest cycle seen from `root`, ignoring cycles of length `>= best`.
    fn shortest_from(&mut self, g: &RegularGraph, root: NodeId, best: usize) -> usize {
        self.epoch += 1;
        let epoch = self.epoch;
        self.queue.clear();
        self.stamp[root] = epoch;
        self.dist[root] = 0;
        self.parent[root] = root;
        self.queue.push_back(root);
        let mut found = best;
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u] as usize;
            // Non-tree edges out of u close walks of length at least 2*du.
            if 2 * du >= found {
                break;
            }
            for &v in g.neighbors(u) {
                if self.stamp[v] != epoch {
                    self.stamp[v] = epoch;
                    self.dist[v] = du as u32 + 1;
                    self.parent[v] = u;
                    self.queue.push_back(v);
                } else if self.parent[u] != v {
                    found = found.min(du + self.dist[v] as usize + 1);
                }
            }
        }
        found
    }
}

fn compute_girth(g: &RegularGraph) -> usize {
    let best = AtomicUsize::new(INFINITE_GIRTH);
    (0..g.n).into_par_iter().for_each_init(
        || BfsScratch::new(g.n),
        |scratch, root| {
            let current = best.load(Ordering::Relaxed);
            if current == 3 {
                return;
            }
            let found = scratch.shortest_from(g, root, current);
            best.fetch_min(found, Ordering::Relaxed);
        },
    );
    best.into_inner()
}

/// Where a graph comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphKind {
    RandomRegular,
    Fixture { name: String },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub kind: GraphKind,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub min_girth: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl GraphSpec {
    pub fn random(n: usize, d: usize, seed: u64) -> Self {
        GraphSpec {
            kind: GraphKind::RandomRegular,
            n,
            d,
            min_girth: None,
            seed,
        }
    }

    pub fn with_min_girth(mut self, girth: usize) -> Self {
        self.min_girth = Some(girth);
        self
    }

    pub fn fixture(name: &str) -> Self {
        GraphSpec {
            kind: GraphKind::Fixture { name: name.into() },
            n: 0,
            d: 0,
            min_girth: None,
            seed: 0,
        }
    }

    pub fn build(&self) -> Result<RegularGraph> {
        match &self.kind {
            GraphKind::RandomRegular => generate_random_regular(self),
            GraphKind::Fixture { name } => load_fixture(name),
            GraphKind::File { path } => read_edge_list(path),
        }
    }
}

/// Whether a graph satisfies the girth hypotheses of the analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GirthReport {
    pub girth: usize,
    pub mode: Mode,
    /// `10 h l` (dense) or `10 h l r_G` (sparse).
    pub hypothesis_bound: f64,
    pub hypothesis_holds: bool,
    /// Walk length in edges; walks are simple paths iff girth exceeds it.
    pub walk_length: usize,
    pub walks_are_paths: bool,
    /// The other girth requirements stated for the process, for the record:
    /// `10 l ln ln n` and `10 l (ln ln n)^2`.
    pub alternative_bounds: Vec<(String, f64, bool)>,
}

/// Annotates whether `g` meets the girth hypotheses for `p`. Never fails.
pub fn check_girth_condition(g: &RegularGraph, p: &DerivedParams, mode: Mode) -> GirthReport {
    let girth = g.girth();
    let spacing = match mode {
        Mode::Dense => 1,
        Mode::Sparse => p.r_g,
    };
    let hypothesis_bound = (10 * p.h * p.l * spacing) as f64;
    let walk_length = p.l * spacing;
    let lnln = (p.n as f64).ln().ln();
    let alt = |name: &str, bound: f64| (name.to_string(), bound, girth as f64 >= bound);
    GirthReport {
        girth,
        mode,
        hypothesis_bound,
        hypothesis_holds: girth as f64 >= hypothesis_bound,
        walk_length,
        walks_are_paths: girth > walk_length,
        alternative_bounds: vec![
            alt("10*l*lnln(n)", 10.0 * p.l as f64 * lnln),
            alt("10*l*lnln(n)^2", 10.0 * p.l as f64 * lnln * lnln),
        ],
    }
}
