//! Witness trees.
//!
//! Starting from a heavily loaded node, the builder takes the walk of the ball
//! that reached the threshold height as the root, cuts it into `k` subpaths
//! and, for each, looks for another chosen walk that meets the parent only
//! inside that subpath (C1) and is not much less loaded (C2). Level 1
//! branches every subpath of the root; deeper levels branch `k - 2` subpaths
//! that avoid the walk's own parent. The verifier rechecks a finished tree
//! from scratch against the trace.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::allocator::AllocationTrace;
use crate::error::{Error, Result};
use crate::graph::{NodeId, RegularGraph};
use crate::params::DerivedParams;
use crate::walker::is_nonbacktracking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub k: usize,
    pub rho: usize,
    pub h: usize,
    /// Margin used by the middle-segment variant of C1.
    pub delta: usize,
}

impl WitnessParams {
    pub fn from_params(p: &DerivedParams) -> std::result::Result<Self, WitnessFailure> {
        match p.rho {
            Some(rho) if !p.degenerate && p.delta >= 1 => Ok(WitnessParams {
                k: p.k,
                rho,
                h: p.h,
                delta: p.delta,
            }),
            _ => Err(WitnessFailure::DegenerateParams),
        }
    }

    /// `1 + k sum_{j<h} (k-2)^j`.
    pub fn lambda(&self) -> usize {
        1 + (0..self.h).map(|j| self.k * (self.k - 2).pow(j as u32)).sum::<usize>()
    }

    /// `(len+1) k (k-2)^(h-1)` for walks with `len` edges.
    pub fn mu(&self, len: usize) -> usize {
        (len + 1) * self.level_size(self.h)
    }

    /// `k (k-2)^(j-1)`.
    pub fn level_size(&self, j: usize) -> usize {
        if j == 0 {
            1
        } else {
            self.k * (self.k - 2).pow(j as u32 - 1)
        }
    }

    pub fn root_height(&self, c: usize) -> usize {
        self.h * self.rho + c
    }
}

/// Which load vector `f(W)` reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "at", content = "t")]
pub enum LoadTime {
    /// Loads after the whole trace.
    #[default]
    Final,
    /// Loads after the first `t` balls; only those balls are candidates.
    Prefix(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessOptions {
    pub load_time: LoadTime,
    /// Require the intersection to avoid `delta` nodes at each end of the
    /// subpath, not only its endpoints.
    pub middle_segment_only: bool,
    /// Root node; defaults to the most loaded node with the lowest id.
    pub start_node: Option<NodeId>,
}

/// A walk cut into `k` consecutive subpaths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubpathPartition {
    /// Walk indices of `u_0 .. u_k`.
    pub cuts: Vec<usize>,
}

impl SubpathPartition {
    pub fn k(&self) -> usize {
        self.cuts.len() - 1
    }

    /// Walk-index interval `[a, b]` of subpath `i`.
    pub fn interval(&self, i: usize) -> (usize, usize) {
        (self.cuts[i], self.cuts[i + 1])
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.cuts.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Splits a walk with `len` edges into `k` subpaths. The `len mod k` longer
/// subpaths come first.
pub fn partition(len: usize, k: usize) -> Result<SubpathPartition> {
    if k < 4 {
        return Err(Error::Config(format!("partition needs k >= 4, got {k}")));
    }
    if len < k {
        return Err(Error::Config(format!(
            "walk of length {len} cannot be cut into {k} subpaths"
        )));
    }
    let (q, r) = (len / k, len % k);
    let mut cuts = Vec::with_capacity(k + 1);
    let mut at = 0;
    cuts.push(0);
    for i in 0..k {
        at += if i < r { q + 1 } else { q };
        cuts.push(at);
    }
    Ok(SubpathPartition { cuts })
}

/// Nodes a child may share with its parent when branching on `[a, b]`.
fn allowed_interior(walk: &[NodeId], (a, b): (usize, usize), margin: usize) -> &[NodeId] {
    let lo = a + margin.max(1);
    let hi = b.saturating_sub(margin.max(1));
    if lo > hi {
        &[]
    } else {
        &walk[lo..=hi]
    }
}

/// (C1): the candidate meets the parent, and only inside the allowed segment
/// of the subpath (never at an endpoint, even if it recurs there).
fn condition_c1(parent: &[NodeId], interval: (usize, usize), margin: usize, cand: &[NodeId]) -> bool {
    let allowed = allowed_interior(parent, interval, margin);
    let (a, b) = interval;
    let mut met = false;
    for v in cand {
        if parent.contains(v) {
            if !allowed.contains(v) || *v == parent[a] || *v == parent[b] {
                return false;
            }
            met = true;
        }
    }
    met
}

/// `f(W)`: the load of a least loaded node of `W`.
fn f(loads: &[usize], walk: &[NodeId]) -> usize {
    walk.iter().map(|&v| loads[v]).min().unwrap_or(0)
}

/// Subpath indices of `walk` sharing no node with `father`.
pub fn free_subpaths(part: &SubpathPartition, walk: &[NodeId], father: &[NodeId]) -> Vec<usize> {
    (0..part.k())
        .filter(|&i| {
            let (a, b) = part.interval(i);
            walk[a..=b].iter().all(|v| !father.contains(v))
        })
        .collect()
}

/// One non-root walk of the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub ball: usize,
    pub parent: usize,
    pub subpath: usize,
    /// Walk-index interval of the parent's subpath.
    pub interval: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessTree {
    pub root: usize,
    pub root_node: NodeId,
    pub params: WitnessParams,
    pub c: usize,
    pub load_time: LoadTime,
    pub middle_segment_only: bool,
    /// `levels[j - 1]` is level `j`.
    pub levels: Vec<Vec<WitnessEntry>>,
    pub lambda: usize,
    pub mu: usize,
}

impl WitnessTree {
    pub fn balls(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.root).chain(self.levels.iter().flatten().map(|e| e.ball))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum WitnessFailure {
    ThresholdNotMet {
        node: NodeId,
        load: usize,
        required: usize,
    },
    DegenerateParams,
    LightTrace,
    RootMissing {
        node: NodeId,
        height: usize,
    },
    WalkTooShort {
        ball: usize,
        length: usize,
        k: usize,
    },
    NoCandidate {
        level: usize,
        parent: usize,
        subpath: usize,
    },
    TooFewFreeSubpaths {
        level: usize,
        parent: usize,
        free: usize,
        needed: usize,
    },
    StructureViolated {
        violations: Vec<Violation>,
    },
}

impl fmt::Display for WitnessFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WitnessFailure::*;
        match self {
            ThresholdNotMet { node, load, required } => {
                write!(f, "threshold not met: node {node} has load {load}, needs {required}")
            }
            DegenerateParams => write!(f, "degenerate parameters (delta < 1)"),
            LightTrace => write!(f, "trace has no walks"),
            RootMissing { node, height } => write!(f, "no ball at height {height} on node {node}"),
            WalkTooShort { ball, length, k } => {
                write!(f, "walk of ball {ball} has length {length} < k = {k}")
            }
            NoCandidate { level, parent, subpath } => write!(
                f,
                "no branch candidate at level {level} for ball {parent}, subpath {subpath}"
            ),
            TooFewFreeSubpaths {
                level,
                parent,
                free,
                needed,
            } => write!(
                f,
                "ball {parent} at level {level} has {free} free subpaths, needs {needed}"
            ),
            StructureViolated { violations } => {
                write!(f, "built tree fails verification: {} violations", violations.len())
            }
        }
    }
}

impl std::error::Error for WitnessFailure {}

fn loads_for(trace: &AllocationTrace, at: LoadTime) -> (Vec<usize>, usize) {
    match at {
        LoadTime::Final => (trace.loads.clone(), trace.balls.len()),
        LoadTime::Prefix(t) => {
            let t = t.min(trace.balls.len());
            (trace.loads_at(t), t)
        }
    }
}

/// Union-find over node ids seen so far.
#[derive(Clone, Default)]
struct Forest {
    parent: HashMap<NodeId, NodeId>,
}

impl Forest {
    fn find(&mut self, u: NodeId) -> NodeId {
        let p = *self.parent.entry(u).or_insert(u);
        if p == u {
            return u;
        }
        let r = self.find(p);
        self.parent.insert(u, r);
        r
    }

    /// Adds the edges of `walk` that are not in `edges`; false on a cycle.
    fn add_walk(&mut self, edges: &mut BTreeSet<(NodeId, NodeId)>, walk: &[NodeId]) -> bool {
        for w in walk.windows(2) {
            let e = (w[0].min(w[1]), w[0].max(w[1]));
            if !edges.insert(e) {
                continue;
            }
            let (a, b) = (self.find(e.0), self.find(e.1));
            if a == b {
                return false;
            }
            self.parent.insert(a, b);
        }
        true
    }
}

struct Builder<'a> {
    trace: &'a AllocationTrace,
    loads: Vec<usize>,
    horizon: usize,
    margin: usize,
    rho: usize,
    /// Balls whose walk visits each node, ascending.
    visits: HashMap<NodeId, Vec<usize>>,
    in_tree: BTreeSet<usize>,
    /// Tree balls covering each node.
    owners: HashMap<NodeId, Vec<usize>>,
    forest: Forest,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl<'a> Builder<'a> {
    fn walk(&self, ball: usize) -> &'a [NodeId] {
        &self.trace.balls[ball].walk
    }

    fn add(&mut self, ball: usize) {
        let walk = self.walk(ball);
        self.in_tree.insert(ball);
        for &v in walk {
            let o = self.owners.entry(v).or_default();
            if !o.contains(&ball) {
                o.push(ball);
            }
        }
        let ok = self.forest.add_walk(&mut self.edges, walk);
        debug_assert!(ok);
    }

    /// First admissible candidate by ball index for subpath `interval` of
    /// `parent`.
    fn branch(&self, parent: usize, interval: (usize, usize)) -> Option<usize> {
        let pw = self.walk(parent);
        let fp = f(&self.loads, pw);
        let mut cands = BTreeSet::new();
        for v in allowed_interior(pw, interval, self.margin) {
            if let Some(bs) = self.visits.get(v) {
                cands.extend(bs.iter().copied().filter(|&b| b < self.horizon));
            }
        }
        cands.into_iter().find(|&b| {
            if self.in_tree.contains(&b) {
                return false;
            }
            let w = self.walk(b);
            condition_c1(pw, interval, self.margin, w)
                && f(&self.loads, w) + self.rho >= fp
                && self.keeps_tree(parent, w)
        })
    }

    /// The candidate touches no tree walk but its parent, and the union stays
    /// a forest.
    fn keeps_tree(&self, parent: usize, w: &[NodeId]) -> bool {
        let only_parent = w.iter().all(|v| match self.owners.get(v) {
            None => true,
            Some(o) => o.len() == 1 && o[0] == parent,
        });
        if !only_parent {
            return false;
        }
        let mut forest = self.forest.clone();
        let mut edges = self.edges.clone();
        forest.add_walk(&mut edges, w)
    }
}

/// Builds a `c`-loaded witness tree rooted at a node carrying more than
/// `h rho + c` balls.
pub fn build_witness(
    trace: &AllocationTrace,
    g: Option<&RegularGraph>,
    params: WitnessParams,
    c: usize,
    opts: WitnessOptions,
) -> std::result::Result<WitnessTree, WitnessFailure> {
    if trace.light {
        return Err(WitnessFailure::LightTrace);
    }
    if params.k < 4 || params.h < 1 || (opts.middle_segment_only && params.delta < 1) {
        return Err(WitnessFailure::DegenerateParams);
    }
    let (loads, horizon) = loads_for(trace, opts.load_time);
    let start = match opts.start_node {
        Some(u) => u,
        None => {
            let max = loads.iter().copied().max().unwrap_or(0);
            loads.iter().position(|&l| l == max).unwrap_or(0)
        }
    };
    let required = params.root_height(c) + 1;
    let load = loads.get(start).copied().unwrap_or(0);
    if load < required {
        return Err(WitnessFailure::ThresholdNotMet {
            node: start,
            load,
            required,
        });
    }
    let root = trace.balls[..horizon]
        .iter()
        .position(|b| b.chosen == start && b.height == params.root_height(c))
        .ok_or(WitnessFailure::RootMissing {
            node: start,
            height: params.root_height(c),
        })?;

    let mut visits: HashMap<NodeId, Vec<usize>> = HashMap::new();
    for (i, b) in trace.balls[..horizon].iter().enumerate() {
        for &v in &b.walk {
            let e = visits.entry(v).or_default();
            if e.last() != Some(&i) {
                e.push(i);
            }
        }
    }
    let mut bld = Builder {
        trace,
        loads,
        horizon,
        margin: if opts.middle_segment_only { params.delta } else { 1 },
        rho: params.rho,
        visits,
        in_tree: BTreeSet::new(),
        owners: HashMap::new(),
        forest: Forest::default(),
        edges: BTreeSet::new(),
    };
    let root_walk = bld.walk(root);
    if !bld.forest.clone().add_walk(&mut BTreeSet::new(), root_walk) {
        // A root that is not a path can never head an acyclic union.
        return Err(WitnessFailure::StructureViolated {
            violations: vec![Violation::new(ViolationClass::Cycle, "root walk repeats a node")],
        });
    }
    bld.add(root);

    let mut levels: Vec<Vec<WitnessEntry>> = Vec::with_capacity(params.h);
    let mut father_of: HashMap<usize, usize> = HashMap::new();
    for level in 1..=params.h {
        let parents: Vec<usize> = if level == 1 {
            vec![root]
        } else {
            levels[level - 2].iter().map(|e| e.ball).collect()
        };
        let mut entries = Vec::new();
        for parent in parents {
            let pw = bld.walk(parent);
            let len = pw.len().saturating_sub(1);
            let part = partition(len, params.k).map_err(|_| WitnessFailure::WalkTooShort {
                ball: parent,
                length: len,
                k: params.k,
            })?;
            let subpaths: Vec<usize> = if level == 1 {
                (0..params.k).collect()
            } else {
                let father = bld.walk(father_of[&parent]);
                let free = free_subpaths(&part, pw, father);
                if free.len() < params.k - 2 {
                    return Err(WitnessFailure::TooFewFreeSubpaths {
                        level,
                        parent,
                        free: free.len(),
                        needed: params.k - 2,
                    });
                }
                free.into_iter().take(params.k - 2).collect()
            };
            for i in subpaths {
                let interval = part.interval(i);
                let child = bld.branch(parent, interval).ok_or(WitnessFailure::NoCandidate {
                    level,
                    parent,
                    subpath: i,
                })?;
                bld.add(child);
                father_of.insert(child, parent);
                entries.push(WitnessEntry {
                    ball: child,
                    parent,
                    subpath: i,
                    interval,
                });
            }
        }
        levels.push(entries);
    }

    let mu = bld.owners.len();
    let tree = WitnessTree {
        root,
        root_node: start,
        params,
        c,
        load_time: opts.load_time,
        middle_segment_only: opts.middle_segment_only,
        levels,
        lambda: bld.in_tree.len(),
        mu,
    };
    let report = verify_witness_tree(&tree, trace, g, c);
    if report.ok() {
        Ok(tree)
    } else {
        Err(WitnessFailure::StructureViolated {
            violations: report.violations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationClass {
    UnknownBall,
    InvalidWalk,
    Root,
    LevelSize,
    LevelOverlap,
    ParentIntersection,
    Subpath,
    ConditionC1,
    ConditionC2,
    Cycle,
    Lambda,
    Mu,
    LoadFloor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub class: ViolationClass,
    pub detail: String,
}

impl Violation {
    fn new(class: ViolationClass, detail: impl Into<String>) -> Self {
        Violation {
            class,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifyReport {
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, class: ViolationClass) -> bool {
        self.violations.iter().any(|v| v.class == class)
    }

    fn push(&mut self, class: ViolationClass, detail: impl Into<String>) {
        self.violations.push(Violation::new(class, detail));
    }
}

/// Rechecks every structural claim of `tree` against `trace`. The load floor
/// is the larger of `c` and the tree's own `c`.
pub fn verify_witness_tree(
    tree: &WitnessTree,
    trace: &AllocationTrace,
    g: Option<&RegularGraph>,
    c: usize,
) -> VerifyReport {
    use ViolationClass::*;
    let mut rep = VerifyReport::default();
    let p = tree.params;
    let walk_of =
        |b: usize| -> Option<&[NodeId]> { trace.balls.get(b).map(|r| r.walk.as_slice()).filter(|w| !w.is_empty()) };

    let mut known = true;
    for b in tree.balls() {
        match walk_of(b) {
            None => {
                rep.push(UnknownBall, format!("ball {b} is not in the trace or has no walk"));
                known = false;
            }
            Some(w) => {
                if let Some(g) = g {
                    if !is_nonbacktracking(g, w) {
                        rep.push(InvalidWalk, format!("walk of ball {b} is not a walk in the graph"));
                    }
                }
            }
        }
    }
    if p.k < 4 {
        rep.push(Subpath, format!("k = {} is below 4", p.k));
    }
    if tree.levels.len() != p.h {
        rep.push(LevelSize, format!("{} levels, expected h = {}", tree.levels.len(), p.h));
    }
    for (j, level) in tree.levels.iter().enumerate() {
        let expect = p.level_size(j + 1);
        if level.len() != expect {
            rep.push(
                LevelSize,
                format!("level {} has {} walks, expected {expect}", j + 1, level.len()),
            );
        }
    }
    let expect_lambda = p.lambda();
    let actual_lambda = 1 + tree.levels.iter().map(Vec::len).sum::<usize>();
    if tree.lambda != expect_lambda || tree.lambda != actual_lambda {
        rep.push(
            Lambda,
            format!(
                "lambda {} but formula gives {expect_lambda} and the tree has {actual_lambda}",
                tree.lambda
            ),
        );
    }
    if !known {
        return rep;
    }

    let (loads, horizon) = loads_for(trace, tree.load_time);
    let root = &trace.balls[tree.root];
    if root.chosen != tree.root_node || root.height != p.root_height(tree.c) || tree.root >= horizon {
        rep.push(
            Root,
            format!(
                "root ball {} landed on {} at height {}, claimed node {} at height {}",
                tree.root,
                root.chosen,
                root.height,
                tree.root_node,
                p.root_height(tree.c)
            ),
        );
    }

    let margin = if tree.middle_segment_only { p.delta } else { 1 };
    // Each ball's parent, for the grandparent lookups of the free rule.
    let mut parent_of: HashMap<usize, usize> = HashMap::new();
    let mut prev_level: Vec<usize> = vec![tree.root];
    let mut earlier: Vec<usize> = vec![tree.root];
    let mut forest = Forest::default();
    let mut edges = BTreeSet::new();
    let mut cyclic = !forest.add_walk(&mut edges, walk_of(tree.root).unwrap());
    if cyclic {
        rep.push(Cycle, "root walk contains a cycle");
    }
    for (j, level) in tree.levels.iter().enumerate() {
        let lvl = j + 1;
        let mut per_parent: HashMap<usize, Vec<usize>> = HashMap::new();
        for (idx, e) in level.iter().enumerate() {
            let w = walk_of(e.ball).unwrap();
            if e.ball >= horizon {
                rep.push(ConditionC2, format!("ball {} lies beyond the load horizon", e.ball));
            }
            if !prev_level.contains(&e.parent) {
                rep.push(
                    ParentIntersection,
                    format!("parent {} of ball {} is not on level {}", e.parent, e.ball, lvl - 1),
                );
                continue;
            }
            per_parent.entry(e.parent).or_default().push(e.subpath);
            let pw = walk_of(e.parent).unwrap();
            match partition(pw.len() - 1, p.k) {
                Ok(part) if e.subpath < p.k => {
                    if part.interval(e.subpath) != e.interval {
                        rep.push(
                            Subpath,
                            format!(
                                "ball {}: interval {:?} is not subpath {} of its parent",
                                e.ball, e.interval, e.subpath
                            ),
                        );
                    }
                    if lvl >= 2 {
                        let father = walk_of(parent_of[&e.parent]).unwrap();
                        if !free_subpaths(&part, pw, father).contains(&e.subpath) {
                            rep.push(Subpath, format!("ball {}: subpath {} is not free", e.ball, e.subpath));
                        }
                    }
                }
                _ => rep.push(
                    Subpath,
                    format!("ball {}: subpath {} does not exist", e.ball, e.subpath),
                ),
            }
            let interval_ok = e.interval.0 < e.interval.1 && e.interval.1 < pw.len();
            if !interval_ok || !condition_c1(pw, e.interval, margin, w) {
                rep.push(ConditionC1, format!("ball {} violates C1 against {}", e.ball, e.parent));
            }
            if f(&loads, w) + p.rho < f(&loads, pw) {
                rep.push(
                    ConditionC2,
                    format!(
                        "f(ball {}) = {} < f(parent) - rho = {} - {}",
                        e.ball,
                        f(&loads, w),
                        f(&loads, pw),
                        p.rho
                    ),
                );
            }
            for other in &level[..idx] {
                let ow = walk_of(other.ball).unwrap();
                if other.ball == e.ball || w.iter().any(|v| ow.contains(v)) {
                    rep.push(
                        LevelOverlap,
                        format!("balls {} and {} on level {lvl} intersect", other.ball, e.ball),
                    );
                }
            }
            for &b in &earlier {
                if b != e.parent && w.iter().any(|v| walk_of(b).unwrap().contains(v)) {
                    rep.push(
                        ParentIntersection,
                        format!("ball {} meets {b}, which is not its parent", e.ball),
                    );
                }
            }
            parent_of.insert(e.ball, e.parent);
        }
        let per = if lvl == 1 { p.k } else { p.k.saturating_sub(2) };
        for (parent, subs) in &per_parent {
            let distinct: BTreeSet<_> = subs.iter().collect();
            if subs.len() != per || distinct.len() != subs.len() {
                rep.push(
                    LevelSize,
                    format!(
                        "ball {parent} has {} children on distinct subpaths, expected {per}",
                        distinct.len()
                    ),
                );
            }
        }
        for e in level {
            if !cyclic && !forest.add_walk(&mut edges, walk_of(e.ball).unwrap()) {
                rep.push(Cycle, format!("union of levels 0..={lvl} contains a cycle"));
                cyclic = true;
            }
        }
        prev_level = level.iter().map(|e| e.ball).collect();
        earlier.extend(prev_level.iter().copied());
    }

    let mut union = BTreeSet::new();
    for b in tree.balls() {
        union.extend(walk_of(b).unwrap().iter().copied());
    }
    let len = walk_of(tree.root).unwrap().len() - 1;
    if tree.mu != union.len() || union.len() < p.mu(len) {
        rep.push(
            Mu,
            format!(
                "mu {} but the union has {} nodes, formula needs {}",
                tree.mu,
                union.len(),
                p.mu(len)
            ),
        );
    }
    let floor = c.max(tree.c);
    if let Some(&v) = union.iter().find(|&&v| trace.loads[v] < floor) {
        rep.push(LoadFloor, format!("node {v} has load {} < {floor}", trace.loads[v]));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{BallRecord, Strategy};
    use crate::graph::load_fixture;
    use crate::params::{derive, Mode};

    fn trace_from_walks(g: &RegularGraph, l: usize, walks: &[Vec<NodeId>]) -> AllocationTrace {
        let mut tr = AllocationTrace::new(g, Strategy::NbrwDense { l }, 0);
        for (t, w) in walks.iter().enumerate() {
            let chosen = *w.iter().min_by_key(|&&u| tr.loads[u]).unwrap();
            let height = tr.loads[chosen];
            tr.loads[chosen] += 1;
            tr.balls.push(BallRecord {
                t,
                walk: w.clone(),
                choices: w.clone(),
                chosen,
                height,
            });
        }
        tr
    }

    #[test]
    fn partition_layouts() {
        assert_eq!(partition(16, 4).unwrap().lengths(), vec![4, 4, 4, 4]);
        assert_eq!(partition(18, 4).unwrap().lengths(), vec![5, 5, 4, 4]);
        assert_eq!(partition(8, 4).unwrap().cuts, vec![0, 2, 4, 6, 8]);
        assert!(partition(3, 4).is_err());
        assert!(partition(10, 3).is_err());
    }

    #[test]
    fn formulas() {
        let p = WitnessParams {
            k: 4,
            rho: 1,
            h: 1,
            delta: 1,
        };
        assert_eq!(p.lambda(), 5);
        assert_eq!(p.mu(8), 36);
        let p = WitnessParams {
            k: 8,
            rho: 150,
            h: 2,
            delta: 1,
        };
        assert_eq!(p.lambda(), 1 + 8 + 48);
        assert_eq!(p.level_size(2), 48);
        assert_eq!(p.mu(40), 41 * 48);
    }

    #[test]
    fn from_params_rejects_degenerate() {
        assert!(matches!(
            WitnessParams::from_params(&derive(1 << 20, 4, 10, Mode::Dense)),
            Err(WitnessFailure::DegenerateParams)
        ));
        let p = WitnessParams::from_params(&derive(1 << 50, 4, 40, Mode::Dense)).unwrap();
        assert_eq!((p.k, p.rho, p.h, p.delta), (8, 150, 2, 1));
    }

    #[test]
    fn c1_cases() {
        let parent = [0, 1, 2, 3, 4, 5, 6, 7, 8];
        assert!(condition_c1(&parent, (2, 4), 1, &[3, 20, 21]));
        assert!(!condition_c1(&parent, (2, 4), 1, &[2, 20, 21]), "endpoint");
        assert!(!condition_c1(&parent, (2, 4), 1, &[20, 21]), "disjoint");
        assert!(!condition_c1(&parent, (2, 4), 1, &[3, 20, 7]), "outside the subpath");
        assert!(!condition_c1(&parent, (2, 4), 2, &[3, 20]), "middle segment is empty");
    }

    #[test]
    fn free_subpath_count() {
        let part = partition(12, 4).unwrap();
        let walk: Vec<NodeId> = (0..13).collect();
        // The father meets the walk inside one subpath.
        assert_eq!(free_subpaths(&part, &walk, &[4, 100]), vec![0, 2, 3]);
        // At a cut node it touches two.
        assert_eq!(free_subpaths(&part, &walk, &[6, 100]), vec![0, 3]);
    }

    /// Plants a complete tree of walks on fresh node ids. Every walk is
    /// preceded by filler copies of itself so that level `j` has
    /// `f >= h rho + c - j rho`; the first copy after the fillers is the one
    /// the builder should pick.
    fn planted(k: usize, h: usize, l: usize, rho: usize, c: usize) -> (RegularGraph, AllocationTrace, WitnessParams) {
        let p = WitnessParams { k, rho, h, delta: 1 };
        let mut next = 0;
        let mut fresh = |count: usize| -> Vec<NodeId> {
            let v: Vec<NodeId> = (next..next + count).collect();
            next += count;
            v
        };
        let root = fresh(l + 1);
        let mut walks = vec![root.clone(); (l + 1) * p.root_height(c)];
        walks.push(root.clone());
        let part = partition(l, k).unwrap();
        // (walk, index of the node shared with its parent)
        let mut level = vec![(root, usize::MAX)];
        for j in 1..=h {
            let mut next_level = Vec::new();
            for (w, shared) in &level {
                let subs: Vec<usize> = if j == 1 {
                    (0..k).collect()
                } else {
                    (0..k)
                        .filter(|&i| {
                            let (a, b) = part.interval(i);
                            !(a..=b).contains(shared)
                        })
                        .take(k - 2)
                        .collect()
                };
                for i in subs {
                    let (a, _) = part.interval(i);
                    let mut child = vec![w[a + 1]];
                    child.extend(fresh(l));
                    let fill = (l + 1) * (p.root_height(c) - j * rho).max(1);
                    walks.extend(std::iter::repeat_n(child.clone(), fill));
                    next_level.push((child, 0));
                }
            }
            level = next_level;
        }
        let g = load_fixture(&format!("cycle({})", next.max(3))).unwrap();
        let tr = trace_from_walks(&g, l, &walks);
        (g, tr, p)
    }

    fn first_loaded_tree() -> (AllocationTrace, WitnessTree) {
        let (_, tr, p) = planted(4, 1, 8, 1, 1);
        let tree = build_witness(&tr, None, p, 1, WitnessOptions::default()).unwrap();
        (tr, tree)
    }

    #[test]
    fn builds_h1_tree() {
        let (tr, tree) = first_loaded_tree();
        assert_eq!(tree.lambda, 5);
        assert_eq!(tree.mu, 9 + 4 * 8);
        assert_eq!(tree.root, 18);
        assert_eq!(tree.levels[0].len(), 4);
        for (i, e) in tree.levels[0].iter().enumerate() {
            assert_eq!(e.subpath, i);
            assert_eq!(e.interval, (2 * i, 2 * i + 2));
        }
        assert!(verify_witness_tree(&tree, &tr, None, 1).ok());
        let back = WitnessTree::from_json(&tree.to_json().unwrap()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn builds_deeper_trees() {
        for (k, h, l, rho) in [(4, 2, 8, 1), (5, 2, 10, 2), (4, 3, 9, 1)] {
            let (_, tr, p) = planted(k, h, l, rho, 1);
            let tree = build_witness(&tr, None, p, 1, WitnessOptions::default())
                .unwrap_or_else(|e| panic!("k={k} h={h}: {e}"));
            assert_eq!(tree.lambda, p.lambda());
            for j in 1..=h {
                assert_eq!(tree.levels[j - 1].len(), p.level_size(j));
            }
            assert!(tree.mu >= p.mu(l));
            assert!(verify_witness_tree(&tree, &tr, None, 1).ok());
        }
    }

    #[test]
    fn mutations_are_rejected() {
        use ViolationClass::*;
        let (tr, tree) = first_loaded_tree();
        type Mutation = fn(&mut WitnessTree);
        let cases: Vec<(ViolationClass, Mutation)> = vec![
            (Lambda, |t| t.lambda += 1),
            (Mu, |t| t.mu -= 1),
            (Root, |t| t.root = 0),
            (Subpath, |t| t.levels[0][1].interval = (1, 3)),
            (LevelOverlap, |t| t.levels[0][1].ball = t.levels[0][0].ball),
            (UnknownBall, |t| t.levels[0][2].ball = 10_000),
            (LoadFloor, |t| t.c = 0),
        ];
        for (class, mutate) in cases {
            let mut m = tree.clone();
            mutate(&mut m);
            let floor = if class == LoadFloor { 5 } else { 1 };
            let rep = verify_witness_tree(&m, &tr, None, floor);
            assert!(rep.has(class), "{class:?} not reported: {:?}", rep.violations);
        }
    }

    #[test]
    fn c2_violation_detected() {
        let (tr, mut tree) = first_loaded_tree();
        tree.params.rho = 0;
        let rep = verify_witness_tree(&tree, &tr, None, 1);
        assert!(rep.has(ViolationClass::ConditionC2));
    }

    #[test]
    fn threshold_not_met() {
        let (_, tr, p) = planted(4, 1, 8, 1, 1);
        assert_eq!(*tr.loads.iter().max().unwrap(), 3);
        let err = build_witness(&tr, None, p, 2, WitnessOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            WitnessFailure::ThresholdNotMet {
                required: 4,
                load: 3,
                ..
            }
        ));
    }

    #[test]
    fn no_candidate_reported() {
        let (_, mut tr, p) = planted(4, 1, 8, 1, 1);
        tr.balls.truncate(19);
        tr.loads = tr.loads_at(19);
        let err = build_witness(&tr, None, p, 1, WitnessOptions::default()).unwrap_err();
        assert_eq!(
            err,
            WitnessFailure::NoCandidate {
                level: 1,
                parent: 18,
                subpath: 0
            }
        );
    }

    #[test]
    fn prefix_loads_limit_candidates() {
        let (_, tr, p) = planted(4, 1, 8, 1, 1);
        let early = WitnessOptions {
            load_time: LoadTime::Prefix(19),
            ..Default::default()
        };
        assert!(matches!(
            build_witness(&tr, None, p, 1, early),
            Err(WitnessFailure::NoCandidate { .. })
        ));
        let all = WitnessOptions {
            load_time: LoadTime::Prefix(tr.balls.len()),
            ..Default::default()
        };
        let tree = build_witness(&tr, None, p, 1, all).unwrap();
        assert!(verify_witness_tree(&tree, &tr, None, 1).ok());
    }

    #[test]
    fn middle_segment_variant() {
        let (_, tr, mut p) = planted(4, 1, 8, 1, 1);
        p.delta = 2;
        let opts = WitnessOptions {
            middle_segment_only: true,
            ..Default::default()
        };
        assert!(matches!(
            build_witness(&tr, None, p, 1, opts),
            Err(WitnessFailure::NoCandidate { .. })
        ));
        p.delta = 1;
        assert!(build_witness(&tr, None, p, 1, opts).is_ok());
    }

    #[test]
    fn light_trace_fails() {
        let (_, mut tr, p) = planted(4, 1, 8, 1, 1);
        tr.light = true;
        let err = build_witness(&tr, None, p, 1, WitnessOptions::default()).unwrap_err();
        assert_eq!(err, WitnessFailure::LightTrace);
    }

    #[test]
    fn cycle_detected_on_k4() {
        let g = load_fixture("k4").unwrap();
        let w = vec![0, 1, 2, 0, 1];
        let tr = trace_from_walks(&g, 4, &vec![w; 4]);
        let root = tr.balls.iter().position(|b| b.height == 1).unwrap();
        let tree = WitnessTree {
            root,
            root_node: tr.balls[root].chosen,
            params: WitnessParams {
                k: 4,
                rho: 0,
                h: 1,
                delta: 1,
            },
            c: 1,
            load_time: LoadTime::Final,
            middle_segment_only: false,
            levels: vec![vec![]],
            lambda: 1,
            mu: 3,
        };
        let rep = verify_witness_tree(&tree, &tr, Some(&g), 1);
        assert!(rep.has(ViolationClass::Cycle));
        assert!(rep.has(ViolationClass::LevelSize));
    }
}
