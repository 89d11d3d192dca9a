//! Sequential allocation of balls into graph nodes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, RegularGraph};
use crate::params::DerivedParams;
use crate::walker::{is_nonbacktracking, sample_nbrw_into};

/// How a ball picks its bin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Least-loaded node among all `l + 1` nodes of a non-backtracking walk.
    NbrwDense { l: usize },
    /// Least-loaded node among every `r_g`-th node of an `l * r_g` walk.
    NbrwSparse { l: usize, r_g: usize },
    /// A single uniform node.
    OneChoice,
    /// Least-loaded of `choices` independent uniform nodes.
    DChoice { choices: usize },
    /// From a uniform start, move to a uniformly chosen neighbor of strictly
    /// smaller load until none exists.
    LocalSearch,
}

impl Strategy {
    pub fn nbrw_dense(l: usize) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidStrategy("nbrw-dense needs l >= 1".into()));
        }
        Ok(Strategy::NbrwDense { l })
    }

    pub fn nbrw_sparse(l: usize, r_g: usize) -> Result<Self> {
        if l < 1 || r_g < 1 {
            return Err(Error::InvalidStrategy("nbrw-sparse needs l >= 1 and r_G >= 1".into()));
        }
        Ok(Strategy::NbrwSparse { l, r_g })
    }

    pub fn d_choice(choices: usize) -> Result<Self> {
        if choices < 1 {
            return Err(Error::InvalidStrategy("d-choice needs at least one choice".into()));
        }
        Ok(Strategy::DChoice { choices })
    }

    /// Parses a strategy label. `l` and `r_g` fill in the walk parameters of
    /// the walk-based strategies and are ignored otherwise.
    pub fn parse(label: &str, l: usize, r_g: usize) -> Result<Self> {
        match StrategyKind::from_str(label)? {
            StrategyKind::NbrwDense => Strategy::nbrw_dense(l),
            StrategyKind::NbrwSparse => Strategy::nbrw_sparse(l, r_g),
            StrategyKind::OneChoice => Ok(Strategy::OneChoice),
            StrategyKind::DChoice(k) => Strategy::d_choice(k),
            StrategyKind::LocalSearch => Ok(Strategy::LocalSearch),
        }
    }

    pub fn kind(&self) -> StrategyKind {
        match *self {
            Strategy::NbrwDense { .. } => StrategyKind::NbrwDense,
            Strategy::NbrwSparse { .. } => StrategyKind::NbrwSparse,
            Strategy::OneChoice => StrategyKind::OneChoice,
            Strategy::DChoice { choices } => StrategyKind::DChoice(choices),
            Strategy::LocalSearch => StrategyKind::LocalSearch,
        }
    }

    /// Number of potential choices minus one for walk strategies.
    pub fn l(&self) -> Option<usize> {
        match *self {
            Strategy::NbrwDense { l } | Strategy::NbrwSparse { l, .. } => Some(l),
            _ => None,
        }
    }

    pub fn spacing(&self) -> usize {
        match *self {
            Strategy::NbrwSparse { r_g, .. } => r_g,
            _ => 1,
        }
    }

    /// Edges walked per ball, for walk strategies.
    pub fn walk_length(&self) -> Option<usize> {
        self.l().map(|l| l * self.spacing())
    }

    /// Whether placement is the least-loaded of the recorded choices.
    pub fn is_min_load(&self) -> bool {
        !matches!(self, Strategy::LocalSearch)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind().fmt(f)
    }
}

/// A strategy without its walk parameters; what appears in CSV and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    NbrwDense,
    NbrwSparse,
    OneChoice,
    DChoice(usize),
    LocalSearch,
}

impl StrategyKind {
    pub fn uses_walks(&self) -> bool {
        matches!(self, StrategyKind::NbrwDense | StrategyKind::NbrwSparse)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::NbrwDense => f.write_str("nbrw-dense"),
            StrategyKind::NbrwSparse => f.write_str("nbrw-sparse"),
            StrategyKind::OneChoice => f.write_str("one-choice"),
            StrategyKind::DChoice(k) => write!(f, "d-choice({k})"),
            StrategyKind::LocalSearch => f.write_str("local-search"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "nbrw-dense" => StrategyKind::NbrwDense,
            "nbrw-sparse" => StrategyKind::NbrwSparse,
            "one-choice" => StrategyKind::OneChoice,
            "local-search" => StrategyKind::LocalSearch,
            _ => {
                let k = s
                    .strip_prefix("d-choice(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|k| k.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidStrategy(format!("unknown strategy `{s}`")))?;
                if k < 1 {
                    return Err(Error::InvalidStrategy("d-choice needs at least one choice".into()));
                }
                StrategyKind::DChoice(k)
            }
        })
    }
}

/// One placed ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallRecord {
    /// Zero-based ball index.
    pub t: usize,
    /// Walk taken; empty for walk-free strategies and light traces.
    pub walk: Vec<NodeId>,
    pub choices: Vec<NodeId>,
    pub chosen: NodeId,
    /// Load of `chosen` just before this ball landed.
    pub height: usize,
}

/// Everything that happened in one allocation run.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTrace {
    pub n: usize,
    pub d: usize,
    pub strategy: Strategy,
    pub seed: u64,
    /// Light traces drop walks; witness and multiplicity analyses need them.
    pub light: bool,
    pub params: Option<DerivedParams>,
    pub loads: Vec<usize>,
    pub balls: Vec<BallRecord>,
}

impl AllocationTrace {
    pub fn new(g: &RegularGraph, strategy: Strategy, seed: u64) -> Self {
        AllocationTrace {
            n: g.n(),
            d: g.d(),
            strategy,
            seed,
            light: false,
            params: None,
            loads: vec![0; g.n()],
            balls: Vec::new(),
        }
    }

    pub fn light(mut self) -> Self {
        self.light = true;
        self
    }

    pub fn with_params(mut self, params: DerivedParams) -> Self {
        self.params = Some(params);
        self
    }

    /// Walks retained in the trace, or an error for light traces.
    pub fn walks(&self) -> Result<impl Iterator<Item = &[NodeId]> + '_> {
        if self.light {
            return Err(Error::LightTrace);
        }
        Ok(self.balls.iter().map(|b| b.walk.as_slice()))
    }

    /// More balls than bins lies outside the analysed regime.
    pub fn beyond_analysed_regime(&self) -> bool {
        self.balls.len() > self.n
    }

    /// Loads after the first `t` balls.
    pub fn loads_at(&self, t: usize) -> Vec<usize> {
        let mut loads = vec![0; self.n];
        for b in &self.balls[..t.min(self.balls.len())] {
            loads[b.chosen] += 1;
        }
        loads
    }

    /// Replays every ball against reconstructed loads and reports anything that
    /// contradicts the placement rules. With `g`, also checks walk geometry and
    /// local-search minimality.
    pub fn replay_violations(&self, g: Option<&RegularGraph>) -> Vec<ReplayViolation> {
        let mut out = Vec::new();
        let mut loads = vec![0usize; self.n];
        for (i, b) in self.balls.iter().enumerate() {
            if b.t != i {
                out.push(ReplayViolation::OutOfOrder { t: i });
            }
            if b.chosen >= self.n || !b.choices.contains(&b.chosen) {
                out.push(ReplayViolation::ChosenOutsideChoices { t: i });
                continue;
            }
            if b.height != loads[b.chosen] {
                out.push(ReplayViolation::HeightMismatch {
                    t: i,
                    recorded: b.height,
                    replayed: loads[b.chosen],
                });
            }
            if self.strategy.is_min_load() {
                let min = b
                    .choices
                    .iter()
                    .map(|&c| loads.get(c).copied().unwrap_or(usize::MAX))
                    .min();
                if min != Some(loads[b.chosen]) {
                    out.push(ReplayViolation::NotLeastLoaded { t: i });
                }
            }
            if let Some(g) = g {
                if !b.walk.is_empty() {
                    let spacing = self.strategy.spacing();
                    let expected: Vec<NodeId> = b.walk.iter().copied().step_by(spacing).collect();
                    if !is_nonbacktracking(g, &b.walk) || expected != b.choices {
                        out.push(ReplayViolation::BadWalk { t: i });
                    }
                }
                if matches!(self.strategy, Strategy::LocalSearch)
                    && g.neighbors(b.chosen).iter().any(|&v| loads[v] < loads[b.chosen])
                {
                    out.push(ReplayViolation::NotLocalMinimum { t: i });
                }
            }
            loads[b.chosen] += 1;
        }
        if loads != self.loads {
            out.push(ReplayViolation::LoadsDiffer);
        }
        if self.loads.iter().sum::<usize>() != self.balls.len() {
            out.push(ReplayViolation::Conservation {
                balls: self.balls.len(),
                total_load: self.loads.iter().sum(),
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayViolation {
    OutOfOrder { t: usize },
    ChosenOutsideChoices { t: usize },
    HeightMismatch { t: usize, recorded: usize, replayed: usize },
    NotLeastLoaded { t: usize },
    NotLocalMinimum { t: usize },
    BadWalk { t: usize },
    LoadsDiffer,
    Conservation { balls: usize, total_load: usize },
}

/// Uniform pick among the distinct least-loaded nodes of `choices`.
fn least_loaded<R: Rng + ?Sized>(
    loads: &[usize],
    choices: &[NodeId],
    minimizers: &mut Vec<NodeId>,
    rng: &mut R,
) -> NodeId {
    minimizers.clear();
    let mut best = usize::MAX;
    for &c in choices {
        let l = loads[c];
        if l < best {
            best = l;
            minimizers.clear();
            minimizers.push(c);
        } else if l == best && !minimizers.contains(&c) {
            minimizers.push(c);
        }
    }
    if minimizers.len() == 1 {
        minimizers[0]
    } else {
        minimizers[rng.gen_range(0..minimizers.len())]
    }
}

/// Places one ball and appends its record to `trace`.
pub fn allocate_one<'a, R: Rng + ?Sized>(
    trace: &'a mut AllocationTrace,
    g: &RegularGraph,
    strategy: &Strategy,
    rng: &mut R,
) -> &'a BallRecord {
    let mut walk = Vec::new();
    let mut choices = Vec::new();
    let mut scratch = Vec::new();
    let chosen = place(&trace.loads, g, strategy, rng, &mut walk, &mut choices, &mut scratch);
    let height = trace.loads[chosen];
    trace.loads[chosen] += 1;
    if trace.light {
        walk = Vec::new();
    }
    let t = trace.balls.len();
    trace.balls.push(BallRecord {
        t,
        walk,
        choices,
        chosen,
        height,
    });
    trace.balls.last().expect("just pushed")
}

/// Chooses a node for the next ball, filling `walk` and `choices`.
pub(crate) fn place<R: Rng + ?Sized>(
    loads: &[usize],
    g: &RegularGraph,
    strategy: &Strategy,
    rng: &mut R,
    walk: &mut Vec<NodeId>,
    choices: &mut Vec<NodeId>,
    scratch: &mut Vec<NodeId>,
) -> NodeId {
    walk.clear();
    choices.clear();
    match *strategy {
        Strategy::NbrwDense { l } => {
            sample_nbrw_into(g, l, rng, walk).expect("validated walk length");
            choices.extend_from_slice(walk);
            least_loaded(loads, choices, scratch, rng)
        }
        Strategy::NbrwSparse { l, r_g } => {
            sample_nbrw_into(g, l * r_g, rng, walk).expect("validated walk length");
            choices.extend(walk.iter().copied().step_by(r_g));
            least_loaded(loads, choices, scratch, rng)
        }
        Strategy::OneChoice => {
            let u = rng.gen_range(0..g.n());
            choices.push(u);
            u
        }
        Strategy::DChoice { choices: k } => {
            choices.extend((0..k).map(|_| rng.gen_range(0..g.n())));
            least_loaded(loads, choices, scratch, rng)
        }
        Strategy::LocalSearch => {
            let mut cur = rng.gen_range(0..g.n());
            choices.push(cur);
            loop {
                scratch.clear();
                scratch.extend(g.neighbors(cur).iter().copied().filter(|&v| loads[v] < loads[cur]));
                if scratch.is_empty() {
                    break cur;
                }
                cur = scratch[rng.gen_range(0..scratch.len())];
                choices.push(cur);
            }
        }
    }
}

/// Allocates `m_balls` balls one after another.
pub fn run_allocation<R: Rng + ?Sized>(
    g: &RegularGraph,
    strategy: &Strategy,
    m_balls: usize,
    seed: u64,
    light: bool,
    rng: &mut R,
) -> AllocationTrace {
    let mut trace = AllocationTrace::new(g, strategy.clone(), seed);
    trace.light = light;
    trace.balls.reserve(m_balls);
    let mut walk = Vec::new();
    let mut scratch = Vec::new();
    for t in 0..m_balls {
        let mut choices = Vec::new();
        let chosen = place(&trace.loads, g, strategy, rng, &mut walk, &mut choices, &mut scratch);
        let height = trace.loads[chosen];
        trace.loads[chosen] += 1;
        trace.balls.push(BallRecord {
            t,
            walk: if light { Vec::new() } else { walk.clone() },
            choices,
            chosen,
            height,
        });
        if (t + 1) % (1 << 16) == 0 {
            debug_assert_eq!(trace.loads.iter().sum::<usize>(), t + 1);
        }
    }
    debug_assert_eq!(trace.loads.iter().sum::<usize>(), m_balls);
    trace
}

pub fn max_load(trace: &AllocationTrace) -> usize {
    trace.loads.iter().copied().max().unwrap_or(0)
}
