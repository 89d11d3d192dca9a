use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GraphSpec, NodeId, RegularGraph};
use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

/// Swap attempts allowed per unit of `n * d` during girth repair.
const REPAIR_BUDGET_PER_STUB: usize = 100;

/// Failed partner swaps tolerated for one short edge before falling back to a
/// random swap.
const PARTNER_TRIES: usize = 32;

/// Fewest nodes a `d`-regular graph of girth `g` can have.
pub fn moore_bound(d: usize, g: usize) -> usize {
    let r = g / 2;
    let mut sum = 0usize;
    let mut term = 1usize;
    for _ in 0..r {
        sum = sum.saturating_add(term);
        term = term.saturating_mul(d.saturating_sub(1));
    }
    if g.is_multiple_of(2) {
        sum.saturating_mul(2)
    } else {
        // 1 + d * sum_{i<r} (d-1)^i
        1usize.saturating_add(d.saturating_mul(sum))
    }
}

/// Generates a random simple `d`-regular graph, optionally repaired to a
/// minimum girth by double-edge swaps.
///
/// Edges are formed by pairing degree stubs uniformly at random while
/// rejecting loops and parallel edges pair by pair, restarting only when the
/// remaining stubs cannot be paired at all. Repair then targets every edge that
/// lies on a cycle shorter than `min_girth`, swapping it with an edge far
/// enough away that no new short cycle appears.
pub fn generate_random_regular(spec: &GraphSpec) -> Result<RegularGraph> {
    let (n, d) = (spec.n, spec.d);
    if n * d % 2 == 1 {
        return Err(Error::OddDegreeSum { n, d });
    }
    if d >= n {
        return Err(Error::DegreeTooLarge { n, d });
    }
    if d < 2 {
        return Err(Error::InvalidGraph(format!("degree must be at least 2, got {d}")));
    }
    if let Some(g) = spec.min_girth {
        if g < 3 {
            return Err(Error::Config(format!("min_girth must be at least 3, got {g}")));
        }
        let moore = moore_bound(d, g);
        if n < moore {
            return Err(Error::InfeasibleGirth {
                n,
                d,
                requested: g,
                moore_bound: moore,
            });
        }
    }

    let mut rng = seeded(spec.seed);
    let mut adj = pair_stubs(n, d, &mut rng);
    if let Some(g) = spec.min_girth {
        let budget = REPAIR_BUDGET_PER_STUB * n * d;
        let mut repair = Repair::new(n, g);
        if !repair.run(&mut adj, budget, &mut rng) {
            let achieved = RegularGraph::from_adjacency(adj)?.girth();
            return Err(Error::GirthRepairExhausted { budget, achieved });
        }
    }
    RegularGraph::from_adjacency(adj)
}

fn pair_stubs(n: usize, d: usize, rng: &mut SimRng) -> Vec<Vec<NodeId>> {
    'restart: loop {
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::with_capacity(d); n];
        let mut stubs: Vec<NodeId> = (0..n).flat_map(|u| std::iter::repeat_n(u, d)).collect();
        while !stubs.is_empty() {
            let mut pick = None;
            for _ in 0..64 {
                let i = rng.gen_range(0..stubs.len());
                let j = rng.gen_range(0..stubs.len());
                let (u, v) = (stubs[i], stubs[j]);
                if i != j && u != v && !adj[u].contains(&v) {
                    pick = Some((i, j));
                    break;
                }
            }
            if pick.is_none() {
                let mut candidates = Vec::new();
                for i in 0..stubs.len() {
                    for j in i + 1..stubs.len() {
                        let (u, v) = (stubs[i], stubs[j]);
                        if u != v && !adj[u].contains(&v) {
                            candidates.push((i, j));
                        }
                    }
                }
                match candidates.choose(rng) {
                    Some(&c) => pick = Some(c),
                    None => continue 'restart,
                }
            }
            let (i, j) = pick.expect("pair chosen");
            let (u, v) = (stubs[i], stubs[j]);
            adj[u].push(v);
            adj[v].push(u);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
        }
        return adj;
    }
}

/// Scratch state for short-cycle detection on a mutable adjacency.
struct Repair {
    target: usize,
    stamp_a: Vec<u32>,
    dist_a: Vec<u32>,
    epoch_a: u32,
    stamp_b: Vec<u32>,
    dist_b: Vec<u32>,
    epoch_b: u32,
    queue: VecDeque<NodeId>,
    visited: Vec<NodeId>,
}

fn remove_edge(adj: &mut [Vec<NodeId>], u: NodeId, v: NodeId) {
    let i = adj[u].iter().position(|&x| x == v).expect("edge present");
    adj[u].swap_remove(i);
    let j = adj[v].iter().position(|&x| x == u).expect("edge present");
    adj[v].swap_remove(j);
}

fn add_edge(adj: &mut [Vec<NodeId>], u: NodeId, v: NodeId) {
    adj[u].push(v);
    adj[v].push(u);
}

/// Replaces edges a-b and c-e by a-c and b-e.
fn swap_edges(adj: &mut [Vec<NodeId>], a: NodeId, b: NodeId, c: NodeId, e: NodeId) {
    remove_edge(adj, a, b);
    remove_edge(adj, c, e);
    add_edge(adj, a, c);
    add_edge(adj, b, e);
}

fn unswap_edges(adj: &mut [Vec<NodeId>], a: NodeId, b: NodeId, c: NodeId, e: NodeId) {
    remove_edge(adj, a, c);
    remove_edge(adj, b, e);
    add_edge(adj, a, b);
    add_edge(adj, c, e);
}

impl Repair {
    fn new(n: usize, target: usize) -> Self {
        Repair {
            target,
            stamp_a: vec![0; n],
            dist_a: vec![0; n],
            epoch_a: 0,
            stamp_b: vec![0; n],
            dist_b: vec![0; n],
            epoch_b: 0,
            queue: VecDeque::new(),
            visited: Vec::new(),
        }
    }

    /// BFS from `src` up to `radius`, never traversing the edge `skip`.
    /// Marks visited nodes with the side-`a` or side-`b` stamp and leaves them
    /// in `self.visited`.
    fn ball(&mut self, adj: &[Vec<NodeId>], src: NodeId, radius: usize, skip: Option<(NodeId, NodeId)>, side_a: bool) {
        let (stamp, dist, epoch) = if side_a {
            self.epoch_a += 1;
            (&mut self.stamp_a, &mut self.dist_a, self.epoch_a)
        } else {
            self.epoch_b += 1;
            (&mut self.stamp_b, &mut self.dist_b, self.epoch_b)
        };
        let blocked = |u: NodeId, v: NodeId| skip.is_some_and(|(x, y)| (u == x && v == y) || (u == y && v == x));
        self.queue.clear();
        self.visited.clear();
        stamp[src] = epoch;
        dist[src] = 0;
        self.queue.push_back(src);
        while let Some(u) = self.queue.pop_front() {
            self.visited.push(u);
            let du = dist[u] as usize;
            if du == radius {
                continue;
            }
            for &v in &adj[u] {
                if stamp[v] != epoch && !blocked(u, v) {
                    stamp[v] = epoch;
                    dist[v] = du as u32 + 1;
                    self.queue.push_back(v);
                }
            }
        }
    }

    /// Whether the edge `a-b` lies on a cycle shorter than the target girth,
    /// i.e. whether `a` and `b` are within `target - 2` of each other without it.
    fn is_short(&mut self, adj: &[Vec<NodeId>], a: NodeId, b: NodeId) -> bool {
        let limit = self.target - 2;
        let ra = limit.div_ceil(2);
        let rb = limit / 2;
        self.ball(adj, a, ra, Some((a, b)), true);
        self.ball(adj, b, rb, Some((a, b)), false);
        let ea = self.epoch_a;
        self.visited
            .iter()
            .any(|&x| self.stamp_a[x] == ea && (self.dist_a[x] + self.dist_b[x]) as usize <= limit)
    }

    fn run(&mut self, adj: &mut [Vec<NodeId>], budget: usize, rng: &mut SimRng) -> bool {
        let n = adj.len();
        let d = adj[0].len();
        let mut pending: Vec<(NodeId, NodeId)> = Vec::new();
        for u in 0..n {
            for i in 0..d {
                let v = adj[u][i];
                if u < v && self.is_short(adj, u, v) {
                    pending.push((u, v));
                }
            }
        }
        pending.shuffle(rng);

        let far_radius = self.target - 2;
        let mut swaps = 0usize;
        let mut far = Vec::with_capacity(n);
        while let Some((mut a, mut b)) = pending.pop() {
            if !adj[a].contains(&b) || !self.is_short(adj, a, b) {
                continue;
            }
            if swaps >= budget {
                return false;
            }
            swaps += 1;
            if rng.gen::<bool>() {
                std::mem::swap(&mut a, &mut b);
            }

            // Candidates c (resp. e) at distance > target - 2 from a (resp. b):
            // joining them cannot close a short cycle through a single new edge.
            self.ball(adj, a, far_radius, None, true);
            self.ball(adj, b, far_radius, None, false);
            far.clear();
            far.extend((0..n).filter(|&x| self.stamp_a[x] != self.epoch_a));

            let mut found = None;
            if !far.is_empty() {
                let start = rng.gen_range(0..far.len());
                let mut tries = 0;
                'search: for idx in 0..far.len() {
                    let c = far[(start + idx) % far.len()];
                    let off = rng.gen_range(0..d);
                    for j in 0..d {
                        let e = adj[c][(off + j) % d];
                        if self.stamp_b[e] == self.epoch_b {
                            continue;
                        }
                        found = Some((c, e));
                        break 'search;
                    }
                    tries += 1;
                    if tries > n {
                        break;
                    }
                }
            }

            let mut placed = false;
            if let Some((c, e)) = found {
                // Cycles through both new edges are not excluded by the distance
                // test; confirm and otherwise look again a few times.
                swap_edges(adj, a, b, c, e);
                if !self.is_short(adj, a, c) && !self.is_short(adj, b, e) {
                    placed = true;
                } else {
                    unswap_edges(adj, a, b, c, e);
                    for _ in 0..PARTNER_TRIES {
                        let c = rng.gen_range(0..n);
                        let e = adj[c][rng.gen_range(0..d)];
                        if !self.swap_is_legal(adj, a, b, c, e) {
                            continue;
                        }
                        swap_edges(adj, a, b, c, e);
                        if !self.is_short(adj, a, c) && !self.is_short(adj, b, e) {
                            placed = true;
                            break;
                        }
                        unswap_edges(adj, a, b, c, e);
                    }
                }
            }

            if !placed {
                // No clean partner: make a random legal swap and requeue any
                // short edges it creates.
                let mut moved = false;
                for _ in 0..PARTNER_TRIES {
                    let c = rng.gen_range(0..n);
                    let e = adj[c][rng.gen_range(0..d)];
                    if self.swap_is_legal(adj, a, b, c, e) {
                        swap_edges(adj, a, b, c, e);
                        for (x, y) in [(a, c), (b, e)] {
                            if self.is_short(adj, x, y) {
                                pending.push((x, y));
                            }
                        }
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    pending.insert(0, (a, b));
                }
            }
        }
        true
    }

    fn swap_is_legal(&self, adj: &[Vec<NodeId>], a: NodeId, b: NodeId, c: NodeId, e: NodeId) -> bool {
        c != a && c != b && e != a && e != b && !adj[a].contains(&c) && !adj[b].contains(&e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moore_bounds() {
        assert_eq!(moore_bound(3, 3), 4);
        assert_eq!(moore_bound(3, 4), 6);
        assert_eq!(moore_bound(3, 5), 10);
        assert_eq!(moore_bound(3, 6), 14);
        assert_eq!(moore_bound(16, 6), 482);
        assert_eq!(moore_bound(2, 7), 7);
        assert_eq!(moore_bound(2, 8), 8);
    }

    #[test]
    fn small_random_graph() {
        let g = generate_random_regular(&GraphSpec::random(10, 3, 7)).unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.d(), 3);
        assert_eq!(g.edges().count(), 15);
    }

    #[test]
    fn parity_and_degree_errors() {
        assert!(matches!(
            generate_random_regular(&GraphSpec::random(7, 3, 1)),
            Err(Error::OddDegreeSum { n: 7, d: 3 })
        ));
        assert!(matches!(
            generate_random_regular(&GraphSpec::random(4, 4, 1)),
            Err(Error::DegreeTooLarge { .. })
        ));
    }

    #[test]
    fn infeasible_girth_reports_moore_bound() {
        let err = generate_random_regular(&GraphSpec::random(8, 3, 1).with_min_girth(6)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleGirth { moore_bound: 14, .. }));
    }

    #[test]
    fn repair_reaches_target() {
        for (n, d, g, seed) in [(200, 3, 7, 1), (500, 4, 6, 2), (64, 3, 5, 3)] {
            let graph = generate_random_regular(&GraphSpec::random(n, d, seed).with_min_girth(g)).unwrap();
            assert!(graph.girth() >= g, "n={n} d={d} girth={}", graph.girth());
            assert_eq!(graph.edges().count(), n * d / 2);
        }
    }

    #[test]
    fn repair_budget_exhaustion_reports_girth() {
        // A 3-regular graph on 14 nodes with girth 6 is unique (Heawood); a
        // random search with this seed does not find it within budget.
        match generate_random_regular(&GraphSpec::random(14, 3, 5).with_min_girth(6)) {
            Ok(g) => assert!(g.girth() >= 6),
            Err(Error::GirthRepairExhausted { achieved, .. }) => assert!(achieved < 6),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GraphSpec::random(300, 5, 99).with_min_girth(5);
        let a = generate_random_regular(&spec).unwrap();
        let b = generate_random_regular(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_random_regular(&GraphSpec::random(300, 5, 100).with_min_girth(5)).unwrap();
        assert_ne!(a, c);
    }
}
