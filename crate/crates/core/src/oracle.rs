//! Exhaustive enumeration of non-backtracking walks.
//!
//! This is deliberately the slow, obvious route: depth-first expansion of every
//! walk. It shares no code with the sampler and serves as ground truth for
//! sampler frequencies and walk counts on small fixtures.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{NodeId, RegularGraph};

/// Every ordered non-backtracking walk with `len` edges, in lexicographic order.
pub fn ordered_walks(g: &RegularGraph, len: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(len + 1);
    for u in 0..g.n() {
        stack.push(u);
        extend(g, len, &mut stack, &mut out);
        stack.pop();
    }
    out
}

fn extend(g: &RegularGraph, len: usize, stack: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
    if stack.len() == len + 1 {
        out.push(stack.clone());
        return;
    }
    let cur = *stack.last().unwrap();
    let prev = (stack.len() >= 2).then(|| stack[stack.len() - 2]);
    for &v in g.neighbors(cur) {
        if Some(v) == prev {
            continue;
        }
        stack.push(v);
        extend(g, len, stack, out);
        stack.pop();
    }
}

/// Walks with orientation forgotten: each is stored as the lexicographically
/// smaller of itself and its reverse.
pub fn unordered_walks(g: &RegularGraph, len: usize) -> BTreeSet<Vec<NodeId>> {
    ordered_walks(g, len)
        .into_iter()
        .map(|w| {
            let mut r = w.clone();
            r.reverse();
            w.min(r)
        })
        .collect()
}

/// `n d (d-1)^(len-1)`: the number of ordered walks on any `d`-regular graph.
pub fn expected_ordered_count(n: usize, d: usize, len: usize) -> u128 {
    let mut c = n as u128 * d as u128;
    for _ in 1..len {
        c *= (d - 1) as u128;
    }
    c
}

/// Multiplicity of every orientation-free subpath with `len` edges, counted
/// pairwise: each distinct subpath is compared against every walk by sliding
/// both orientations across it.
pub fn brute_force_multiplicities(walks: &[Vec<NodeId>], len: usize) -> BTreeMap<Vec<NodeId>, usize> {
    let mut keys: Vec<Vec<NodeId>> = Vec::new();
    for w in walks {
        if w.len() < len + 1 {
            continue;
        }
        for s in w.windows(len + 1) {
            let mut r = s.to_vec();
            r.reverse();
            let key = s.to_vec().min(r);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
    }
    let mut out = BTreeMap::new();
    for key in keys {
        let mut rev = key.clone();
        rev.reverse();
        let count = walks
            .iter()
            .filter(|w| w.windows(len + 1).any(|s| s == key.as_slice() || s == rev.as_slice()))
            .count();
        out.insert(key, count);
    }
    out
}
