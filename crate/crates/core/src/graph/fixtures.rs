use super::{NodeId, RegularGraph};
use crate::error::{Error, Result};

/// Names accepted by [`load_fixture`]. Parameterised families take the node
/// count in parentheses, e.g. `cycle(12)`.
pub fn fixture_names() -> &'static [&'static str] {
    &["petersen", "heawood", "k4", "k33", "cube", "cycle(n)", "complete(n)"]
}

/// Loads a built-in graph by name.
pub fn load_fixture(name: &str) -> Result<RegularGraph> {
    let unknown = || Error::UnknownFixture(name.to_string());
    let name = name.trim().to_ascii_lowercase();
    let g = match name.as_str() {
        "petersen" => petersen(),
        "heawood" => heawood(),
        "k4" => complete(4),
        "k33" | "k3,3" => k33(),
        "cube" | "q3" => cube(),
        _ => {
            let (family, arg) = name
                .strip_suffix(')')
                .and_then(|s| s.split_once('('))
                .ok_or_else(unknown)?;
            let m: usize = arg.trim().parse().map_err(|_| unknown())?;
            match family.trim() {
                "cycle" if m >= 3 => cycle(m),
                "complete" if m >= 3 => complete(m),
                _ => return Err(unknown()),
            }
        }
    };
    let g = g?;
    Ok(g)
}

fn petersen() -> Result<RegularGraph> {
    let mut edges = Vec::with_capacity(15);
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((i + 5, (i + 2) % 5 + 5));
    }
    RegularGraph::from_edges(10, &edges)
}

/// Heawood graph, LCF notation [5,-5]^7.
fn heawood() -> Result<RegularGraph> {
    let mut edges = Vec::with_capacity(21);
    for i in 0..14 {
        edges.push((i, (i + 1) % 14));
        if i % 2 == 0 {
            edges.push((i, (i + 5) % 14));
        }
    }
    RegularGraph::from_edges(14, &edges)
}

fn k33() -> Result<RegularGraph> {
    let edges: Vec<(NodeId, NodeId)> = (0..3).flat_map(|a| (3..6).map(move |b| (a, b))).collect();
    RegularGraph::from_edges(6, &edges)
}

fn cube() -> Result<RegularGraph> {
    let mut edges = Vec::with_capacity(12);
    for u in 0..8usize {
        for bit in 0..3 {
            let v = u ^ (1 << bit);
            if u < v {
                edges.push((u, v));
            }
        }
    }
    RegularGraph::from_edges(8, &edges)
}

fn cycle(n: usize) -> Result<RegularGraph> {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    RegularGraph::from_edges(n, &edges)
}

fn complete(n: usize) -> Result<RegularGraph> {
    let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    RegularGraph::from_edges(n, &edges)
}
