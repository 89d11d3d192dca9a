//! Plain-text edge lists: a header line `n d`, then one `u v` pair per line,
//! 0-indexed, each undirected edge listed once. Blank lines and lines starting
//! with `#` are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{NodeId, RegularGraph};
use crate::error::{Error, Result};

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<RegularGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

pub(crate) fn parse_edge_list(text: &str, path: &Path) -> Result<RegularGraph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing `n d` header".into()))?;
    let pair = |line: usize, s: &str| -> Result<(usize, usize)> {
        let mut it = s.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
            _ => Err(err(line, format!("expected two integers, got `{s}`"))),
        }
    };
    let (n, d) = pair(hline, header)?;

    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(n * d / 2);
    for (line, s) in lines {
        let (u, v) = pair(line, s)?;
        if u >= n || v >= n {
            return Err(err(line, format!("node out of range 0..{n}: `{s}`")));
        }
        edges.push((u, v));
    }
    if edges.len() != n * d / 2 || (n * d) % 2 == 1 {
        return Err(err(
            hline,
            format!("expected {} edges for n={n} d={d}, found {}", n * d / 2, edges.len()),
        ));
    }
    let g = RegularGraph::from_edges(n, &edges)?;
    if g.d() != d {
        return Err(Error::InvalidGraph(format!(
            "header declares degree {d} but edges give degree {}",
            g.d()
        )));
    }
    Ok(g)
}

/// The edge-list text of `g`: a `n d` header, then each edge once as `u v`.
pub fn edge_list_string(g: &RegularGraph) -> String {
    let mut out = String::with_capacity(g.edge_count() * 12);
    out.push_str(&format!("{} {}\n", g.n(), g.d()));
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn write_edge_list(g: &RegularGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(edge_list_string(g).as_bytes())
        .map_err(|e| Error::io(path, e))
}
