//! Trace files.
//!
//! A trace is JSON-lines: a header object
//! `{"n":..,"d":..,"l":..,"r_G":..,"strategy":..,"seed":..}` (plus `light` and
//! the derived parameters when known), then one
//! `{"t":..,"walk":[..],"choices":[..],"chosen":..,"height":..}` per ball.
//! Paths ending in `.gz` are gzip-compressed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationTrace, BallRecord, Strategy};
use crate::error::{Error, Result};
use crate::params::DerivedParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    #[serde(rename = "r_G")]
    pub r_g: usize,
    pub strategy: String,
    pub seed: u64,
    #[serde(default)]
    pub light: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<DerivedParams>,
}

impl TraceHeader {
    pub fn of(trace: &AllocationTrace) -> Self {
        TraceHeader {
            n: trace.n,
            d: trace.d,
            l: trace.strategy.l().unwrap_or(0),
            r_g: trace.strategy.spacing(),
            strategy: trace.strategy.to_string(),
            seed: trace.seed,
            light: trace.light,
            params: trace.params.clone(),
        }
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn writer(path: &Path) -> Result<Box<dyn Write>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(f);
    Ok(if is_gz(path) {
        Box::new(GzEncoder::new(w, Compression::default()))
    } else {
        Box::new(w)
    })
}

fn reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(GzDecoder::new(f)))
    } else {
        Box::new(BufReader::new(f))
    })
}

pub fn write_trace(trace: &AllocationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &TraceHeader::of(trace))?;
    w.write_all(b"\n").map_err(io)?;
    for b in &trace.balls {
        serde_json::to_writer(&mut w, b)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<AllocationTrace> {
    let path = path.as_ref();
    parse_trace(reader(path)?, path)
}

pub(crate) fn parse_trace(input: impl Read, path: &Path) -> Result<AllocationTrace> {
    let input = BufReader::new(input);
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = input.lines().enumerate();
    let header: TraceHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| perr(1, e.to_string()))?
        }
        None => return Err(perr(1, "empty trace".into())),
    };
    let strategy = Strategy::parse(&header.strategy, header.l, header.r_g)?;
    let mut loads = vec![0usize; header.n];
    let mut balls = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BallRecord = serde_json::from_str(&line).map_err(|e| perr(i + 1, e.to_string()))?;
        if rec.chosen >= header.n {
            return Err(perr(i + 1, format!("chosen node {} out of range", rec.chosen)));
        }
        loads[rec.chosen] += 1;
        balls.push(rec);
    }
    Ok(AllocationTrace {
        n: header.n,
        d: header.d,
        strategy,
        seed: header.seed,
        light: header.light,
        params: header.params,
        loads,
        balls,
    })
}

/// Writes the final load vector as `node,load` rows.
pub fn write_loads_csv(trace: &AllocationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "node,load").map_err(io)?;
    for (u, l) in trace.loads.iter().enumerate() {
        writeln!(w, "{u},{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}
