//! Line-oriented text formats.
//!
//! All formats ignore blank lines and lines starting with `#`. Node ids are
//! 0-based integers. Floating-point values are written with 17 significant
//! digits so that they read back bit-for-bit.
//!
//! * edge list: `source<TAB>target<TAB>weight`
//! * visit log: one session per line, comma-separated ids, e.g. `3,7,7,2`
//! * visit counts: a `nodes<TAB>n` header, then exactly `n` lines
//!   `i<TAB>visits<TAB>terminations` in node order, then any number of
//!   transition lines `i<TAB>j<TAB>count`
//! * per-node values (damping, start distribution): `i<TAB>value`, one
//!   line per node
//! * labels: `id<TAB>label`

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{DampingVector, RowStochasticMatrix};
use crate::ingestion::{IngestError, VisitCounts, VisitLog};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no value for node {0}")]
    MissingNode(usize),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Yields `(1-based line number, trimmed content)` for data lines.
fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(k, line)| match line {
            Err(e) => Some(Err(e.into())),
            Ok(l) => {
                let t = l.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((k + 1, t.to_owned())))
                }
            }
        })
}

fn field<T: FromStr>(line: usize, raw: Option<&str>, what: &str) -> Result<T, FormatError> {
    let raw = raw.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{raw}`")))
}

fn expect_end(line: usize, mut rest: std::str::Split<'_, char>) -> Result<(), FormatError> {
    match rest.next() {
        None => Ok(()),
        Some(extra) => Err(parse_err(line, format!("unexpected field `{extra}`"))),
    }
}

/// Parsed edge list with the node count implied by the largest id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<(usize, usize, f64)>,
    pub inferred_n: usize,
}

pub fn read_edge_list<R: BufRead>(reader: R) -> Result<EdgeList, FormatError> {
    let mut edges = Vec::new();
    let mut inferred_n = 0;
    for item in data_lines(reader) {
        let (line, text) = item?;
        let mut parts = text.split('\t');
        let source: usize = field(line, parts.next(), "source")?;
        let target: usize = field(line, parts.next(), "target")?;
        let weight: f64 = field(line, parts.next(), "weight")?;
        expect_end(line, parts)?;
        inferred_n = inferred_n.max(source.max(target) + 1);
        edges.push((source, target, weight));
    }
    Ok(EdgeList { edges, inferred_n })
}

/// Writes the stored entries of `w` as an edge list.
pub fn write_matrix<W: Write>(w: &RowStochasticMatrix, mut out: W) -> io::Result<()> {
    for (i, j, x) in w.triplets() {
        writeln!(out, "{i}\t{j}\t{}", format_float(x))?;
    }
    Ok(())
}

pub fn read_visit_log<R: BufRead>(reader: R) -> Result<VisitLog, FormatError> {
    let mut sessions = Vec::new();
    for item in data_lines(reader) {
        let (line, text) = item?;
        let session = text
            .split(',')
            .map(|id| field(line, Some(id), "node id"))
            .collect::<Result<Vec<usize>, _>>()?;
        sessions.push(session);
    }
    Ok(VisitLog::new(sessions)?)
}

pub fn write_visit_log<W: Write>(log: &VisitLog, mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for session in log.sessions() {
        line.clear();
        for (k, id) in session.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&id.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_counts<W: Write>(counts: &VisitCounts, mut out: W) -> io::Result<()> {
    writeln!(out, "nodes\t{}", counts.n())?;
    for i in 0..counts.n() {
        writeln!(out, "{i}\t{}\t{}", counts.visits()[i], counts.terminations()[i])?;
    }
    for i in 0..counts.n() {
        for (j, c) in counts.transitions(i) {
            writeln!(out, "{i}\t{j}\t{c}")?;
        }
    }
    Ok(())
}

pub fn read_counts<R: BufRead>(reader: R) -> Result<VisitCounts, FormatError> {
    let mut lines = data_lines(reader);
    let (line, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(0, "empty counts file"))?;
    let mut parts = header.split('\t');
    if parts.next() != Some("nodes") {
        return Err(parse_err(line, "expected `nodes<TAB>n` header"));
    }
    let n: usize = field(line, parts.next(), "node count")?;
    expect_end(line, parts)?;

    let mut visits = Vec::with_capacity(n);
    let mut terminations = Vec::with_capacity(n);
    for i in 0..n {
        let (line, text) = lines
            .next()
            .transpose()?
            .ok_or_else(|| parse_err(0, format!("missing node line for node {i}")))?;
        let mut parts = text.split('\t');
        let id: usize = field(line, parts.next(), "node id")?;
        if id != i {
            return Err(parse_err(line, format!("expected node {i}, found {id}")));
        }
        visits.push(field(line, parts.next(), "visit count")?);
        terminations.push(field(line, parts.next(), "termination count")?);
        expect_end(line, parts)?;
    }

    let mut transitions = vec![BTreeMap::new(); n];
    for item in lines {
        let (line, text) = item?;
        let mut parts = text.split('\t');
        let i: usize = field(line, parts.next(), "source")?;
        let j: usize = field(line, parts.next(), "target")?;
        let c: u64 = field(line, parts.next(), "count")?;
        expect_end(line, parts)?;
        if i >= n || j >= n {
            return Err(parse_err(line, format!("transition {i} -> {j} out of range for n = {n}")));
        }
        if transitions[i].insert(j, c).is_some() {
            return Err(parse_err(line, format!("duplicate transition {i} -> {j}")));
        }
    }
    Ok(VisitCounts::from_parts(visits, terminations, transitions)?)
}

pub fn write_damping<W: Write>(a: &DampingVector, mut out: W) -> io::Result<()> {
    for (i, x) in a.values().iter().enumerate() {
        writeln!(out, "{i}\t{}", format_float(*x))?;
    }
    Ok(())
}

/// Reads `i<TAB>value` lines, such as a damping file or a start
/// distribution. Every node in `0..n` must appear exactly once.
pub fn read_node_values<R: BufRead>(reader: R, n: usize) -> Result<Vec<f64>, FormatError> {
    let mut values = vec![None; n];
    for item in data_lines(reader) {
        let (line, text) = item?;
        let mut parts = text.split('\t');
        let i: usize = field(line, parts.next(), "node id")?;
        let a: f64 = field(line, parts.next(), "value")?;
        expect_end(line, parts)?;
        let slot = values
            .get_mut(i)
            .ok_or_else(|| parse_err(line, format!("node {i} out of range for n = {n}")))?;
        if slot.replace(a).is_some() {
            return Err(parse_err(line, format!("node {i} listed twice")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(FormatError::MissingNode(i)))
        .collect()
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<BTreeMap<usize, String>, FormatError> {
    let mut labels = BTreeMap::new();
    for item in data_lines(reader) {
        let (line, text) = item?;
        let (id, label) = text
            .split_once('\t')
            .ok_or_else(|| parse_err(line, "expected `id<TAB>label`"))?;
        labels.insert(field(line, Some(id), "node id")?, label.to_owned());
    }
    Ok(labels)
}
