//! Text formats for graphs, marginals and type assignments.
//!
//! Edge list (UTF-8, newline-delimited, space-separated):
//!
//! ```text
//! n 5000
//! 0 17 +
//! 0 243 -
//! ```
//!
//! one `u v label` triple per edge with 0-based indices and `u < v`, in
//! deterministic (sorted) order. Hidden ground-truth types live in a
//! separate companion file of `node type` lines so that inference runs
//! never have to open them:
//!
//! ```text
//! 0 1
//! 1 0
//! ```
//!
//! Marginal and estimated-type outputs use the same `node value` shape.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use lsbm_core::bp::Marginals;
use lsbm_core::graph::{GraphError, LabelledEdge, LabelledGraph, NodeType};
use lsbm_core::model::LabelSet;

use crate::textfmt::sig9;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{path}:{line}: {msg}")]
    Line {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Graph {
        path: String,
        #[source]
        source: GraphError,
    },
}

impl ParseError {
    fn at(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        ParseError::Line {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        ParseError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Writes the edge list to `edges_path` and, when the graph carries types
/// and a companion path is given, the `node type` file next to it.
pub fn write_graph(
    graph: &LabelledGraph,
    labels: &LabelSet,
    edges_path: &Path,
    types_path: Option<&Path>,
) -> Result<(), ParseError> {
    let file = File::create(edges_path).map_err(|e| ParseError::io(edges_path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, s: String| {
        w.write_all(s.as_bytes())
            .map_err(|e| ParseError::io(edges_path, e))
    };
    put(&mut w, format!("n {}\n", graph.n()))?;
    for e in graph.edges() {
        put(&mut w, format!("{} {} {}\n", e.u, e.v, labels.name(e.label)))?;
    }
    w.flush().map_err(|e| ParseError::io(edges_path, e))?;

    if let (Some(types), Some(path)) = (graph.types(), types_path) {
        write_types(path, types)?;
    }
    Ok(())
}

/// Reads an edge list (and optionally its companion types file) back into a
/// graph. Malformed lines, out-of-range indices, self-loops and unknown
/// labels are reported with their line number.
pub fn read_graph(
    edges_path: &Path,
    types_path: Option<&Path>,
    labels: &LabelSet,
) -> Result<LabelledGraph, ParseError> {
    let file = File::open(edges_path).map_err(|e| ParseError::io(edges_path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| ParseError::at(edges_path, 1, "empty file; expected `n <count>` header"))?;
    let header = header.map_err(|e| ParseError::io(edges_path, e))?;
    let n: usize = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["n", count] => count
            .parse()
            .map_err(|_| ParseError::at(edges_path, 1, format!("bad node count {count:?}")))?,
        _ => {
            return Err(ParseError::at(
                edges_path,
                1,
                format!("expected `n <count>` header, got {header:?}"),
            ))
        }
    };

    let mut edges: Vec<LabelledEdge> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| ParseError::io(edges_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, v, label] = fields[..] else {
            return Err(ParseError::at(
                edges_path,
                lineno,
                format!("expected `u v label`, got {line:?}"),
            ));
        };
        let u: u32 = u
            .parse()
            .map_err(|_| ParseError::at(edges_path, lineno, format!("bad node index {u:?}")))?;
        let v: u32 = v
            .parse()
            .map_err(|_| ParseError::at(edges_path, lineno, format!("bad node index {v:?}")))?;
        if u == v {
            return Err(ParseError::at(edges_path, lineno, format!("self-loop ({u}, {v})")));
        }
        if u > v {
            return Err(ParseError::at(
                edges_path,
                lineno,
                format!("endpoints must satisfy u < v, got ({u}, {v})"),
            ));
        }
        if v as usize >= n {
            return Err(ParseError::at(
                edges_path,
                lineno,
                format!("node index {v} out of range for n = {n}"),
            ));
        }
        let label = labels.id_of(label).ok_or_else(|| {
            ParseError::at(edges_path, lineno, format!("unknown label {label:?}"))
        })?;
        edges.push(LabelledEdge { u, v, label });
    }

    let types = match types_path {
        Some(path) => Some(read_types(path, n)?),
        None => None,
    };

    LabelledGraph::new(n, types, edges, labels.len()).map_err(|e| ParseError::Graph {
        path: edges_path.display().to_string(),
        source: e,
    })
}

/// Writes `node type` lines.
pub fn write_types(path: &Path, types: &[NodeType]) -> Result<(), ParseError> {
    let file = File::create(path).map_err(|e| ParseError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, t) in types.iter().enumerate() {
        w.write_all(format!("{i} {t}\n").as_bytes())
            .map_err(|e| ParseError::io(path, e))?;
    }
    w.flush().map_err(|e| ParseError::io(path, e))
}

/// Reads `node type` lines; nodes must appear in order 0..n-1.
pub fn read_types(path: &Path, n: usize) -> Result<Vec<NodeType>, ParseError> {
    let file = File::open(path).map_err(|e| ParseError::io(path, e))?;
    let mut types = Vec::with_capacity(n);
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| ParseError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [node, value] = fields[..] else {
            return Err(ParseError::at(path, lineno, format!("expected `node type`, got {line:?}")));
        };
        let node: usize = node
            .parse()
            .map_err(|_| ParseError::at(path, lineno, format!("bad node index {node:?}")))?;
        if node != types.len() {
            return Err(ParseError::at(
                path,
                lineno,
                format!("expected node {}, got {node}", types.len()),
            ));
        }
        let value: u8 = value
            .parse()
            .map_err(|_| ParseError::at(path, lineno, format!("bad type {value:?}")))?;
        if value > 1 {
            return Err(ParseError::at(path, lineno, format!("type must be 0 or 1, got {value}")));
        }
        types.push(value);
    }
    if types.len() != n {
        return Err(ParseError::at(
            path,
            0,
            format!("expected {n} type lines, found {}", types.len()),
        ));
    }
    Ok(types)
}

/// Writes `node value` lines with nine-significant-digit marginals.
pub fn write_marginals(path: &Path, marginals: &Marginals) -> Result<(), ParseError> {
    let file = File::create(path).map_err(|e| ParseError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, p) in marginals.probs().iter().enumerate() {
        w.write_all(format!("{i} {}\n", sig9(*p)).as_bytes())
            .map_err(|e| ParseError::io(path, e))?;
    }
    w.flush().map_err(|e| ParseError::io(path, e))
}
