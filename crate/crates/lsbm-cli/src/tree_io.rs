//! Text format for labelled trees: a header, then one
//! `child parent label [type]` line per node. The root's parent and label
//! print as `-`.
//!
//! ```text
//! nodes 4 depth 2
//! 0 - - 1
//! 1 0 + 1
//! 2 0 - 0
//! 3 1 + 1
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use lsbm_core::graph::NodeType;
use lsbm_core::model::{LabelId, LabelSet};
use lsbm_core::tree::LabelledTree;

use crate::graph_io::ParseError;

fn io_err(path: &Path, e: std::io::Error) -> ParseError {
    ParseError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn line_err(path: &Path, line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Line {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn write_tree(tree: &LabelledTree, labels: &LabelSet, path: &Path) -> Result<(), ParseError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format!("nodes {} depth {}\n", tree.len(), tree.depth_cap()).as_bytes())
        .map_err(|e| io_err(path, e))?;
    for i in 0..tree.len() {
        let mut line = if i == 0 {
            "0 - -".to_string()
        } else {
            format!("{i} {} {}", tree.parent(i), labels.name(tree.label(i)))
        };
        if let Some(types) = tree.types() {
            line.push_str(&format!(" {}", types[i]));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_tree(path: &Path, labels: &LabelSet) -> Result<LabelledTree, ParseError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| line_err(path, 1, "empty file; expected `nodes <n> depth <d>`"))?;
    let header = header.map_err(|e| io_err(path, e))?;
    let (n, cap) = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["nodes", n, "depth", d] => {
            let n: usize = n
                .parse()
                .map_err(|_| line_err(path, 1, format!("bad node count {n:?}")))?;
            let d: u32 = d
                .parse()
                .map_err(|_| line_err(path, 1, format!("bad depth {d:?}")))?;
            (n, d)
        }
        _ => {
            return Err(line_err(
                path,
                1,
                format!("expected `nodes <n> depth <d>`, got {header:?}"),
            ))
        }
    };

    let mut parent = Vec::with_capacity(n);
    let mut edge_label = Vec::with_capacity(n);
    let mut types: Option<Vec<NodeType>> = None;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(line_err(
                path,
                lineno,
                format!("expected `child parent label [type]`, got {line:?}"),
            ));
        }
        let child: usize = fields[0]
            .parse()
            .map_err(|_| line_err(path, lineno, format!("bad node index {:?}", fields[0])))?;
        if child != parent.len() {
            return Err(line_err(
                path,
                lineno,
                format!("expected node {}, got {child}", parent.len()),
            ));
        }
        if child == 0 {
            if fields[1] != "-" || fields[2] != "-" {
                return Err(line_err(path, lineno, "root line must be `0 - -`"));
            }
            parent.push(0);
            edge_label.push(LabelId(0));
        } else {
            let p: u32 = fields[1]
                .parse()
                .map_err(|_| line_err(path, lineno, format!("bad parent {:?}", fields[1])))?;
            let label = labels
                .id_of(fields[2])
                .ok_or_else(|| line_err(path, lineno, format!("unknown label {:?}", fields[2])))?;
            parent.push(p);
            edge_label.push(label);
        }
        match (fields.len(), &mut types) {
            (4, slot) => {
                let t: u8 = fields[3]
                    .parse()
                    .map_err(|_| line_err(path, lineno, format!("bad type {:?}", fields[3])))?;
                slot.get_or_insert_with(Vec::new).push(t);
            }
            (3, Some(_)) => {
                return Err(line_err(path, lineno, "type column must appear on every line or none"));
            }
            _ => {}
        }
    }
    if parent.len() != n {
        return Err(line_err(
            path,
            0,
            format!("expected {n} node lines, found {}", parent.len()),
        ));
    }
    if let Some(t) = &types {
        if t.len() != n {
            return Err(line_err(path, 0, "type column must appear on every line or none"));
        }
    }
    LabelledTree::from_parts(parent, edge_label, types, cap, labels.len()).map_err(|e| {
        ParseError::Line {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        }
    })
}
