// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Line-oriented topology format.
//!
//! ```text
//! # comment
//! node <id> <PE|P>
//! link   <from> <to> <capacity_bps> <delay_s> <metric>
//! bilink <a>    <b>  <capacity_bps> <delay_s> <metric>
//! ```
//!
//! `bilink` expands to two directed links with identical parameters. Node
//! ids must be unique and cover `0..n` exactly.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::{DirectedLink, NodeId, NodeRole, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("node {0} declared twice")]
    DuplicateNode(u32),
    #[error("node ids must be contiguous from 0, missing {0}")]
    MissingNode(u32),
    #[error("link references unknown node {0}")]
    UnknownNode(u32),
    #[error("duplicate link {0} -> {1}")]
    DuplicateLink(u32, u32),
    #[error("self loop on node {0}")]
    SelfLoop(u32),
    #[error("capacity must be positive and finite, got {0}")]
    NonPositiveCapacity(String),
    #[error("delay must be non-negative and finite, got {0}")]
    InvalidDelay(String),
    #[error("metric must be an integer >= 1, got {0}")]
    InvalidMetric(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Parse failure; `line` is 1-based, 0 when the problem is not tied to a line.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(line: usize, kind: ParseErrorKind) -> Self {
        ParseError { line, kind }
    }
}

struct RawLink {
    line: usize,
    from: u32,
    to: u32,
    capacity: f64,
    delay: f64,
    metric: u32,
    both: bool,
}

/// Parses and validates a topology document.
pub fn load_topology(document: &str) -> Result<Topology, ParseError> {
    let mut nodes: BTreeMap<u32, NodeRole> = BTreeMap::new();
    let mut raw_links = Vec::new();

    for (idx, raw) in document.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "node" => {
                if fields.len() != 3 {
                    return Err(ParseError::at(
                        line,
                        ParseErrorKind::Syntax("expected `node <id> <PE|P>`".into()),
                    ));
                }
                let id = parse_id(fields[1], line)?;
                let role = match fields[2] {
                    "PE" | "pe" => NodeRole::Pe,
                    "P" | "p" => NodeRole::P,
                    other => {
                        return Err(ParseError::at(
                            line,
                            ParseErrorKind::Syntax(format!("unknown role `{other}`")),
                        ))
                    }
                };
                if nodes.insert(id, role).is_some() {
                    return Err(ParseError::at(line, ParseErrorKind::DuplicateNode(id)));
                }
            }
            kw @ ("link" | "bilink") => {
                if fields.len() != 6 {
                    return Err(ParseError::at(
                        line,
                        ParseErrorKind::Syntax(format!(
                            "expected `{kw} <from> <to> <capacity_bps> <delay_s> <metric>`"
                        )),
                    ));
                }
                let from = parse_id(fields[1], line)?;
                let to = parse_id(fields[2], line)?;
                let capacity = fields[3]
                    .parse::<f64>()
                    .ok()
                    .filter(|c| c.is_finite() && *c > 0.0)
                    .ok_or_else(|| ParseError::at(line, ParseErrorKind::NonPositiveCapacity(fields[3].into())))?;
                let delay = fields[4]
                    .parse::<f64>()
                    .ok()
                    .filter(|d| d.is_finite() && *d >= 0.0)
                    .ok_or_else(|| ParseError::at(line, ParseErrorKind::InvalidDelay(fields[4].into())))?;
                let metric = fields[5]
                    .parse::<u32>()
                    .ok()
                    .filter(|m| *m >= 1)
                    .ok_or_else(|| ParseError::at(line, ParseErrorKind::InvalidMetric(fields[5].into())))?;
                raw_links.push(RawLink {
                    line,
                    from,
                    to,
                    capacity,
                    delay,
                    metric,
                    both: kw == "bilink",
                });
            }
            other => {
                return Err(ParseError::at(
                    line,
                    ParseErrorKind::Syntax(format!("unknown directive `{other}`")),
                ))
            }
        }
    }

    for (expected, id) in nodes.keys().enumerate() {
        if *id != expected as u32 {
            return Err(ParseError::at(0, ParseErrorKind::MissingNode(expected as u32)));
        }
    }
    let n = nodes.len() as u32;

    let mut seen = std::collections::HashSet::new();
    let mut links = Vec::with_capacity(raw_links.len() * 2);
    for rl in raw_links {
        for endpoint in [rl.from, rl.to] {
            if endpoint >= n {
                return Err(ParseError::at(rl.line, ParseErrorKind::UnknownNode(endpoint)));
            }
        }
        if rl.from == rl.to {
            return Err(ParseError::at(rl.line, ParseErrorKind::SelfLoop(rl.from)));
        }
        let dirs: &[(u32, u32)] = if rl.both {
            &[(rl.from, rl.to), (rl.to, rl.from)]
        } else {
            &[(rl.from, rl.to)]
        };
        for &(a, b) in dirs {
            if !seen.insert((a, b)) {
                return Err(ParseError::at(rl.line, ParseErrorKind::DuplicateLink(a, b)));
            }
            links.push(DirectedLink {
                from: NodeId(a),
                to: NodeId(b),
                capacity: rl.capacity,
                delay: rl.delay,
                base_metric: rl.metric,
            });
        }
    }

    Ok(Topology::new(nodes.into_values().collect(), links))
}

pub fn load_topology_file(path: &Path) -> Result<Topology, ParseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ParseError::at(0, ParseErrorKind::Io(format!("{}: {e}", path.display()))))?;
    load_topology(&text)
}

fn parse_id(field: &str, line: usize) -> Result<u32, ParseError> {
    field
        .parse::<u32>()
        .map_err(|_| ParseError::at(line, ParseErrorKind::Syntax(format!("invalid node id `{field}`"))))
}
