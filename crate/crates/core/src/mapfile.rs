//! Plain-text map format.
//!
//! A map document has three sections, each introduced by a header line:
//!
//! ```text
//! [nodes]
//! # id x y            (meters; ids dense from 0, in order)
//! 0 0.0 0.0
//! 1 0.5 0.0
//! [edges]
//! # from to           (directed; a two-way corridor is two lines)
//! 0 1
//! 1 0
//! [zones]
//! # name factor from-to from-to ...
//! moderate 1.5 0-1 1-0
//! ```
//!
//! Blank lines and `#` comments are ignored. Every data line must carry
//! exactly the fields shown; extra fields and unknown sections are errors.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use crate::error::MapError;
use crate::topomap::{Edge, EdgeId, Node, NodeId, RoughnessZone, TopologyMap};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Nodes,
    Edges,
    Zones,
}

fn field<T: FromStr>(
    line: usize,
    name: &'static str,
    token: Option<&str>,
) -> Result<T, MapError> {
    let token = token.ok_or_else(|| MapError::Parse {
        line,
        field: name,
        message: "missing".to_string(),
    })?;
    token.parse().map_err(|_| MapError::Parse {
        line,
        field: name,
        message: format!("cannot parse {token:?}"),
    })
}

fn no_more<'a>(line: usize, mut rest: impl Iterator<Item = &'a str>) -> Result<(), MapError> {
    match rest.next() {
        Some(extra) => Err(MapError::Parse {
            line,
            field: "line",
            message: format!("unexpected field {extra:?}"),
        }),
        None => Ok(()),
    }
}

/// Line number, name, factor and endpoint pairs of a zone as read.
type RawZone = (usize, String, f64, Vec<(usize, usize)>);

/// Parses and validates a map document.
pub fn parse(text: &str) -> Result<TopologyMap, MapError> {
    let mut section = None;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    // zone edges are resolved after all edges are known
    let mut raw_zones: Vec<RawZone> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = Some(match content {
                "[nodes]" => Section::Nodes,
                "[edges]" => Section::Edges,
                "[zones]" => Section::Zones,
                other => {
                    return Err(MapError::Parse {
                        line,
                        field: "section",
                        message: format!("unknown section {other}"),
                    })
                }
            });
            continue;
        }
        let mut tokens = content.split_whitespace();
        match section {
            None => {
                return Err(MapError::Parse {
                    line,
                    field: "section",
                    message: "data before the first section header".to_string(),
                })
            }
            Some(Section::Nodes) => {
                let id: usize = field(line, "id", tokens.next())?;
                let x: f64 = field(line, "x", tokens.next())?;
                let y: f64 = field(line, "y", tokens.next())?;
                no_more(line, tokens)?;
                nodes.push(Node { id: NodeId(id), x, y });
            }
            Some(Section::Edges) => {
                let from: usize = field(line, "from", tokens.next())?;
                let to: usize = field(line, "to", tokens.next())?;
                no_more(line, tokens)?;
                edges.push(Edge {
                    from: NodeId(from),
                    to: NodeId(to),
                });
            }
            Some(Section::Zones) => {
                let name: String = field(line, "name", tokens.next())?;
                let factor: f64 = field(line, "factor", tokens.next())?;
                let mut pairs = Vec::new();
                for token in tokens {
                    let (a, b) = token.split_once('-').ok_or_else(|| MapError::Parse {
                        line,
                        field: "zone edge",
                        message: format!("expected from-to, got {token:?}"),
                    })?;
                    pairs.push((field(line, "zone edge", Some(a))?, field(line, "zone edge", Some(b))?));
                }
                raw_zones.push((line, name, factor, pairs));
            }
        }
    }

    let mut zones = Vec::with_capacity(raw_zones.len());
    for (_line, name, factor, pairs) in raw_zones {
        let mut set = BTreeSet::new();
        for (from, to) in pairs {
            let position = edges
                .iter()
                .position(|e| e.from == NodeId(from) && e.to == NodeId(to))
                .ok_or_else(|| MapError::UnknownZoneEdge {
                    zone: name.clone(),
                    from,
                    to,
                })?;
            set.insert(EdgeId(position));
        }
        zones.push(RoughnessZone {
            name,
            edges: set,
            factor,
        });
    }

    TopologyMap::new(nodes, edges, zones)
}

/// Serializes a map so that [`parse`] reproduces it exactly.
pub fn to_text(map: &TopologyMap) -> String {
    let mut out = String::new();
    out.push_str("[nodes]\n");
    for node in map.nodes() {
        let _ = writeln!(out, "{} {:?} {:?}", node.id.0, node.x, node.y);
    }
    out.push_str("[edges]\n");
    for edge in map.edges() {
        let _ = writeln!(out, "{} {}", edge.from.0, edge.to.0);
    }
    out.push_str("[zones]\n");
    for zone in map.zones() {
        let _ = write!(out, "{} {:?}", zone.name, zone.factor);
        for e in &zone.edges {
            let edge = map.edge(*e);
            let _ = write!(out, " {}-{}", edge.from.0, edge.to.0);
        }
        out.push('\n');
    }
    out
}
