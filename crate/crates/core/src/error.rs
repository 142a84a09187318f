use alloc::string::String;

use thiserror::Error;

use crate::topomap::{EdgeId, NodeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("line {line}: {field}: {message}")]
    Parse {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("map has no nodes")]
    Empty,
    #[error("node at position {position} has id {id}; ids must be dense and ordered")]
    NonDenseIds { position: usize, id: usize },
    #[error("node {node}: coordinates must be finite")]
    NonFiniteCoordinate { node: usize },
    #[error("edge {edge}: endpoint {node} is not a node of this map")]
    UnknownNode { edge: usize, node: usize },
    #[error("edge {edge}: self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edge {edge}: duplicate of ({from}, {to})")]
    DuplicateEdge { edge: usize, from: usize, to: usize },
    #[error("edge {edge}: zero-length edge between coincident nodes")]
    ZeroLengthEdge { edge: usize },
    #[error("map is not connected: node {node} is unreachable from node 0")]
    Disconnected { node: usize },
    #[error("zone {zone:?}: roughness factor {factor} must be finite and >= 1.0")]
    BadZoneFactor { zone: String, factor: f64 },
    #[error("zone {zone:?}: edge index {edge} out of range")]
    BadZoneEdge { zone: String, edge: usize },
    #[error("zone {zone:?}: no edge ({from}, {to}) in map")]
    UnknownZoneEdge { zone: String, from: usize, to: usize },
    #[error("duplicate zone name {zone:?}")]
    DuplicateZone { zone: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("battery exhausted: soc {soc} cannot cover edge {edge:?} (needs {needed})")]
    BatteryExhausted { edge: EdgeId, soc: f64, needed: f64 },
    #[error("edge {0:?} is not part of the map")]
    InvalidEdge(EdgeId),
    #[error("unknown zone {0:?}")]
    UnknownZone(String),
    #[error("invalid roughness factor {0}")]
    BadFactor(f64),
    #[error("invalid world parameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("negative variance: {name} = {value}")]
    NegativeVariance { name: &'static str, value: f64 },
    #[error("initial mean must be positive and finite, got {0}")]
    NonPositiveMean(f64),
    #[error("invalid bilinear parameters: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no path from {origin:?} to {dest:?}")]
    NoPath { origin: NodeId, dest: NodeId },
    #[error("node {0:?} is not part of the map")]
    InvalidNode(NodeId),
    #[error("source and destination are both {0:?}")]
    SameEndpoints(NodeId),
    #[error("cost provider returned an invalid cost {cost} for edge {edge:?}")]
    BadCost { edge: EdgeId, cost: f64 },
    #[error("path does not belong to this map")]
    ForeignPath,
    #[error(transparent)]
    Sim(#[from] SimError),
}
