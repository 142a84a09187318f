//! Topological floor map: nodes with planar coordinates, directed corridor
//! edges and named roughness zones.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::MapError;
use crate::mapfile;

/// Default robot speed on a smooth floor at full charge, in m/s.
pub const DEFAULT_NOMINAL_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

/// A named set of edges sharing a floor condition. A factor of 1.0 is a
/// smooth floor; larger factors stretch travel times proportionally.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughnessZone {
    pub name: String,
    pub edges: BTreeSet<EdgeId>,
    pub factor: f64,
}

/// Validated, immutable graph `G = {V, E}` of the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMap {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    zones: Vec<RoughnessZone>,
    outgoing: Vec<Vec<EdgeId>>,
    lookup: BTreeMap<(NodeId, NodeId), EdgeId>,
}

impl TopologyMap {
    /// Builds a map and checks every structural invariant: dense node ids,
    /// valid endpoints, no self-loops, no duplicate or zero-length edges,
    /// well-formed zones and (undirected) connectivity.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        zones: Vec<RoughnessZone>,
    ) -> Result<Self, MapError> {
        if nodes.is_empty() {
            return Err(MapError::Empty);
        }
        for (position, node) in nodes.iter().enumerate() {
            if node.id.0 != position {
                return Err(MapError::NonDenseIds {
                    position,
                    id: node.id.0,
                });
            }
            if !node.x.is_finite() || !node.y.is_finite() {
                return Err(MapError::NonFiniteCoordinate { node: position });
            }
        }

        let mut lookup = BTreeMap::new();
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (index, edge) in edges.iter().enumerate() {
            for endpoint in [edge.from, edge.to] {
                if endpoint.0 >= nodes.len() {
                    return Err(MapError::UnknownNode {
                        edge: index,
                        node: endpoint.0,
                    });
                }
            }
            if edge.from == edge.to {
                return Err(MapError::SelfLoop {
                    edge: index,
                    node: edge.from.0,
                });
            }
            let (a, b) = (nodes[edge.from.0], nodes[edge.to.0]);
            if a.x == b.x && a.y == b.y {
                return Err(MapError::ZeroLengthEdge { edge: index });
            }
            if lookup.insert((edge.from, edge.to), EdgeId(index)).is_some() {
                return Err(MapError::DuplicateEdge {
                    edge: index,
                    from: edge.from.0,
                    to: edge.to.0,
                });
            }
            outgoing[edge.from.0].push(EdgeId(index));
        }

        let mut names = BTreeSet::new();
        for zone in &zones {
            if !names.insert(zone.name.clone()) {
                return Err(MapError::DuplicateZone {
                    zone: zone.name.clone(),
                });
            }
            if !zone.factor.is_finite() || zone.factor < 1.0 {
                return Err(MapError::BadZoneFactor {
                    zone: zone.name.clone(),
                    factor: zone.factor,
                });
            }
            if let Some(bad) = zone.edges.iter().find(|e| e.0 >= edges.len()) {
                return Err(MapError::BadZoneEdge {
                    zone: zone.name.clone(),
                    edge: bad.0,
                });
            }
        }

        let map = TopologyMap {
            nodes,
            edges,
            zones,
            outgoing,
            lookup,
        };
        map.check_connected()?;
        Ok(map)
    }

    fn check_connected(&self) -> Result<(), MapError> {
        let mut neighbours = vec![Vec::new(); self.nodes.len()];
        for edge in &self.edges {
            neighbours[edge.from.0].push(edge.to.0);
            neighbours[edge.to.0].push(edge.from.0);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for &next in &neighbours[n] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(node) => Err(MapError::Disconnected { node }),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn zones(&self) -> &[RoughnessZone] {
        &self.zones
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        node.0 < self.nodes.len()
    }

    pub fn edge(&self, edge: EdgeId) -> Edge {
        self.edges[edge.0]
    }

    pub fn node(&self, node: NodeId) -> Node {
        self.nodes[node.0]
    }

    /// Outgoing edges of `node`, in file order.
    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.outgoing[node.0]
    }

    pub fn find_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.lookup.get(&(from, to)).copied()
    }

    pub fn reverse(&self, edge: EdgeId) -> Option<EdgeId> {
        let e = self.edge(edge);
        self.find_edge(e.to, e.from)
    }

    pub fn zone(&self, name: &str) -> Option<&RoughnessZone> {
        self.zones.iter().find(|z| z.name == name)
    }

    /// Straight-line length of an edge in meters.
    pub fn edge_length(&self, edge: EdgeId) -> f64 {
        let e = self.edge(edge);
        let (a, b) = (self.node(e.from), self.node(e.to));
        libm::hypot(b.x - a.x, b.y - a.y)
    }

    /// Heuristic travel time of an edge: its length over the nominal speed.
    pub fn euclidean_cost(&self, edge: EdgeId, nominal_speed: f64) -> f64 {
        self.edge_length(edge) / nominal_speed
    }

    /// Roughness of an edge under the map's declared zone factors. An edge in
    /// several zones takes the largest factor.
    pub fn roughness(&self, edge: EdgeId) -> f64 {
        self.zones
            .iter()
            .filter(|z| z.edges.contains(&edge))
            .map(|z| z.factor)
            .fold(1.0, f64::max)
    }

    /// Directed hop counts from `source`; `None` for unreachable nodes.
    pub fn hop_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut hops = vec![None; self.nodes.len()];
        hops[source.0] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(n) = queue.pop_front() {
            let here = hops[n.0].unwrap_or(0);
            for &e in self.out_edges(n) {
                let to = self.edge(e).to;
                if hops[to.0].is_none() {
                    hops[to.0] = Some(here + 1);
                    queue.push_back(to);
                }
            }
        }
        hops
    }
}

/// The three bundled floor layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinMap {
    /// Winding racks: a serpentine of aisles.
    Map1,
    /// Randomly placed racks: an irregular mesh.
    Map2,
    /// Racks organised around a central hub.
    Map3,
}

impl BuiltinMap {
    pub const ALL: [BuiltinMap; 3] = [BuiltinMap::Map1, BuiltinMap::Map2, BuiltinMap::Map3];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMap::Map1 => "map1",
            BuiltinMap::Map2 => "map2",
            BuiltinMap::Map3 => "map3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Source text of the bundled map file.
    pub fn source(self) -> &'static str {
        match self {
            BuiltinMap::Map1 => include_str!("../maps/map1.map"),
            BuiltinMap::Map2 => include_str!("../maps/map2.map"),
            BuiltinMap::Map3 => include_str!("../maps/map3.map"),
        }
    }
}

pub fn builtin_map(which: BuiltinMap) -> TopologyMap {
    mapfile::parse(which.source()).expect("bundled map files are valid")
}
