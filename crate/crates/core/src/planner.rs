//! Dijkstra's algorithm with edge costs evaluated during exploration.
//!
//! Costs are not fixed up front. When a node `u` is settled, the cost of
//! every outgoing edge is requested from a [`CostProvider`] together with
//! the depth of `u` in the search tree (`k = predecessors + 1`), the weight
//! of the edge that reached `u`, and the weights along the whole
//! predecessor chain. This lets a provider run a filter step per query.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PlanError, SimError};
use crate::kf_dynamic::{self, BilinearParams, BilinearState, XiMode};
use crate::kf_static::ScalarFilterState;
use crate::topomap::{EdgeId, NodeId, TopologyMap};
use crate::worldsim::{ObservationTable, SimWorld};
use crate::FilterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CostMode {
    Heuristic,
    StaticKf,
    DynamicKf,
}

impl CostMode {
    pub fn name(self) -> &'static str {
        match self {
            CostMode::Heuristic => "heuristic",
            CostMode::StaticKf => "static_kf",
            CostMode::DynamicKf => "dynamic_kf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [CostMode::Heuristic, CostMode::StaticKf, CostMode::DynamicKf]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

/// Everything a provider may use to price edge `from -> to`.
#[derive(Debug, Clone, Copy)]
pub struct CostQuery<'a> {
    pub edge: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    /// Number of predecessors of `from` back to the source, plus one.
    pub depth: u32,
    /// Weight of the edge that reached `from`; zero at the source.
    pub pred_weight: f64,
    /// Weights of the predecessor chain of `from`, source first.
    pub chain: &'a [f64],
}

pub trait CostProvider {
    fn mode(&self) -> CostMode;

    /// Called once at the start of every search.
    fn begin_search(&mut self) {}

    /// Cost of the queried edge in seconds; must be finite and positive.
    fn cost(&mut self, map: &TopologyMap, query: &CostQuery<'_>) -> Result<f64, PlanError>;

    /// Feeds back a driven path so the provider can learn from it.
    fn record_execution(&mut self, _map: &TopologyMap, _path: &PathResult) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCost {
    pub edge: EdgeId,
    pub planned: f64,
    /// Ground-truth travel time once driven.
    pub executed: Option<f64>,
    /// Measured (noisy) travel time once driven.
    pub observed: Option<f64>,
}

/// A planned path `P = <a_ab, a_bc, ...>` with its costs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub source: NodeId,
    pub dest: NodeId,
    pub per_edge: Vec<EdgeCost>,
    pub planned_cost: f64,
    pub executed_cost: f64,
    /// The battery ran out before the path was completed.
    pub exhausted: bool,
}

impl PathResult {
    pub fn edges(&self) -> Vec<EdgeId> {
        self.per_edge.iter().map(|e| e.edge).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.per_edge.iter().all(|e| e.executed.is_some())
    }

    /// Sum of measured travel times of the driven edges.
    pub fn observed_cost(&self) -> f64 {
        self.per_edge.iter().filter_map(|e| e.observed).sum()
    }
}

/// Shortest-path tree produced by [`search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    pub source: NodeId,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<EdgeId>>,
    /// Weight of `pred[v]` as it was queried.
    pub pred_weight: Vec<f64>,
    pub settled: Vec<bool>,
    /// Every cost queried during the search, keyed by edge and depth.
    pub queried: BTreeMap<(EdgeId, u32), f64>,
}

impl SearchTree {
    /// Edge weights along the predecessor chain of `node`, source first.
    pub fn chain(&self, map: &TopologyMap, node: NodeId) -> Vec<f64> {
        let mut weights = Vec::new();
        let mut at = node;
        while let Some(e) = self.pred[at.0] {
            weights.push(self.pred_weight[at.0]);
            at = map.edge(e).from;
        }
        weights.reverse();
        weights
    }

    pub fn path_edges(&self, map: &TopologyMap, node: NodeId) -> Vec<EdgeId> {
        let mut edges = Vec::new();
        let mut at = node;
        while let Some(e) = self.pred[at.0] {
            edges.push(e);
            at = map.edge(e).from;
        }
        edges.reverse();
        edges
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // reversed: BinaryHeap is a max-heap; smallest distance, then smallest
    // node index, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Runs Dijkstra from `source`, stopping once `stop_at` is settled (or
/// exhausting the graph when `None`).
pub fn search(
    map: &TopologyMap,
    source: NodeId,
    stop_at: Option<NodeId>,
    provider: &mut dyn CostProvider,
) -> Result<SearchTree, PlanError> {
    if !map.contains_node(source) {
        return Err(PlanError::InvalidNode(source));
    }
    let n = map.node_count();
    let mut tree = SearchTree {
        source,
        dist: vec![f64::INFINITY; n],
        pred: vec![None; n],
        pred_weight: vec![0.0; n],
        settled: vec![false; n],
        queried: BTreeMap::new(),
    };
    provider.begin_search();
    tree.dist[source.0] = 0.0;
    let mut heap = BinaryHeap::from([Frontier {
        dist: 0.0,
        node: source.0,
    }]);
    let mut depth = vec![0u32; n];

    while let Some(Frontier { dist, node }) = heap.pop() {
        if tree.settled[node] || dist > tree.dist[node] {
            continue;
        }
        tree.settled[node] = true;
        let u = NodeId(node);
        if stop_at == Some(u) {
            break;
        }
        let k = depth[node] + 1;
        let chain = tree.chain(map, u);
        let pred_weight = chain.last().copied().unwrap_or(0.0);
        for &e in map.out_edges(u) {
            let v = map.edge(e).to;
            if tree.settled[v.0] {
                continue;
            }
            let w = match tree.queried.get(&(e, k)) {
                Some(&w) => w,
                None => {
                    let query = CostQuery {
                        edge: e,
                        from: u,
                        to: v,
                        depth: k,
                        pred_weight,
                        chain: &chain,
                    };
                    let w = provider.cost(map, &query)?;
                    if !(w.is_finite() && w > 0.0) {
                        return Err(PlanError::BadCost { edge: e, cost: w });
                    }
                    tree.queried.insert((e, k), w);
                    w
                }
            };
            let candidate = tree.dist[node] + w;
            let better = candidate < tree.dist[v.0]
                || (candidate == tree.dist[v.0]
                    && tree.pred[v.0].is_some_and(|p| node < map.edge(p).from.0));
            if better {
                tree.dist[v.0] = candidate;
                tree.pred[v.0] = Some(e);
                tree.pred_weight[v.0] = w;
                depth[v.0] = k;
                heap.push(Frontier {
                    dist: candidate,
                    node: v.0,
                });
            }
        }
    }
    Ok(tree)
}

pub fn shortest_path(
    map: &TopologyMap,
    source: NodeId,
    dest: NodeId,
    provider: &mut dyn CostProvider,
) -> Result<PathResult, PlanError> {
    for node in [source, dest] {
        if !map.contains_node(node) {
            return Err(PlanError::InvalidNode(node));
        }
    }
    if source == dest {
        return Err(PlanError::SameEndpoints(source));
    }
    let tree = search(map, source, Some(dest), provider)?;
    if !tree.settled[dest.0] {
        return Err(PlanError::NoPath { origin: source, dest });
    }
    let edges = tree.path_edges(map, dest);
    let chain = tree.chain(map, dest);
    let per_edge: Vec<EdgeCost> = edges
        .into_iter()
        .zip(chain)
        .map(|(edge, planned)| EdgeCost {
            edge,
            planned,
            executed: None,
            observed: None,
        })
        .collect();
    let planned_cost = per_edge.iter().fold(0.0, |acc, e| acc + e.planned);
    Ok(PathResult {
        source,
        dest,
        per_edge,
        planned_cost,
        executed_cost: 0.0,
        exhausted: false,
    })
}

fn check_path(map: &TopologyMap, path: &PathResult) -> Result<(), PlanError> {
    let mut at = path.source;
    for e in &path.per_edge {
        if e.edge.0 >= map.edge_count() || map.edge(e.edge).from != at {
            return Err(PlanError::ForeignPath);
        }
        at = map.edge(e.edge).to;
    }
    if !path.per_edge.is_empty() && at != path.dest {
        return Err(PlanError::ForeignPath);
    }
    Ok(())
}

/// Drives `path` in `world` from its first edge. On battery exhaustion the
/// returned path is partial and flagged; see [`continue_path`].
pub fn execute_path(world: &mut SimWorld, path: &PathResult) -> Result<PathResult, PlanError> {
    check_path(world.map(), path)?;
    let mut driven = path.clone();
    for e in &mut driven.per_edge {
        e.executed = None;
        e.observed = None;
    }
    driven.executed_cost = 0.0;
    world.start_path();
    continue_path(world, &mut driven)?;
    Ok(driven)
}

/// Drives the not-yet-driven tail of `path`. Returns whether the path is
/// now complete.
pub fn continue_path(world: &mut SimWorld, path: &mut PathResult) -> Result<bool, PlanError> {
    path.exhausted = false;
    for e in path.per_edge.iter_mut().filter(|e| e.executed.is_none()) {
        match world.traverse(e.edge) {
            Ok(record) => {
                e.executed = Some(record.true_time);
                e.observed = Some(record.observed_time);
                path.executed_cost += record.true_time;
            }
            Err(SimError::BatteryExhausted { .. }) => {
                path.exhausted = true;
                return Ok(false);
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(true)
}

/// Euclidean heuristic: length over nominal speed, independent of `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicCost {
    pub nominal_speed: f64,
}

impl CostProvider for HeuristicCost {
    fn mode(&self) -> CostMode {
        CostMode::Heuristic
    }

    fn cost(&mut self, map: &TopologyMap, query: &CostQuery<'_>) -> Result<f64, PlanError> {
        Ok(map.euclidean_cost(query.edge, self.nominal_speed))
    }
}

/// Which step index feeds the static filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KMode {
    /// `k` is the edge's own traversal count plus one.
    #[default]
    PerEdge,
    /// `k` is the search depth of the edge's tail node.
    PathDepth,
}

/// Scalar Kalman filter per edge, corrected with offline table entries.
///
/// Queries are evaluated on a copy of the edge's filter. The corrected
/// state is committed only for edges that are actually driven.
#[derive(Debug, Clone)]
pub struct StaticKfCost {
    table: Arc<ObservationTable>,
    bank: Vec<ScalarFilterState>,
    pending: BTreeMap<EdgeId, ScalarFilterState>,
    k_mode: KMode,
    clamped_lookups: usize,
}

impl StaticKfCost {
    /// One filter per edge, each starting from the edge's heuristic cost.
    pub fn new(
        map: &TopologyMap,
        table: Arc<ObservationTable>,
        nominal_speed: f64,
        p0: f64,
        sigma2_omega: f64,
        sigma2_eta: f64,
        k_mode: KMode,
    ) -> Result<Self, FilterError> {
        let bank = (0..map.edge_count())
            .map(|e| {
                ScalarFilterState::init(
                    map.euclidean_cost(EdgeId(e), nominal_speed),
                    p0,
                    sigma2_omega,
                    sigma2_eta,
                )
            })
            .collect::<Result<_, _>>()?;
        Ok(StaticKfCost {
            table,
            bank,
            pending: BTreeMap::new(),
            k_mode,
            clamped_lookups: 0,
        })
    }

    pub fn bank(&self) -> &[ScalarFilterState] {
        &self.bank
    }

    /// Number of table lookups that fell past the recorded `k` range.
    pub fn clamped_lookups(&self) -> usize {
        self.clamped_lookups
    }
}

impl CostProvider for StaticKfCost {
    fn mode(&self) -> CostMode {
        CostMode::StaticKf
    }

    fn begin_search(&mut self) {
        self.pending.clear();
    }

    fn cost(&mut self, _map: &TopologyMap, query: &CostQuery<'_>) -> Result<f64, PlanError> {
        let filter = self.bank[query.edge.0];
        let k = match self.k_mode {
            KMode::PerEdge => filter.k + 1,
            KMode::PathDepth => query.depth,
        };
        let next = match self.table.lookup_clamped(query.edge, k) {
            Some((y, clamped)) => {
                self.clamped_lookups += usize::from(clamped);
                filter.update(y).state
            }
            None => filter,
        };
        self.pending.insert(query.edge, next);
        Ok(next.x_hat)
    }

    fn record_execution(&mut self, _map: &TopologyMap, path: &PathResult) {
        for e in path.per_edge.iter().filter(|e| e.executed.is_some()) {
            if let Some(state) = self.pending.remove(&e.edge) {
                self.bank[e.edge.0] = state;
            }
        }
    }
}

/// Bilinear Kalman filter per edge, learning from driven paths.
///
/// A query loads the predecessor chain of the tail node (with a leading
/// zero standing for the source) into a copy of the edge's state and
/// estimates the edge, correcting with the edge's latest measurement when
/// one exists. After a path is driven, each driven edge's state is
/// advanced with its measured time and the measured times before it.
#[derive(Debug, Clone)]
pub struct DynamicKfCost {
    params: BilinearParams,
    states: Vec<BilinearState>,
    last_observed: Vec<Option<f64>>,
    xi_mode: XiMode,
    rng: ChaCha8Rng,
}

impl DynamicKfCost {
    pub fn new(
        map: &TopologyMap,
        params: BilinearParams,
        nominal_speed: f64,
        p0: f64,
        xi_mode: XiMode,
        seed: u64,
    ) -> Self {
        let states = (0..map.edge_count())
            .map(|e| BilinearState::new(&params, map.euclidean_cost(EdgeId(e), nominal_speed), p0))
            .collect();
        DynamicKfCost {
            params,
            states,
            last_observed: vec![None; map.edge_count()],
            xi_mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn params(&self) -> &BilinearParams {
        &self.params
    }

    pub fn state(&self, edge: EdgeId) -> &BilinearState {
        &self.states[edge.0]
    }

    pub fn last_observed(&self, edge: EdgeId) -> Option<f64> {
        self.last_observed[edge.0]
    }
}

impl CostProvider for DynamicKfCost {
    fn mode(&self) -> CostMode {
        CostMode::DynamicKf
    }

    fn cost(&mut self, _map: &TopologyMap, query: &CostQuery<'_>) -> Result<f64, PlanError> {
        let mut state = self.states[query.edge.0].clone();
        let mut history = Vec::with_capacity(query.chain.len() + 1);
        history.push(0.0);
        history.extend_from_slice(query.chain);
        state.load_window(&self.params, &history);
        let xi = self.xi_mode.input(&self.params, &mut self.rng);
        Ok(kf_dynamic::estimate_edge(
            &self.params,
            &state,
            self.last_observed[query.edge.0],
            xi,
        ))
    }

    fn record_execution(&mut self, _map: &TopologyMap, path: &PathResult) {
        let mut history = vec![0.0];
        for e in &path.per_edge {
            let Some(y) = e.observed else { break };
            let state = &mut self.states[e.edge.0];
            state.load_window(&self.params, &history);
            if state.filled() >= self.params.regression_no() {
                let xi = self.xi_mode.input(&self.params, &mut self.rng);
                let prior = kf_dynamic::predict(&self.params, state, xi);
                *state = kf_dynamic::update(&self.params, state, prior, y).state;
            } else {
                state.absorb(y);
            }
            self.last_observed[e.edge.0] = Some(y);
            history.push(y);
        }
    }
}
