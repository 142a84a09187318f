//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the code under test except to build inputs.

#![allow(dead_code)]

use std::collections::BTreeSet;

use kfroute_core::topomap::{Edge, Node};
use kfroute_core::{NodeId, TopologyMap};
use rand::Rng;

/// Direct evaluation of the bilinear recursion for `X(m)`.
///
/// `xi_past[i - 1]` is `xi(m - i)` and `x_past[z - 1]` is `X(m - z)`.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_step(
    mu: f64,
    phi: &[f64],
    b: &[f64],
    c: &[Vec<f64>],
    xi_now: f64,
    xi_past: &[f64],
    x_past: &[f64],
    omega: f64,
) -> f64 {
    let mut x = mu + xi_now + omega;
    for i in 0..phi.len() {
        x -= phi[i] * x_past[i];
    }
    for r in 0..b.len() {
        x += b[r] * xi_past[r];
        for z in 0..x_past.len() {
            x += c[r][z] * xi_past[r] * x_past[z];
        }
    }
    x
}

/// Textbook Kalman measurement update for a scalar observation `y = h.x`
/// on plain nested vectors.
pub fn dense_update(
    x: &[f64],
    p: &[Vec<f64>],
    h: &[f64],
    r2: f64,
    y: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let ph: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[i][j] * h[j]).sum()).collect();
    let s: f64 = (0..n).map(|i| h[i] * ph[i]).sum::<f64>() + r2;
    let k: Vec<f64> = ph.iter().map(|v| v / s).collect();
    let innovation = y - (0..n).map(|i| h[i] * x[i]).sum::<f64>();
    let x_new = (0..n).map(|i| x[i] + k[i] * innovation).collect();
    // (I - K H) P
    let mut ikh = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            ikh[i][j] = f64::from(u8::from(i == j)) - k[i] * h[j];
        }
    }
    let p_new = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|l| ikh[i][l] * p[l][j]).sum())
                .collect()
        })
        .collect();
    (x_new, p_new)
}

/// Random symmetric positive definite matrix `A A^T + eps I`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n).map(|l| a[i][l] * a[j][l]).sum::<f64>()
                        + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

/// Connected random graph: a random spanning tree plus `extra` chords,
/// every link in both directions. Coordinates are random and distinct.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, extra: usize) -> TopologyMap {
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: NodeId(i),
            x: i as f64 + rng.random_range(0.0..0.5),
            y: rng.random_range(0.0..10.0),
        })
        .collect();
    let mut links = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        links.insert((u, v));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            links.insert((u.min(v), u.max(v)));
        }
    }
    let mut edges = Vec::new();
    for (u, v) in links {
        edges.push(Edge { from: NodeId(u), to: NodeId(v) });
        edges.push(Edge { from: NodeId(v), to: NodeId(u) });
    }
    TopologyMap::new(nodes, edges, vec![]).expect("random graph is valid")
}

/// Cheapest simple path cost by exhaustive depth-first enumeration.
pub fn brute_force_cost(map: &TopologyMap, weights: &[f64], source: usize, dest: usize) -> f64 {
    fn walk(
        map: &TopologyMap,
        weights: &[f64],
        at: usize,
        dest: usize,
        visited: &mut Vec<bool>,
        cost: f64,
        best: &mut f64,
    ) {
        if at == dest {
            *best = best.min(cost);
            return;
        }
        for &e in map.out_edges(NodeId(at)) {
            let v = map.edge(e).to.0;
            if !visited[v] {
                visited[v] = true;
                walk(map, weights, v, dest, visited, cost + weights[e.0], best);
                visited[v] = false;
            }
        }
    }
    let mut visited = vec![false; map.node_count()];
    visited[source] = true;
    let mut best = f64::INFINITY;
    walk(map, weights, source, dest, &mut visited, 0.0, &mut best);
    best
}

/// Paths chosen by a dynamic planner on map1 before and after a second
/// stretch of floor turns rough.
pub struct Avoidance {
    pub heuristic: Vec<kfroute_core::EdgeId>,
    pub warm: Vec<kfroute_core::EdgeId>,
    pub after_change: Vec<kfroute_core::EdgeId>,
    pub moderate: std::collections::BTreeSet<kfroute_core::EdgeId>,
    pub light: std::collections::BTreeSet<kfroute_core::EdgeId>,
}

impl Avoidance {
    pub fn count(path: &[kfroute_core::EdgeId], zone: &BTreeSet<kfroute_core::EdgeId>) -> usize {
        path.iter().filter(|e| zone.contains(e)).count()
    }

    /// The warm planner left the moderate zone, and after the bottom row
    /// degraded it left that row too.
    pub fn passed(&self) -> bool {
        Self::count(&self.heuristic, &self.moderate) > 0
            && Self::count(&self.warm, &self.moderate) == 0
            && Self::count(&self.after_change, &self.moderate) == 0
            && Self::count(&self.after_change, &self.light) == 0
    }
}

pub fn avoidance(regression_no: usize, seed: u64) -> Avoidance {
    use kfroute_core::kf_dynamic::{BilinearParams, XiMode};
    use kfroute_core::planner::{
        continue_path, execute_path, shortest_path, CostProvider, DynamicKfCost, HeuristicCost,
    };
    use kfroute_core::topomap::RoughnessZone;
    use kfroute_core::worldsim::{SimWorld, WorldParams};
    use kfroute_core::{builtin_map, BuiltinMap};
    use std::sync::Arc;

    let base = builtin_map(BuiltinMap::Map1);
    let mut light = BTreeSet::new();
    for c in 1..6 {
        for (a, b) in [(32 + c, 33 + c), (33 + c, 32 + c)] {
            light.insert(base.find_edge(NodeId(a), NodeId(b)).expect("bottom row edge"));
        }
    }
    let mut zones = base.zones().to_vec();
    zones.push(RoughnessZone { name: "light".into(), edges: light.clone(), factor: 1.2 });
    let map = Arc::new(TopologyMap::new(base.nodes().to_vec(), base.edges().to_vec(), zones).unwrap());
    let moderate = map.zones()[0].edges.clone();

    let mut world = SimWorld::new(map.clone(), WorldParams::default()).unwrap();
    let params = BilinearParams::draw_seeded(regression_no, seed).unwrap();
    let mut planner = DynamicKfCost::new(&map, params, 0.1, 1.0, XiMode::Deterministic, 1);
    let (a, b) = (NodeId(0), NodeId(38));
    let mut plans = 0usize;
    let mut warm_up = |world: &mut SimWorld, planner: &mut DynamicKfCost, n: usize| {
        for i in 0..n {
            if plans > 0 && plans.is_multiple_of(10) {
                world.recharge();
            }
            plans += 1;
            let (s, d) = if i % 2 == 0 { (a, b) } else { (b, a) };
            let planned = shortest_path(&map, s, d, planner).unwrap();
            let mut path = execute_path(world, &planned).unwrap();
            while path.exhausted {
                world.recharge();
                continue_path(world, &mut path).unwrap();
            }
            planner.record_execution(&map, &path);
        }
    };

    let heuristic = shortest_path(&map, a, b, &mut HeuristicCost { nominal_speed: 0.1 })
        .unwrap()
        .edges();
    warm_up(&mut world, &mut planner, 20);
    let warm = shortest_path(&map, a, b, &mut planner).unwrap().edges();
    world.set_zone_factor("light", 2.0).unwrap();
    warm_up(&mut world, &mut planner, 20);
    let after_change = shortest_path(&map, a, b, &mut planner).unwrap().edges();
    Avoidance { heuristic, warm, after_change, moderate, light }
}
