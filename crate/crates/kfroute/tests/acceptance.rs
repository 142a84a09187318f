//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::time::{Duration, Instant};

use kfroute::config::Experiment;
use kfroute::{run, ExperimentConfig, RunSummary};
use kfroute_core::kf_dynamic::{predict, update, BilinearParams, BilinearState};
use kfroute_core::kf_static::ScalarFilterState;
use kfroute_core::planner::{search, shortest_path, CostMode, CostProvider, CostQuery, HeuristicCost};
use kfroute_core::stats;
use kfroute_core::topomap::{Edge, Node, RoughnessZone};
use kfroute_core::worldsim::{SimWorld, WorldParams};
use kfroute_core::{EdgeId, NodeId, PlanError, TopologyMap};
use nalgebra::{DMatrix, DVector};
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

const MAPS: [&str; 3] = ["map1", "map2", "map3"];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn scalar_filter() -> Check {
    let start = Instant::now();
    let out = ScalarFilterState::init(10.0, 1.0, 0.5, 1.0).unwrap().update(12.0);
    ensure(
        (out.gain - 0.6).abs() < 1e-12
            && (out.state.x_hat - 11.2).abs() < 1e-12
            && (out.state.p - 0.6).abs() < 1e-12,
        || format!("worked example gave {out:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let state = ScalarFilterState::init(
            rng.random_range(0.1..50.0),
            rng.random_range(1e-6..100.0),
            rng.random_range(1e-6..10.0),
            rng.random_range(1e-6..10.0),
        )
        .unwrap();
        let (_, prior_p) = state.predict();
        let out = state.update(rng.random_range(0.1..50.0));
        ensure((0.0..=1.0).contains(&out.gain), || format!("gain {}", out.gain))?;
        ensure(out.state.p <= prior_p, || format!("variance {} above prior {prior_p}", out.state.p))?;
    }

    let mut state = ScalarFilterState::init(1.0, 1.0, 0.01, 1.0).unwrap();
    for _ in 0..200 {
        state = state.update(7.0).state;
    }
    ensure((state.x_hat - 7.0).abs() < 1e-6, || format!("estimate {} after 200 steps", state.x_hat))?;
    within(start, Duration::from_secs(1))?;
    Ok("worked example and 10000 random updates".into())
}

fn random_params(rng: &mut ChaCha8Rng, reg: usize) -> BilinearParams {
    let mut v = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let phi = (0..reg).map(|_| v(-0.5, 0.5)).collect();
    let b = (0..reg).map(|_| v(-0.3, 0.5)).collect();
    let c = (0..reg).map(|_| (0..reg).map(|_| v(-0.3, 0.5)).collect()).collect();
    BilinearParams::new(phi, b, c, 0.1, 0.1, 0.5, 0.2).unwrap()
}

fn bilinear() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = (0.0f64, 0.0f64);
    for trial in 0..1000 {
        let reg = 2 + trial % 8;
        let n = 2 * reg + 1;
        let params = random_params(&mut rng, reg);
        let mu = rng.random_range(0.5..20.0);
        let xi_past: Vec<f64> = (0..reg).map(|_| rng.random_range(-0.2..0.4)).collect();
        let x_past: Vec<f64> = (0..reg).map(|_| rng.random_range(0.5..20.0)).collect();
        let xi_now = rng.random_range(-0.2..0.4);
        let omega = rng.random_range(-1.0..1.0);
        // the constant slot carries no uncertainty
        let mut p0 = support::random_spd(&mut rng, n);
        p0[0].fill(0.0);
        for row in &mut p0 {
            row[0] = 0.0;
        }

        let mut s = vec![1.0];
        s.extend(xi_past.iter().rev());
        s.extend(x_past.iter().rev());
        let state = BilinearState::from_parts(
            &params,
            DVector::from_vec(s),
            DMatrix::from_fn(n, n, |i, j| p0[i][j]),
            mu,
            omega,
        );
        let prior = predict(&params, &state, xi_now);
        let expected = support::bilinear_step(
            mu, params.phi(), params.b(), params.c(), xi_now, &xi_past, &x_past, omega,
        );
        let err = (prior.s[n - 1] - expected).abs() / expected.abs().max(1.0);
        worst.0 = worst.0.max(err);
        ensure(err <= 1e-9, || format!("trial {trial}: transition off by {err:e}"))?;

        let x: Vec<f64> = prior.s.iter().copied().collect();
        let p: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| prior.p[(i, j)]).collect()).collect();
        let mut h = vec![0.0; n];
        h[n - 1] = 1.0;
        let y = rng.random_range(0.5..25.0);
        let (x_ref, p_ref) = support::dense_update(&x, &p, &h, params.r_std * params.r_std, y);
        let out = update(&params, &state, prior, y);
        for i in 0..n {
            let e = (out.state.s()[i] - x_ref[i]).abs() / x_ref[i].abs().max(1.0);
            worst.1 = worst.1.max(e);
            ensure(e <= 1e-9, || format!("trial {trial}: s[{i}] off by {e:e}"))?;
            for (j, &want) in p_ref[i].iter().enumerate() {
                ensure(close(out.state.p()[(i, j)], want, 1e-9), || {
                    format!("trial {trial}: P[{i},{j}] differs")
                })?;
            }
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("1000 cases, worst transition {:.1e}, worst update {:.1e}", worst.0, worst.1))
}

struct Frozen(Vec<f64>);

impl CostProvider for Frozen {
    fn mode(&self) -> CostMode {
        CostMode::Heuristic
    }
    fn cost(&mut self, _: &TopologyMap, q: &CostQuery<'_>) -> Result<f64, PlanError> {
        Ok(self.0[q.edge.0])
    }
}

fn dijkstra() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..100 {
        let n = rng.random_range(2..=50);
        let map = support::random_connected(&mut rng, n, n);
        let w: Vec<f64> = (0..map.edge_count()).map(|_| rng.random_range(1..50) as f64).collect();
        let mut g = DiGraph::<(), f64>::new();
        let ids: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
        for (i, e) in map.edges().iter().enumerate() {
            g.add_edge(ids[e.from.0], ids[e.to.0], w[i]);
        }
        let source = rng.random_range(0..n);
        let reference = petgraph::algo::dijkstra(&g, ids[source], None, |e| *e.weight());
        let tree = search(&map, NodeId(source), None, &mut Frozen(w)).unwrap();
        for v in 0..n {
            ensure(tree.dist[v] == reference[&ids[v]], || format!("graph {trial} node {v}"))?;
        }
    }
    for trial in 0..20 {
        let n = rng.random_range(4..=12);
        let map = support::random_connected(&mut rng, n, 2 * n);
        let w: Vec<f64> = (0..map.edge_count()).map(|_| rng.random_range(1..50) as f64).collect();
        let source = rng.random_range(0..n);
        let dest = (source + 1 + rng.random_range(0..n - 1)) % n;
        let best = support::brute_force_cost(&map, &w, source, dest);
        let got = shortest_path(&map, NodeId(source), NodeId(dest), &mut Frozen(w)).unwrap();
        ensure(got.planned_cost == best, || format!("small graph {trial}: {} vs {best}", got.planned_cost))?;
    }
    within(start, Duration::from_secs(30))?;
    Ok("100 reference graphs, 20 exhaustive".into())
}

fn per_map(config: &ExperimentConfig, limit: Duration) -> Result<Vec<(String, RunSummary)>, String> {
    MAPS.iter()
        .map(|&m| {
            let start = Instant::now();
            let summary = run(&ExperimentConfig { maps: vec![m.into()], ..config.clone() })
                .map_err(|e| format!("{m}: {e:#}"))?;
            within(start, limit).map_err(|e| format!("{m}: {e}"))?;
            Ok((m.to_string(), summary))
        })
        .collect()
}

fn experiment1() -> Check {
    let config = ExperimentConfig::experiment1();
    let mut detail = Vec::new();
    for (m, summary) in per_map(&config, Duration::from_secs(60))? {
        let saving = summary.saving(&m, CostMode::StaticKf, None, config.n_plans).unwrap();
        detail.push(format!("{m} {saving:.2}%"));
        ensure((1.0..=12.0).contains(&saving), || format!("{m} saves {saving:.2}%"))?;
    }
    Ok(detail.join(", "))
}

fn pooled_saving(summary: &RunSummary, map: &str, bundle: usize) -> f64 {
    summary.saving(map, CostMode::DynamicKf, None, bundle).unwrap()
}

fn experiment2() -> Check {
    let config = ExperimentConfig::experiment2();
    let mut detail = Vec::new();
    let mut failure = None;
    for (m, summary) in per_map(&config, Duration::from_secs(120))? {
        let saving = pooled_saving(&summary, &m, 80);
        detail.push(format!("{m} {saving:.2}%"));
        if !(8.0..=25.0).contains(&saving) && failure.is_none() {
            failure = Some(format!("{m} saves {saving:.2}%"));
        }
    }
    // the default seed is one draw; show how the band holds up on others
    let mut means = [0.0; 3];
    for seed in 1..=5 {
        let summary = run(&ExperimentConfig { seed, ..config.clone() }).map_err(|e| e.to_string())?;
        for (i, m) in MAPS.iter().enumerate() {
            means[i] += pooled_saving(&summary, m, 80) / 5.0;
        }
    }
    println!(
        "  info: seeds 1-5 mean saving {}",
        MAPS.iter().zip(means).map(|(m, s)| format!("{m} {s:.2}%")).collect::<Vec<_>>().join(", ")
    );
    match failure {
        Some(f) => Err(f),
        None => Ok(detail.join(", ")),
    }
}

fn trend() -> Check {
    let base = ExperimentConfig::experiment2();
    let regs = base.regression_no.clone();
    let mut per_reg = vec![0.0; regs.len()];
    for seed in 1..=5 {
        let summary = run(&ExperimentConfig { seed, ..base.clone() }).map_err(|e| e.to_string())?;
        for (i, &r) in regs.iter().enumerate() {
            for m in MAPS {
                per_reg[i] += summary.saving(m, CostMode::DynamicKf, Some(r), 80).unwrap() / 15.0;
            }
        }
    }
    let xs: Vec<f64> = regs.iter().map(|&r| r as f64).collect();
    let rho = stats::spearman(&xs, &per_reg);
    let table: Vec<String> = regs.iter().zip(&per_reg).map(|(r, s)| format!("{r}:{s:.2}")).collect();
    println!("  info: mean saving by window size {}", table.join(" "));
    ensure(rho >= 0.0, || format!("spearman {rho:.3}"))?;
    Ok(format!("spearman {rho:.3}"))
}

fn avoidance() -> Check {
    let mut matrix = Vec::new();
    for reg in 2..=9 {
        let row: String = (1..=5)
            .map(|seed| if support::avoidance(reg, seed).passed() { 'y' } else { 'n' })
            .collect();
        matrix.push(format!("{reg}:{row}"));
    }
    println!("  info: avoidance by window size over seeds 1-5 {}", matrix.join(" "));
    let run = support::avoidance(9, 1);
    let counts = format!(
        "moderate edges heuristic {} warm {}, after change moderate {} light {}",
        support::Avoidance::count(&run.heuristic, &run.moderate),
        support::Avoidance::count(&run.warm, &run.moderate),
        support::Avoidance::count(&run.after_change, &run.moderate),
        support::Avoidance::count(&run.after_change, &run.light),
    );
    ensure(run.passed(), || counts.clone())?;
    Ok(counts)
}

fn reproducible() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for config in [ExperimentConfig::experiment1(), ExperimentConfig::experiment2()] {
        let first = dir.path().join("first");
        let second = dir.path().join("second");
        run(&config).and_then(|s| s.emit(&first)).map_err(|e| e.to_string())?;
        let echo = ExperimentConfig::load(&first.join("config.echo")).map_err(|e| e.to_string())?;
        run(&echo).and_then(|s| s.emit(&second)).map_err(|e| e.to_string())?;
        let a = std::fs::read(first.join("runs.csv")).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.join("runs.csv")).map_err(|e| e.to_string())?;
        let name = if config.experiment == Experiment::Static { "exp1" } else { "exp2" };
        ensure(a == b, || format!("{name} runs.csv differs after re-run"))?;
    }
    Ok("exp1 and exp2 re-run byte for byte".into())
}

/// A line of one-meter edges, the first `rough` of them in a zone.
fn corridor(len: usize, rough: usize) -> TopologyMap {
    let nodes = (0..=len).map(|i| Node { id: NodeId(i), x: i as f64, y: 0.0 }).collect();
    let edges = (0..len).map(|i| Edge { from: NodeId(i), to: NodeId(i + 1) }).collect();
    let zones = vec![RoughnessZone {
        name: "rough".into(),
        edges: (0..rough).map(EdgeId).collect(),
        factor: 1.4,
    }];
    TopologyMap::new(nodes, edges, if rough > 0 { zones } else { vec![] }).unwrap()
}

fn underestimation() -> Check {
    let quiet = WorldParams { noise_std: 0.0, ..WorldParams::default() };
    let mut gaps = Vec::new();
    for rough in 0..=8 {
        let map = std::sync::Arc::new(corridor(8, rough));
        let mut world = SimWorld::new(map.clone(), quiet).unwrap();
        let path = shortest_path(&map, NodeId(0), NodeId(8), &mut HeuristicCost { nominal_speed: 0.1 })
            .unwrap();
        let driven = kfroute_core::planner::execute_path(&mut world, &path).unwrap();
        let gap = driven.executed_cost - driven.planned_cost;
        if rough > 0 {
            ensure(gap > 0.0, || format!("{rough} rough edges, gap {gap}"))?;
        }
        gaps.push(gap);
    }
    ensure(gaps.windows(2).all(|w| w[1] > w[0]), || format!("gaps not increasing: {gaps:?}"))?;

    // the same holds on the experiment maps for every heuristic plan that
    // crosses a rough edge
    let summary = run(&ExperimentConfig::experiment1()).map_err(|e| e.to_string())?;
    let mut crossing = 0;
    for r in summary.records.iter().filter(|r| r.mode == "heuristic") {
        let map = kfroute::io::load_map(&r.map).map_err(|e| e.to_string())?;
        let rough = r
            .edges
            .split_whitespace()
            .filter(|e| {
                let e: usize = e.parse().unwrap();
                map.zones().iter().any(|z| z.factor > 1.0 && z.edges.contains(&EdgeId(e)))
            })
            .count();
        if rough > 0 {
            crossing += 1;
            ensure(r.executed_cost > r.planned_cost, || format!("{} plan {}", r.map, r.plan))?;
        }
    }
    Ok(format!("corridor gaps rise with rough edges, {crossing} crossing plans checked"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("scalar filter", scalar_filter),
        ("bilinear filter", bilinear),
        ("shortest paths", dijkstra),
        ("static experiment band", experiment1),
        ("dynamic experiment band", experiment2),
        ("window size trend", trend),
        ("rough floor avoidance", avoidance),
        ("reproducible reruns", reproducible),
        ("heuristic underestimation", underestimation),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        match &result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{took:.2?}]", i + 1),
            Err(why) => {
                println!("criterion {} {name}: FAIL ({why}) [{took:.2?}]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
