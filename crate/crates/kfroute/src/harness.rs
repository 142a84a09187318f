//! Experiment runners.
//!
//! Both experiments drive every compared mode through the same schedule of
//! source/destination pairs, each mode in its own copy of an identically
//! seeded world. The static experiment compares the heuristic with the
//! table-fed scalar filter; the dynamic one compares it with the online
//! bilinear filter for every window size, summarising at several plan
//! counts ("bundles"). A bundle of `b` plans is the first `b` plans of the
//! longest run: every cell starts from a fresh world and filter bank, so a
//! shorter run would replay exactly that prefix.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use kfroute_core::planner::{
    continue_path, execute_path, shortest_path, CostMode, CostProvider, DynamicKfCost,
    HeuristicCost, PathResult, StaticKfCost,
};
use kfroute_core::stats;
use kfroute_core::worldsim::{build_offline_table, ObservationTable, SimWorld, ZoneOverride};
use kfroute_core::{NodeId, TopologyMap};

use crate::config::{Coefficients, Experiment, ExperimentConfig, Score};
use crate::io;

pub const RUNS_HEADER: [&str; 13] = [
    "experiment",
    "map",
    "mode",
    "regression_no",
    "plan",
    "source",
    "dest",
    "edges",
    "planned_cost",
    "executed_cost",
    "observed_cost",
    "score",
    "recharges",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "experiment",
    "map",
    "mode",
    "regression_no",
    "bundle",
    "plans",
    "mean_score",
    "std_score",
    "saving_pct",
];

/// One planned and driven path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: &'static str,
    pub map: String,
    pub mode: &'static str,
    pub regression_no: Option<usize>,
    pub plan: usize,
    pub source: usize,
    pub dest: usize,
    /// Edge indices separated by spaces.
    pub edges: String,
    pub planned_cost: f64,
    pub executed_cost: f64,
    pub observed_cost: f64,
    /// The cost the comparison is made on, per the configured score.
    pub score: f64,
    /// Recharges needed to finish this path.
    pub recharges: u32,
}

/// Aggregate over the first `bundle` plans of one mode on one map.
/// `regression_no` is empty for the heuristic and static modes and for the
/// dynamic mode averaged over all window sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: &'static str,
    pub map: String,
    pub mode: &'static str,
    pub regression_no: Option<usize>,
    pub bundle: usize,
    pub plans: usize,
    pub mean_score: f64,
    pub std_score: f64,
    pub saving_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// The configuration as run, with defaults and drawn coefficients
    /// written out.
    pub config: ExperimentConfig,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<RunRecord>,
}

impl RunSummary {
    pub fn row(
        &self,
        map: &str,
        mode: CostMode,
        regression_no: Option<usize>,
        bundle: usize,
    ) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| {
            r.map == map
                && r.mode == mode.name()
                && r.regression_no == regression_no
                && r.bundle == bundle
        })
    }

    /// Percent saving of `mode` over the heuristic, if summarised.
    pub fn saving(
        &self,
        map: &str,
        mode: CostMode,
        regression_no: Option<usize>,
        bundle: usize,
    ) -> Option<f64> {
        self.row(map, mode, regression_no, bundle).map(|r| r.saving_pct)
    }

    /// Writes `runs.csv`, `summary.csv` and `config.echo` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        io::write_csv(&io::output_path(dir, "runs.csv")?, &self.records, &RUNS_HEADER)?;
        io::write_csv(&io::output_path(dir, "summary.csv")?, &self.rows, &SUMMARY_HEADER)?;
        let echo = io::output_path(dir, "config.echo")?;
        std::fs::write(&echo, self.config.to_toml()?)
            .with_context(|| format!("writing {}", echo.display()))?;
        Ok(())
    }
}

/// Source/destination pairs for `n` plans: the configured list (cycled),
/// or seeded uniform pairs at least `min_hops` apart.
pub fn schedule(map: &TopologyMap, config: &ExperimentConfig) -> Result<Vec<(NodeId, NodeId)>> {
    let n = map.node_count();
    if !config.pairs.is_empty() {
        for &[s, d] in &config.pairs {
            ensure!(s < n && d < n, "pair [{s}, {d}] is outside the map's {n} nodes");
        }
        return Ok((0..config.n_plans)
            .map(|i| {
                let [s, d] = config.pairs[i % config.pairs.len()];
                (NodeId(s), NodeId(d))
            })
            .collect());
    }
    let hops: Vec<Vec<Option<usize>>> = (0..n).map(|s| map.hop_distances(NodeId(s))).collect();
    let far_enough = |s: usize, d: usize| s != d && hops[s][d].is_some_and(|h| h >= config.min_hops);
    if !(0..n).any(|s| (0..n).any(|d| far_enough(s, d))) {
        bail!("no node pair is {} or more hops apart", config.min_hops);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5C4E_D01E);
    let mut pairs = Vec::with_capacity(config.n_plans);
    while pairs.len() < config.n_plans {
        let s = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        if far_enough(s, d) {
            pairs.push((NodeId(s), NodeId(d)));
        }
    }
    Ok(pairs)
}

/// Rows per edge of the offline table: enough for every plan to reach any
/// depth of a simple path.
pub fn table_size(map: &TopologyMap, config: &ExperimentConfig) -> u32 {
    config.static_kf.table_max_k.unwrap_or_else(|| {
        let longest = map.node_count().saturating_sub(1).max(1);
        u32::try_from(config.n_plans * longest).unwrap_or(u32::MAX)
    })
}

fn base_world(map: &Arc<TopologyMap>, config: &ExperimentConfig) -> Result<SimWorld> {
    Ok(SimWorld::new(map.clone(), config.world.params(config.seed))?)
}

struct Driven {
    path: PathResult,
    recharges: u32,
}

/// Plans and drives every scheduled pair in order, feeding each driven path
/// back to the provider.
fn drive(
    world: &mut SimWorld,
    provider: &mut dyn CostProvider,
    pairs: &[(NodeId, NodeId)],
    overrides: &[ZoneOverride],
    recharge_every: usize,
) -> Result<Vec<Driven>> {
    let map = world.map().clone();
    let mut out = Vec::with_capacity(pairs.len());
    for (plan, &(source, dest)) in pairs.iter().enumerate() {
        world.apply_overrides(overrides, plan)?;
        if plan > 0 && plan % recharge_every == 0 {
            world.recharge();
        }
        let planned = shortest_path(&map, source, dest, provider)?;
        let mut path = execute_path(world, &planned)?;
        let mut recharges = 0;
        while path.exhausted {
            world.recharge();
            recharges += 1;
            ensure!(
                recharges <= path.per_edge.len() as u32,
                "a full charge does not cover an edge of plan {plan}"
            );
            continue_path(world, &mut path)?;
        }
        provider.record_execution(&map, &path);
        out.push(Driven { path, recharges });
    }
    Ok(out)
}

fn records(
    experiment: &'static str,
    map_name: &str,
    mode: CostMode,
    regression_no: Option<usize>,
    score: Score,
    driven: &[Driven],
) -> Vec<RunRecord> {
    driven
        .iter()
        .enumerate()
        .map(|(plan, d)| {
            let observed = d.path.observed_cost();
            RunRecord {
                experiment,
                map: map_name.to_string(),
                mode: mode.name(),
                regression_no,
                plan,
                source: d.path.source.0,
                dest: d.path.dest.0,
                edges: d
                    .path
                    .edges()
                    .iter()
                    .map(|e| e.0.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                planned_cost: d.path.planned_cost,
                executed_cost: d.path.executed_cost,
                observed_cost: observed,
                score: match score {
                    Score::Executed => d.path.executed_cost,
                    Score::Estimated => observed,
                },
                recharges: d.recharges,
            }
        })
        .collect()
}

fn summarise(
    experiment: &'static str,
    map_name: &str,
    mode: &'static str,
    regression_no: Option<usize>,
    bundle: usize,
    scores: &[f64],
    baseline_mean: f64,
) -> SummaryRow {
    let scores = &scores[..bundle.min(scores.len())];
    let mean = stats::mean(scores);
    SummaryRow {
        experiment,
        map: map_name.to_string(),
        mode,
        regression_no,
        bundle,
        plans: scores.len(),
        mean_score: mean,
        std_score: stats::std_dev(scores),
        saving_pct: stats::percent_saving(baseline_mean, mean),
    }
}

fn scores(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(|r| r.score).collect()
}

fn overrides(config: &ExperimentConfig) -> Vec<ZoneOverride> {
    config.resolved_overrides().iter().map(ZoneOverride::from).collect()
}

struct MapOutcome {
    rows: Vec<SummaryRow>,
    records: Vec<RunRecord>,
}

/// Heuristic against the static filter, `n_plans` plans per map.
pub fn run_experiment1(config: &ExperimentConfig) -> Result<RunSummary> {
    ensure!(
        config.experiment == Experiment::Static,
        "run_experiment1 needs experiment = \"static\""
    );
    config.validate()?;
    let outcomes = config
        .maps
        .par_iter()
        .map(|name| experiment1_map(config, name).with_context(|| format!("map {name}")))
        .collect::<Result<Vec<_>>>()?;
    let mut resolved = config.clone();
    resolved.overrides = Some(config.resolved_overrides());
    Ok(collect(resolved, outcomes))
}

/// The offline observation table the static filter reads for `map`.
pub fn offline_table(map: &Arc<TopologyMap>, config: &ExperimentConfig) -> Result<ObservationTable> {
    Ok(build_offline_table(&base_world(map, config)?, table_size(map, config)))
}

fn experiment1_map(config: &ExperimentConfig, name: &str) -> Result<MapOutcome> {
    const EXP: &str = "static";
    let map = Arc::new(io::load_map(name)?);
    let pairs = schedule(&map, config)?;
    let overrides = overrides(config);
    let world = base_world(&map, config)?;
    let table = Arc::new(build_offline_table(&world, table_size(&map, config)));
    let speed = config.world.nominal_speed;

    let mut heuristic = HeuristicCost { nominal_speed: speed };
    let h = drive(&mut world.clone(), &mut heuristic, &pairs, &overrides, config.recharge_every)?;
    let mut filter = StaticKfCost::new(
        &map,
        table,
        speed,
        config.static_kf.p0,
        config.static_kf.sigma2_omega,
        config.static_kf.sigma2_eta,
        config.k_mode.into(),
    )?;
    let r = drive(&mut world.clone(), &mut filter, &pairs, &overrides, config.recharge_every)?;

    let h_records = records(EXP, name, CostMode::Heuristic, None, config.score, &h);
    let r_records = records(EXP, name, CostMode::StaticKf, None, config.score, &r);
    let h_scores = scores(&h_records);
    let h_mean = stats::mean(&h_scores);
    let n = config.n_plans;
    let rows = vec![
        summarise(EXP, name, CostMode::Heuristic.name(), None, n, &h_scores, h_mean),
        summarise(EXP, name, CostMode::StaticKf.name(), None, n, &scores(&r_records), h_mean),
    ];
    Ok(MapOutcome {
        rows,
        records: [h_records, r_records].concat(),
    })
}

/// Heuristic against the bilinear filter for every window size, summarised
/// at every bundle size.
pub fn run_experiment2(config: &ExperimentConfig) -> Result<RunSummary> {
    ensure!(
        config.experiment == Experiment::Dynamic,
        "run_experiment2 needs experiment = \"dynamic\""
    );
    config.validate()?;
    let outcomes = config
        .maps
        .par_iter()
        .map(|name| experiment2_map(config, name).with_context(|| format!("map {name}")))
        .collect::<Result<Vec<_>>>()?;
    let mut resolved = config.clone();
    resolved.overrides = Some(config.resolved_overrides());
    resolved.dynamic_kf.coefficients = config
        .regression_no
        .iter()
        .map(|&r| {
            let params = config.dynamic_kf.params(r, config.seed)?;
            Ok(Coefficients {
                regression_no: r,
                b: params.b().to_vec(),
                c: params.c().to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(collect(resolved, outcomes))
}

fn bundles(config: &ExperimentConfig) -> Vec<usize> {
    if config.bundles.is_empty() {
        vec![config.n_plans]
    } else {
        config.bundles.clone()
    }
}

fn experiment2_map(config: &ExperimentConfig, name: &str) -> Result<MapOutcome> {
    const EXP: &str = "dynamic";
    let map = Arc::new(io::load_map(name)?);
    let pairs = schedule(&map, config)?;
    let overrides = overrides(config);
    let world = base_world(&map, config)?;
    let speed = config.world.nominal_speed;

    let mut heuristic = HeuristicCost { nominal_speed: speed };
    let h = drive(&mut world.clone(), &mut heuristic, &pairs, &overrides, config.recharge_every)?;
    let h_records = records(EXP, name, CostMode::Heuristic, None, config.score, &h);
    let h_scores = scores(&h_records);

    let cells = config
        .regression_no
        .par_iter()
        .map(|&reg| -> Result<Vec<RunRecord>> {
            let params = config.dynamic_kf.params(reg, config.seed)?;
            let mut filter = DynamicKfCost::new(
                &map,
                params,
                speed,
                config.dynamic_kf.p0,
                config.dynamic_kf.xi_mode.into(),
                config.seed ^ (reg as u64) << 16,
            );
            let d = drive(&mut world.clone(), &mut filter, &pairs, &overrides, config.recharge_every)?;
            Ok(records(EXP, name, CostMode::DynamicKf, Some(reg), config.score, &d))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for bundle in bundles(config) {
        let h_mean = stats::mean(&h_scores[..bundle]);
        rows.push(summarise(EXP, name, CostMode::Heuristic.name(), None, bundle, &h_scores, h_mean));
        let mut pooled = Vec::new();
        for (cell, &reg) in cells.iter().zip(&config.regression_no) {
            let d_scores = scores(cell);
            pooled.extend_from_slice(&d_scores[..bundle]);
            rows.push(summarise(
                EXP,
                name,
                CostMode::DynamicKf.name(),
                Some(reg),
                bundle,
                &d_scores,
                h_mean,
            ));
        }
        // every window size on the same plans: the pooled mean is the mean
        // of the per-size means
        rows.push(summarise(
            EXP,
            name,
            CostMode::DynamicKf.name(),
            None,
            pooled.len(),
            &pooled,
            h_mean,
        ));
        rows.last_mut().expect("just pushed").bundle = bundle;
    }
    let mut all = h_records;
    all.extend(cells.into_iter().flatten());
    Ok(MapOutcome { rows, records: all })
}

fn collect(config: ExperimentConfig, outcomes: Vec<MapOutcome>) -> RunSummary {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for outcome in outcomes {
        rows.extend(outcome.rows);
        records.extend(outcome.records);
    }
    RunSummary {
        config,
        rows,
        records,
    }
}

/// Dispatches on the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    match config.experiment {
        Experiment::Static => run_experiment1(config),
        Experiment::Dynamic => run_experiment2(config),
    }
}
