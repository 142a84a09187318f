use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kfroute::config::{Experiment, ExperimentConfig, KModeName, Score};
use kfroute::{harness, io};
use kfroute_core::planner::{
    execute_path, shortest_path, CostProvider, DynamicKfCost, HeuristicCost,
    StaticKfCost,
};
use kfroute_core::worldsim::SimWorld;
use kfroute_core::NodeId;

#[derive(Parser)]
#[command(version, about = "Travel-time estimating route planner and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    score: Option<ScoreArg>,
    #[arg(long = "k-mode", value_enum)]
    k_mode: Option<KModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Executed,
    Estimated,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KModeArg {
    PerEdge,
    PathDepth,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Heuristic,
    StaticKf,
    DynamicKf,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and drive one path.
    Plan {
        #[arg(long, default_value = "map1")]
        map: String,
        #[arg(long, value_enum, default_value = "heuristic")]
        mode: ModeArg,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        dest: usize,
        /// Window size for the dynamic filter.
        #[arg(long, default_value_t = 4)]
        regression_no: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Heuristic against the static filter.
    Exp1 {
        /// Restrict to these maps (names or files).
        #[arg(long)]
        map: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Heuristic against the dynamic filter.
    Exp2 {
        #[arg(long)]
        map: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the offline observation table of a map as CSV.
    GenTable {
        #[arg(long, default_value = "map1")]
        map: String,
        /// Rows per edge; derived from the plan count when omitted.
        #[arg(long)]
        max_k: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, experiment: Experiment, maps: &[String]) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => match experiment {
            Experiment::Static => ExperimentConfig::experiment1(),
            Experiment::Dynamic => ExperimentConfig::experiment2(),
        },
    };
    config.experiment = experiment;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(score) = common.score {
        config.score = match score {
            ScoreArg::Executed => Score::Executed,
            ScoreArg::Estimated => Score::Estimated,
        };
    }
    if let Some(k) = common.k_mode {
        config.k_mode = match k {
            KModeArg::PerEdge => KModeName::PerEdge,
            KModeArg::PathDepth => KModeName::PathDepth,
        };
    }
    if !maps.is_empty() {
        config.maps = maps.to_vec();
    }
    config.validate()?;
    Ok(config)
}

fn experiment(common: &Common, kind: Experiment, maps: &[String]) -> Result<()> {
    let config = resolve(common, kind, maps)?;
    let summary = harness::run(&config)?;
    summary.emit(&common.out)?;
    for row in &summary.rows {
        println!(
            "{:<8} {:<11} reg {:>2} bundle {:>3}  mean {:>9.3}  saving {:>6.2}%",
            row.map,
            row.mode,
            row.regression_no.map_or("-".to_string(), |r| r.to_string()),
            row.bundle,
            row.mean_score,
            row.saving_pct
        );
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

fn plan(
    map_name: &str,
    mode: ModeArg,
    source: usize,
    dest: usize,
    regression_no: usize,
    common: &Common,
) -> Result<()> {
    let kind = match mode {
        ModeArg::DynamicKf => Experiment::Dynamic,
        _ => Experiment::Static,
    };
    let config = resolve(common, kind, &[map_name.to_string()])?;
    let map = Arc::new(io::load_map(map_name)?);
    let mut world = SimWorld::new(map.clone(), config.world.params(config.seed))?;
    let speed = config.world.nominal_speed;
    let mut provider: Box<dyn CostProvider> = match mode {
        ModeArg::Heuristic => Box::new(HeuristicCost { nominal_speed: speed }),
        ModeArg::StaticKf => Box::new(StaticKfCost::new(
            &map,
            Arc::new(harness::offline_table(&map, &config)?),
            speed,
            config.static_kf.p0,
            config.static_kf.sigma2_omega,
            config.static_kf.sigma2_eta,
            config.k_mode.into(),
        )?),
        ModeArg::DynamicKf => Box::new(DynamicKfCost::new(
            &map,
            config.dynamic_kf.params(regression_no, config.seed)?,
            speed,
            config.dynamic_kf.p0,
            config.dynamic_kf.xi_mode.into(),
            config.seed,
        )),
    };
    let path = shortest_path(&map, NodeId(source), NodeId(dest), provider.as_mut())
        .with_context(|| format!("planning {source} -> {dest}"))?;
    let driven = execute_path(&mut world, &path)?;
    println!("mode      {}", provider.mode().name());
    let nodes: Vec<String> = std::iter::once(source)
        .chain(driven.edges().iter().map(|e| map.edge(*e).to.0))
        .map(|n| n.to_string())
        .collect();
    println!("nodes     {}", nodes.join(" -> "));
    println!("planned   {:.3} s", driven.planned_cost);
    println!("executed  {:.3} s", driven.executed_cost);
    if driven.exhausted {
        println!("battery ran out before the destination");
    }
    Ok(())
}

fn gen_table(map_name: &str, max_k: Option<u32>, common: &Common) -> Result<()> {
    let mut config = resolve(common, Experiment::Static, &[map_name.to_string()])?;
    if max_k.is_some() {
        config.static_kf.table_max_k = max_k;
    }
    let map = Arc::new(io::load_map(map_name)?);
    let table = harness::offline_table(&map, &config)?;
    let stem = std::path::Path::new(map_name)
        .file_stem()
        .map_or_else(|| map_name.to_string(), |s| s.to_string_lossy().into_owned());
    let path = io::output_path(&common.out, &format!("{stem}_table.csv"))?;
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    io::write_table(&map, &table, std::io::BufWriter::new(file))?;
    println!("wrote {} rows to {}", table.len(), path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan {
            map,
            mode,
            source,
            dest,
            regression_no,
            common,
        } => plan(&map, mode, source, dest, regression_no, &common),
        Command::Exp1 { map, common } => experiment(&common, Experiment::Static, &map),
        Command::Exp2 { map, common } => experiment(&common, Experiment::Dynamic, &map),
        Command::GenTable { map, max_k, common } => gen_table(&map, max_k, &common),
    }
}
