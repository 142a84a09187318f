//! Experiment configuration, read from and echoed to TOML.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use kfroute_core::kf_dynamic::{self, BilinearParams, XiMode};
use kfroute_core::kf_static::DEFAULT_SIGMA2;
use kfroute_core::planner::KMode;
use kfroute_core::worldsim::{BatteryModel, WorldParams, ZoneOverride};

/// Zone that the default floor-degradation schedule of the second
/// experiment acts on, and the factor it is raised to.
pub const DEGRADED_ZONE: &str = "moderate";
pub const HEAVY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Heuristic against the static filter fed by an offline table.
    #[default]
    Static,
    /// Heuristic against the online bilinear filter.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    /// Ground-truth travel times from the simulator.
    #[default]
    Executed,
    /// Measured travel times, as a robot would log them.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KModeName {
    #[default]
    PerEdge,
    PathDepth,
}

impl From<KModeName> for KMode {
    fn from(value: KModeName) -> Self {
        match value {
            KModeName::PerEdge => KMode::PerEdge,
            KModeName::PathDepth => KMode::PathDepth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum XiModeName {
    #[default]
    Deterministic,
    Stochastic,
}

impl From<XiModeName> for XiMode {
    fn from(value: XiModeName) -> Self {
        match value {
            XiModeName::Deterministic => XiMode::Deterministic,
            XiModeName::Stochastic => XiMode::Stochastic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub nominal_speed: f64,
    pub discharge_per_meter: f64,
    pub noise_std: f64,
    pub process_noise_std: f64,
    pub battery_alpha: f64,
    pub battery_beta: f64,
    pub battery_knee: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let p = WorldParams::default();
        WorldConfig {
            nominal_speed: p.nominal_speed,
            discharge_per_meter: p.discharge_per_meter,
            noise_std: p.noise_std,
            process_noise_std: p.process_noise_std,
            battery_alpha: p.battery.alpha,
            battery_beta: p.battery.beta,
            battery_knee: p.battery.knee,
        }
    }
}

impl WorldConfig {
    pub fn params(&self, seed: u64) -> WorldParams {
        WorldParams {
            nominal_speed: self.nominal_speed,
            discharge_per_meter: self.discharge_per_meter,
            noise_std: self.noise_std,
            process_noise_std: self.process_noise_std,
            battery: BatteryModel {
                alpha: self.battery_alpha,
                beta: self.battery_beta,
                knee: self.battery_knee,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideConfig {
    pub at_plan: usize,
    pub zone: String,
    pub factor: f64,
}

impl From<&OverrideConfig> for ZoneOverride {
    fn from(o: &OverrideConfig) -> Self {
        ZoneOverride {
            at_plan: o.at_plan,
            zone: o.zone.clone(),
            factor: o.factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticConfig {
    pub p0: f64,
    pub sigma2_omega: f64,
    pub sigma2_eta: f64,
    /// Rows per edge in the offline table; derived from the plan count and
    /// the map size when absent.
    pub table_max_k: Option<u32>,
}

impl Default for StaticConfig {
    fn default() -> Self {
        StaticConfig {
            p0: 1.0,
            sigma2_omega: DEFAULT_SIGMA2,
            sigma2_eta: DEFAULT_SIGMA2,
            table_max_k: None,
        }
    }
}

/// Explicit `b` and `c` for one window size. Echoed configs carry the
/// drawn values so a re-run does not depend on the draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub regression_no: usize,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicConfig {
    pub phi: f64,
    pub xi_mean: f64,
    pub xi_std: f64,
    pub q_std: f64,
    pub r_std: f64,
    pub p0: f64,
    pub xi_mode: XiModeName,
    pub coefficients: Vec<Coefficients>,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        DynamicConfig {
            phi: kf_dynamic::DEFAULT_PHI,
            xi_mean: kf_dynamic::DEFAULT_XI_MEAN,
            xi_std: kf_dynamic::DEFAULT_XI_STD,
            q_std: kf_dynamic::DEFAULT_Q_STD,
            r_std: kf_dynamic::DEFAULT_R_STD,
            p0: kf_dynamic::DEFAULT_P0,
            xi_mode: XiModeName::Deterministic,
            coefficients: Vec::new(),
        }
    }
}

impl DynamicConfig {
    /// Parameters for one window size: the listed coefficients when
    /// present, otherwise `b` and `c` drawn from `seed`.
    pub fn params(&self, regression_no: usize, seed: u64) -> Result<BilinearParams> {
        let (b, c) = match self.coefficients.iter().find(|c| c.regression_no == regression_no) {
            Some(listed) => (listed.b.clone(), listed.c.clone()),
            None => {
                let stream = seed ^ (0xC0EF_u64 << 32) ^ regression_no as u64;
                let drawn = BilinearParams::draw_seeded(regression_no, stream)?;
                (drawn.b().to_vec(), drawn.c().to_vec())
            }
        };
        Ok(BilinearParams::new(
            vec![self.phi; regression_no],
            b,
            c,
            self.xi_mean,
            self.xi_std,
            self.q_std,
            self.r_std,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Builtin map names (`map1`, `map2`, `map3`) or paths to map files.
    pub maps: Vec<String>,
    pub n_plans: usize,
    pub seed: u64,
    /// Window sizes swept by the dynamic experiment.
    pub regression_no: Vec<usize>,
    /// Plan counts at which the dynamic experiment is summarised.
    pub bundles: Vec<usize>,
    pub score: Score,
    pub k_mode: KModeName,
    /// Full recharge before every `recharge_every`-th plan.
    pub recharge_every: usize,
    /// Minimum hop distance of generated source/destination pairs.
    pub min_hops: usize,
    /// Explicit `[source, dest]` pairs; generated from the seed when empty.
    pub pairs: Vec<[usize; 2]>,
    /// Zone factor changes by plan index. When absent the experiment's
    /// default schedule is used (none for the static experiment; the
    /// `moderate` zone turning heavy from the first plan for the dynamic
    /// one).
    pub overrides: Option<Vec<OverrideConfig>>,
    pub world: WorldConfig,
    pub static_kf: StaticConfig,
    pub dynamic_kf: DynamicConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Static,
            maps: vec!["map1".into(), "map2".into(), "map3".into()],
            n_plans: 100,
            seed: 1,
            regression_no: (2..=9).collect(),
            bundles: vec![20, 40, 60, 80],
            score: Score::Executed,
            k_mode: KModeName::PerEdge,
            recharge_every: 10,
            min_hops: 3,
            pairs: Vec::new(),
            overrides: None,
            world: WorldConfig::default(),
            static_kf: StaticConfig::default(),
            dynamic_kf: DynamicConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn experiment1() -> Self {
        ExperimentConfig::default()
    }

    pub fn experiment2() -> Self {
        ExperimentConfig {
            experiment: Experiment::Dynamic,
            n_plans: 80,
            ..ExperimentConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("invalid experiment config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_plans >= 1, "n_plans must be at least 1");
        ensure!(!self.maps.is_empty(), "at least one map is required");
        ensure!(self.recharge_every >= 1, "recharge_every must be at least 1");
        for pair in &self.pairs {
            ensure!(pair[0] != pair[1], "pair {pair:?} has identical endpoints");
        }
        if self.experiment == Experiment::Dynamic {
            ensure!(!self.regression_no.is_empty(), "regression_no list is empty");
            for &r in &self.regression_no {
                ensure!(r >= 1, "regression_no must be at least 1");
            }
            for &b in &self.bundles {
                ensure!(
                    (1..=self.n_plans).contains(&b),
                    "bundle {b} outside 1..={}",
                    self.n_plans
                );
            }
        }
        self.world.params(self.seed).validate()?;
        Ok(())
    }

    /// The override schedule with the experiment default filled in.
    pub fn resolved_overrides(&self) -> Vec<OverrideConfig> {
        match (&self.overrides, self.experiment) {
            (Some(list), _) => list.clone(),
            (None, Experiment::Static) => Vec::new(),
            (None, Experiment::Dynamic) => vec![OverrideConfig {
                at_plan: 0,
                zone: DEGRADED_ZONE.into(),
                factor: HEAVY_FACTOR,
            }],
        }
    }
}
