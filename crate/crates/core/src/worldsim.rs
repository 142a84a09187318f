//! Seeded ground-truth simulator.
//!
//! A traversal's true travel time is the edge's base time (length over
//! nominal speed) stretched by the floor roughness of the edge and by a
//! battery factor that stays close to 1 over the mid-charge plateau and
//! climbs steeply near full discharge. Observations add Gaussian
//! measurement noise. All randomness comes from one ChaCha stream, so a
//! world replayed with the same seed and schedule yields an identical log.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::SimError;
use crate::topomap::{EdgeId, TopologyMap, DEFAULT_NOMINAL_SPEED};
use crate::EPS_TIME;

/// Battery slowdown law `1 + alpha (1 - soc) + beta max(0, knee - soc)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryModel {
    pub alpha: f64,
    pub beta: f64,
    pub knee: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        BatteryModel {
            alpha: 0.1,
            beta: 40.0,
            knee: 0.15,
        }
    }
}

impl BatteryModel {
    pub fn factor(&self, soc: f64) -> f64 {
        let soc = soc.clamp(0.0, 1.0);
        let deep = (self.knee - soc).max(0.0);
        1.0 + self.alpha * (1.0 - soc) + self.beta * deep * deep
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldParams {
    /// m/s on a smooth floor at full charge.
    pub nominal_speed: f64,
    /// State-of-charge fraction spent per meter on a smooth floor.
    pub discharge_per_meter: f64,
    /// Standard deviation of the measurement noise, seconds.
    pub noise_std: f64,
    /// Standard deviation of the per-traversal process noise, seconds.
    pub process_noise_std: f64,
    pub battery: BatteryModel,
    pub seed: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            nominal_speed: DEFAULT_NOMINAL_SPEED,
            discharge_per_meter: 0.012,
            noise_std: 0.2,
            process_noise_std: 0.0,
            battery: BatteryModel::default(),
            seed: 0,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.nominal_speed > 0.0 && self.nominal_speed.is_finite()) {
            return Err(SimError::BadParameter("nominal_speed must be positive"));
        }
        if !(self.discharge_per_meter >= 0.0 && self.discharge_per_meter.is_finite()) {
            return Err(SimError::BadParameter("discharge_per_meter must be >= 0"));
        }
        if !(self.noise_std >= 0.0 && self.process_noise_std >= 0.0) {
            return Err(SimError::BadParameter("noise deviations must be >= 0"));
        }
        let b = self.battery;
        if !(b.alpha >= 0.0 && b.beta >= 0.0 && (0.0..=1.0).contains(&b.knee)) {
            return Err(SimError::BadParameter("battery model coefficients out of range"));
        }
        Ok(())
    }
}

/// One traversal of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRecord {
    pub edge: EdgeId,
    /// How many times this edge has now been traversed (1-based).
    pub k: u32,
    /// Position of the edge within the path being executed (1-based).
    pub m: u32,
    pub true_time: f64,
    pub observed_time: f64,
    pub soc_at_traversal: f64,
    /// Charge cycle the traversal belongs to; increments on every recharge.
    pub episode: u32,
}

/// Scheduled change of a zone's roughness, applied before plan `at_plan`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneOverride {
    pub at_plan: usize,
    pub zone: String,
    pub factor: f64,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    map: Arc<TopologyMap>,
    params: WorldParams,
    soc: f64,
    zone_factors: Vec<f64>,
    edge_factors: Vec<f64>,
    counts: Vec<u32>,
    position: u32,
    episode: u32,
    rng: ChaCha8Rng,
    log: Vec<ObservationRecord>,
}

impl SimWorld {
    pub fn new(map: Arc<TopologyMap>, params: WorldParams) -> Result<Self, SimError> {
        params.validate()?;
        let zone_factors = map.zones().iter().map(|z| z.factor).collect();
        let edge_count = map.edge_count();
        let mut world = SimWorld {
            map,
            params,
            soc: 1.0,
            zone_factors,
            edge_factors: vec![1.0; edge_count],
            counts: vec![0; edge_count],
            position: 0,
            episode: 0,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            log: Vec::new(),
        };
        world.refresh_edge_factors();
        Ok(world)
    }

    fn refresh_edge_factors(&mut self) {
        self.edge_factors.iter_mut().for_each(|f| *f = 1.0);
        for (zone, &factor) in self.map.zones().iter().zip(&self.zone_factors) {
            for e in &zone.edges {
                let slot = &mut self.edge_factors[e.0];
                *slot = slot.max(factor);
            }
        }
    }

    pub fn map(&self) -> &Arc<TopologyMap> {
        &self.map
    }

    pub fn params(&self) -> &WorldParams {
        &self.params
    }

    pub fn soc(&self) -> f64 {
        self.soc
    }

    pub fn episode(&self) -> u32 {
        self.episode
    }

    pub fn log(&self) -> &[ObservationRecord] {
        &self.log
    }

    pub fn traversal_count(&self, edge: EdgeId) -> u32 {
        self.counts[edge.0]
    }

    pub fn roughness(&self, edge: EdgeId) -> f64 {
        self.edge_factors[edge.0]
    }

    pub fn zone_factor(&self, name: &str) -> Option<f64> {
        let index = self.map.zones().iter().position(|z| z.name == name)?;
        Some(self.zone_factors[index])
    }

    pub fn set_zone_factor(&mut self, name: &str, factor: f64) -> Result<(), SimError> {
        if !(factor.is_finite() && factor >= 1.0) {
            return Err(SimError::BadFactor(factor));
        }
        let index = self
            .map
            .zones()
            .iter()
            .position(|z| z.name == name)
            .ok_or_else(|| SimError::UnknownZone(name.into()))?;
        self.zone_factors[index] = factor;
        self.refresh_edge_factors();
        Ok(())
    }

    /// Applies every override scheduled for exactly `plan_index`.
    pub fn apply_overrides(
        &mut self,
        overrides: &[ZoneOverride],
        plan_index: usize,
    ) -> Result<(), SimError> {
        for o in overrides.iter().filter(|o| o.at_plan == plan_index) {
            self.set_zone_factor(&o.zone, o.factor)?;
        }
        Ok(())
    }

    /// Full charge; starts a new episode.
    pub fn recharge(&mut self) {
        self.soc = 1.0;
        self.episode += 1;
    }

    /// Resets the in-path position counter before driving a new path.
    pub fn start_path(&mut self) {
        self.position = 0;
    }

    pub fn base_time(&self, edge: EdgeId) -> f64 {
        self.map.euclidean_cost(edge, self.params.nominal_speed)
    }

    pub fn battery_factor(&self) -> f64 {
        self.params.battery.factor(self.soc)
    }

    /// Noise-free travel time of `edge` at the current charge and floor.
    pub fn ground_truth_time(&self, edge: EdgeId) -> f64 {
        self.base_time(edge) * self.roughness(edge) * self.battery_factor()
    }

    /// Charge fraction one traversal of `edge` consumes.
    pub fn drain(&self, edge: EdgeId) -> f64 {
        self.params.discharge_per_meter * self.map.edge_length(edge) * self.roughness(edge)
    }

    /// Drives `edge` once. Fails without side effects when the remaining
    /// charge cannot cover the edge.
    pub fn traverse(&mut self, edge: EdgeId) -> Result<ObservationRecord, SimError> {
        if edge.0 >= self.map.edge_count() {
            return Err(SimError::InvalidEdge(edge));
        }
        let needed = self.drain(edge);
        if self.soc - needed <= 0.0 {
            return Err(SimError::BatteryExhausted {
                edge,
                soc: self.soc,
                needed,
            });
        }
        let process: f64 = self.rng.sample(StandardNormal);
        let measurement: f64 = self.rng.sample(StandardNormal);

        let soc_at_traversal = self.soc;
        let true_time =
            (self.ground_truth_time(edge) + self.params.process_noise_std * process).max(EPS_TIME);
        let observed_time = true_time + self.params.noise_std * measurement;

        self.soc -= needed;
        self.counts[edge.0] += 1;
        self.position += 1;
        let record = ObservationRecord {
            edge,
            k: self.counts[edge.0],
            m: self.position,
            true_time,
            observed_time,
            soc_at_traversal,
            episode: self.episode,
        };
        self.log.push(record);
        Ok(record)
    }
}

/// Offline observation table `Y(edge, k)` for `k` in `1..=max_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    max_k: u32,
    values: BTreeMap<(EdgeId, u32), f64>,
}

impl ObservationTable {
    pub fn new(max_k: u32) -> Self {
        ObservationTable {
            max_k,
            values: BTreeMap::new(),
        }
    }

    pub fn max_k(&self) -> u32 {
        self.max_k
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn insert(&mut self, edge: EdgeId, k: u32, observed: f64) {
        self.max_k = self.max_k.max(k);
        self.values.insert((edge, k), observed);
    }

    pub fn lookup(&self, edge: EdgeId, k: u32) -> Option<f64> {
        self.values.get(&(edge, k)).copied()
    }

    /// Like [`lookup`](Self::lookup), but a `k` past the recorded range
    /// falls back to the edge's last recorded step. The flag is set when
    /// the fallback was taken.
    pub fn lookup_clamped(&self, edge: EdgeId, k: u32) -> Option<(f64, bool)> {
        if let Some(v) = self.lookup(edge, k) {
            return Some((v, false));
        }
        self.values
            .range((edge, 0)..=(edge, k))
            .next_back()
            .map(|(_, &v)| (v, true))
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, u32, f64)> + '_ {
        self.values.iter().map(|(&(e, k), &v)| (e, k, v))
    }
}

/// Records `Y(edge, k)` for every directed edge by driving it `max_k` times
/// in a row from full charge, recharging whenever the battery runs out.
/// Works on a private copy of `world`.
pub fn build_offline_table(world: &SimWorld, max_k: u32) -> ObservationTable {
    let mut scratch = world.clone();
    scratch.log.clear();
    let mut table = ObservationTable::new(max_k);
    for e in 0..scratch.map.edge_count() {
        let edge = EdgeId(e);
        scratch.recharge();
        for k in 1..=max_k {
            let record = match scratch.traverse(edge) {
                Ok(r) => r,
                Err(_) => {
                    scratch.recharge();
                    scratch
                        .traverse(edge)
                        .expect("a full charge covers any single edge")
                }
            };
            table.insert(edge, k, record.observed_time);
        }
    }
    table
}
