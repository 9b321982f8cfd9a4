//! Synthetic instances with default cost parameters and cost-level multipliers.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{
    build_feasible_pairs, CapacityStructure, CostParameters, Instance, Location, Network,
    RevisionSchedule, DEPOT,
};
use crate::rng::{stream_rng, STREAM_INSTANCE};

/// Cost multiplier for a group of cost parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostLevel {
    Low,
    #[default]
    Medium,
    High,
}

impl CostLevel {
    pub fn factor(self) -> f64 {
        match self {
            CostLevel::Low => 0.5,
            CostLevel::Medium => 1.0,
            CostLevel::High => 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_facilities: usize,
    pub n_locations: usize,
    pub horizon: usize,
    pub seed: u64,
    pub levels: usize,
    pub max_modules: u32,
    pub nominal_rate: f64,
    /// Side length of the square sampling region in miles.
    pub region_miles: f64,
    pub demand_min: f64,
    pub demand_max: f64,
    pub module_ship_limit: f64,
    pub unit_relocation_limit: f64,
    pub initial_level: usize,
    /// Revision flags; `None` means every period.
    pub revision: Option<Vec<bool>>,
    /// Opening, closing, resizing and upkeep.
    pub capacity_cost: CostLevel,
    /// Renting, returning and moving modules.
    pub relocation_cost: CostLevel,
    /// Shipping to demand locations.
    pub transport_cost: CostLevel,
    pub outsourcing_cost: CostLevel,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_facilities: 3,
            n_locations: 8,
            horizon: 3,
            seed: 1,
            levels: 2,
            max_modules: 6,
            nominal_rate: 20.0,
            region_miles: 400.0,
            demand_min: 5.0,
            demand_max: 50.0,
            module_ship_limit: 250.0,
            unit_relocation_limit: 750.0,
            initial_level: 0,
            revision: None,
            capacity_cost: CostLevel::Medium,
            relocation_cost: CostLevel::Medium,
            transport_cost: CostLevel::Medium,
            outsourcing_cost: CostLevel::Medium,
        }
    }
}

impl SyntheticConfig {
    /// Seven facilities and fifty demand locations.
    pub fn se(seed: u64) -> Self {
        SyntheticConfig {
            n_facilities: 7,
            n_locations: 50,
            horizon: 6,
            levels: 3,
            seed,
            ..Self::default()
        }
    }

    pub fn problems(&self) -> Vec<alloc::string::String> {
        use alloc::format;
        let mut out = Vec::new();
        if self.n_facilities == 0 {
            out.push("n_facilities must be at least 1".into());
        }
        if self.n_locations == 0 {
            out.push("n_locations must be at least 1".into());
        }
        if self.horizon == 0 {
            out.push("horizon must be at least 1".into());
        }
        if self.levels < 2 {
            out.push("levels must be at least 2".into());
        }
        if (self.max_modules as usize) + 1 < self.levels {
            out.push(format!(
                "max_modules {} cannot give {} distinct levels",
                self.max_modules, self.levels
            ));
        }
        if self.initial_level >= self.levels {
            out.push("initial_level must be below levels".into());
        }
        if !(self.demand_min >= 0.0 && self.demand_max >= self.demand_min) {
            out.push("demand range must satisfy 0 <= demand_min <= demand_max".into());
        }
        if !(self.region_miles > 0.0 && self.module_ship_limit > 0.0) {
            out.push("region_miles and module_ship_limit must be positive".into());
        }
        if let Some(w) = &self.revision {
            if w.len() != self.horizon {
                out.push("revision must have one flag per period".into());
            } else if !w[0] {
                out.push("first stage must allow revision".into());
            }
        }
        out
    }
}

/// Evenly spaced module counts from 0 to `max_modules`.
pub fn level_modules(levels: usize, max_modules: u32) -> Vec<u32> {
    let top = (levels - 1) as f64;
    (0..levels)
        .map(|l| libm::round(f64::from(max_modules) * l as f64 / top) as u32)
        .collect()
}

/// Scales every cost parameter by its group multiplier.
pub fn scale_costs(base: &CostParameters, cfg: &SyntheticConfig) -> CostParameters {
    let cap = cfg.capacity_cost.factor();
    let rel = cfg.relocation_cost.factor();
    CostParameters {
        commissioning: base.commissioning * cap,
        decommissioning: base.decommissioning * cap,
        expand_per_level: base.expand_per_level * cap,
        reduce_per_level: base.reduce_per_level * cap,
        maintain_per_level: base.maintain_per_level * cap,
        unit_rent: base.unit_rent * rel,
        unit_return: base.unit_return * rel,
        unit_move_per_hour: base.unit_move_per_hour * rel,
        demand_ship_per_hour: base.demand_ship_per_hour * cfg.transport_cost.factor(),
        outsource_per_module: base.outsource_per_module * cfg.outsourcing_cost.factor(),
        travel_speed: base.travel_speed,
    }
}

/// Deterministic synthetic instance. Callers should check
/// [`SyntheticConfig::problems`] first; degenerate counts give an instance
/// that fails validation.
pub fn generate_synthetic_instance(cfg: &SyntheticConfig) -> Instance {
    let mut rng = stream_rng(cfg.seed, STREAM_INSTANCE);
    let side = cfg.region_miles;
    let facilities: Vec<Location> = (0..cfg.n_facilities)
        .map(|j| Location {
            id: j + 1,
            x: rng.random::<f64>() * side,
            y: rng.random::<f64>() * side,
        })
        .collect();

    let mut locations = Vec::with_capacity(cfg.n_locations);
    for i in 0..cfg.n_locations {
        let mut p = Location {
            id: i,
            x: 0.0,
            y: 0.0,
        };
        let mut placed = false;
        for _ in 0..1000 {
            p.x = rng.random::<f64>() * side;
            p.y = rng.random::<f64>() * side;
            if facilities
                .iter()
                .any(|f| f.distance(&p) <= cfg.module_ship_limit)
            {
                placed = true;
                break;
            }
        }
        if !placed && !facilities.is_empty() {
            let f = &facilities[rng.random_range(0..facilities.len())];
            let r = 0.5 * cfg.module_ship_limit * rng.random::<f64>();
            let a = core::f64::consts::TAU * rng.random::<f64>();
            p.x = f.x + r * libm::cos(a);
            p.y = f.y + r * libm::sin(a);
        }
        locations.push(p);
    }

    let base_demand: Vec<f64> = (0..cfg.n_locations)
        .map(|_| cfg.demand_min + (cfg.demand_max - cfg.demand_min) * rng.random::<f64>())
        .collect();

    let (ij, jj) = build_feasible_pairs(
        &locations,
        &facilities,
        cfg.module_ship_limit,
        cfg.unit_relocation_limit,
    );
    let levels = cfg.levels.max(2);
    let modules = level_modules(levels, cfg.max_modules.max(1));
    let revision = match &cfg.revision {
        Some(w) => RevisionSchedule::from_flags(w.clone()),
        None => RevisionSchedule::full(cfg.horizon),
    };

    Instance {
        network: Network {
            demand_locations: locations,
            facilities,
            depot: DEPOT,
            module_ship_limit: cfg.module_ship_limit,
            unit_relocation_limit: cfg.unit_relocation_limit,
            feasible_demand_pairs: ij,
            feasible_move_pairs: jj,
        },
        capacity: CapacityStructure {
            levels,
            modules_per_level: alloc::vec![modules; cfg.n_facilities],
            initial_level: alloc::vec![cfg.initial_level; cfg.n_facilities],
            nominal_rate: cfg.nominal_rate,
        },
        costs: scale_costs(&CostParameters::default(), cfg),
        horizon: cfg.horizon,
        revision,
        demand_forecast: alloc::vec![base_demand; cfg.horizon],
    }
}
