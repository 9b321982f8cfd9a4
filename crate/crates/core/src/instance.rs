//! Planning network, modular capacity structure, cost parameters and the
//! revision schedule.
//!
//! Sites in the module-move network are numbered with the depot at `0` and
//! facility `j` (0-based index into [`Network::facilities`]) at `j + 1`.
//! Demand pairs use plain 0-based indices `(location, facility)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Site id of the module depot in the move network.
pub const DEPOT: usize = 0;

/// Move-network site id of facility `j`.
#[inline]
pub fn site_of(facility: usize) -> usize {
    facility + 1
}

/// Facility index of a move-network site, `None` for the depot.
#[inline]
pub fn facility_of(site: usize) -> Option<usize> {
    site.checked_sub(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn distance(&self, other: &Location) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub demand_locations: Vec<Location>,
    pub facilities: Vec<Location>,
    pub depot: usize,
    /// Module shipping limit L^M in miles.
    pub module_ship_limit: f64,
    /// Unit relocation limit L^P in miles.
    pub unit_relocation_limit: f64,
    /// `(location index, facility index)` pairs.
    pub feasible_demand_pairs: Vec<(usize, usize)>,
    /// `(site, site)` pairs; see the module docs for site numbering.
    pub feasible_move_pairs: Vec<(usize, usize)>,
}

impl Network {
    /// Distance between two move-network sites. The depot is treated as
    /// having no location, so any pair touching it has distance 0.
    pub fn site_distance(&self, a: usize, b: usize) -> f64 {
        match (facility_of(a), facility_of(b)) {
            (Some(i), Some(j)) => self.facilities[i].distance(&self.facilities[j]),
            _ => 0.0,
        }
    }

    pub fn demand_distance(&self, location: usize, facility: usize) -> f64 {
        self.demand_locations[location].distance(&self.facilities[facility])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityStructure {
    /// Number of capacity levels, level 0 meaning closed.
    pub levels: usize,
    /// `modules_per_level[j][l]`.
    pub modules_per_level: Vec<Vec<u32>>,
    pub initial_level: Vec<usize>,
    /// Throughput of one capacity module per period.
    pub nominal_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParameters {
    pub commissioning: f64,
    pub decommissioning: f64,
    pub expand_per_level: f64,
    pub reduce_per_level: f64,
    pub maintain_per_level: f64,
    pub unit_rent: f64,
    pub unit_return: f64,
    pub unit_move_per_hour: f64,
    pub demand_ship_per_hour: f64,
    pub outsource_per_module: f64,
    /// Miles per hour.
    pub travel_speed: f64,
}

impl Default for CostParameters {
    fn default() -> Self {
        CostParameters {
            commissioning: 50_000.0,
            decommissioning: 25_000.0,
            expand_per_level: 12_500.0,
            reduce_per_level: 6_250.0,
            maintain_per_level: 22_188.0,
            unit_rent: 19_104.0,
            unit_return: 19_104.0,
            unit_move_per_hour: 60.0,
            demand_ship_per_hour: 120.0,
            outsource_per_module: 10_000.0,
            travel_speed: 50.0,
        }
    }
}

impl CostParameters {
    fn money_fields(&self) -> [(&'static str, f64); 10] {
        [
            ("commissioning", self.commissioning),
            ("decommissioning", self.decommissioning),
            ("expand_per_level", self.expand_per_level),
            ("reduce_per_level", self.reduce_per_level),
            ("maintain_per_level", self.maintain_per_level),
            ("unit_rent", self.unit_rent),
            ("unit_return", self.unit_return),
            ("unit_move_per_hour", self.unit_move_per_hour),
            ("demand_ship_per_hour", self.demand_ship_per_hour),
            ("outsource_per_module", self.outsource_per_module),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionSchedule {
    pub w: Vec<bool>,
    pub revisions: usize,
}

impl RevisionSchedule {
    /// Every period is a revision point.
    pub fn full(horizon: usize) -> Self {
        Self::from_flags(alloc::vec![true; horizon])
    }

    /// Only the first period allows level changes.
    pub fn first_only(horizon: usize) -> Self {
        let mut w = alloc::vec![false; horizon];
        if let Some(first) = w.first_mut() {
            *first = true;
        }
        Self::from_flags(w)
    }

    pub fn from_flags(w: Vec<bool>) -> Self {
        let revisions = w.iter().filter(|&&f| f).count();
        RevisionSchedule { w, revisions }
    }

    /// Schedule with revision points at the given 1-based periods.
    pub fn from_points(horizon: usize, points: &[usize]) -> Self {
        let mut w = alloc::vec![false; horizon];
        for &p in points {
            if p >= 1 && p <= horizon {
                w[p - 1] = true;
            }
        }
        Self::from_flags(w)
    }

    /// Whether stage `t` (1-based) is a revision point. Stages past the end
    /// of the schedule are treated as closed.
    pub fn allows(&self, t: usize) -> bool {
        t >= 1 && self.w.get(t - 1).copied().unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub network: Network,
    pub capacity: CapacityStructure,
    pub costs: CostParameters,
    pub horizon: usize,
    pub revision: RevisionSchedule,
    /// Nominal demand `demand_forecast[t][i]` in modules, stage `t` 0-based.
    pub demand_forecast: Vec<Vec<f64>>,
}

impl Instance {
    pub fn n_facilities(&self) -> usize {
        self.network.facilities.len()
    }

    pub fn n_locations(&self) -> usize {
        self.network.demand_locations.len()
    }

    pub fn n_levels(&self) -> usize {
        self.capacity.levels
    }

    /// Length of the binary state vector `Y[j, l1, l2]`.
    pub fn state_dim(&self) -> usize {
        let l = self.n_levels();
        self.n_facilities() * l * l
    }

    /// Flat index of `Y[j, l1, l2]`.
    #[inline]
    pub fn state_index(&self, j: usize, l1: usize, l2: usize) -> usize {
        let l = self.n_levels();
        (j * l + l1) * l + l2
    }

    /// Inverse of [`Instance::state_index`].
    pub fn state_coords(&self, idx: usize) -> (usize, usize, usize) {
        let l = self.n_levels();
        (idx / (l * l), (idx / l) % l, idx % l)
    }

    pub fn modules(&self, j: usize, l: usize) -> f64 {
        f64::from(self.capacity.modules_per_level[j][l])
    }

    /// Travel hours between two move-network sites.
    pub fn travel_hours(&self, a: usize, b: usize) -> f64 {
        self.network.site_distance(a, b) / self.costs.travel_speed
    }

    /// Shipping cost per module from facility `j` to location `i`.
    pub fn shipping_cost(&self, i: usize, j: usize) -> f64 {
        self.costs.demand_ship_per_hour * self.network.demand_distance(i, j)
            / self.costs.travel_speed
    }

    /// Cost of moving facility `j` from level `l1` to level `l2` in one period.
    pub fn facility_transition_cost(&self, j: usize, l1: usize, l2: usize) -> Result<f64> {
        if j >= self.n_facilities() {
            return Err(Error::InvalidFacility(j));
        }
        let count = self.n_levels();
        for l in [l1, l2] {
            if l >= count {
                return Err(Error::InvalidLevel { level: l, count });
            }
        }
        let c = &self.costs;
        let upkeep = c.maintain_per_level * l2 as f64;
        let cost = if l1 == l2 {
            upkeep
        } else if l1 == 0 {
            c.commissioning + upkeep
        } else if l2 == 0 {
            c.decommissioning
        } else if l2 > l1 {
            c.expand_per_level * (l2 - l1) as f64 + upkeep
        } else {
            c.reduce_per_level * (l1 - l2) as f64 + upkeep
        };
        Ok(cost)
    }

    /// Cost of moving one module along the move-network pair `(from, to)`.
    pub fn module_move_cost(&self, from: usize, to: usize) -> Result<f64> {
        if !self.network.feasible_move_pairs.contains(&(from, to)) {
            return Err(Error::InfeasibleMove { from, to });
        }
        let c = &self.costs;
        Ok(if from == DEPOT {
            c.unit_rent
        } else if to == DEPOT {
            c.unit_return
        } else {
            c.unit_move_per_hour * self.travel_hours(from, to)
        })
    }

    /// Returns a human-readable list of invariant violations.
    pub fn validate(&self) -> Vec<String> {
        validate_instance(self)
    }
}

pub type PairList = Vec<(usize, usize)>;

/// Enumerates feasible demand and module-move pairs.
///
/// The returned vectors are sorted, so the same point sets always give the
/// same pair sets.
pub fn build_feasible_pairs(
    locations: &[Location],
    facilities: &[Location],
    ship_limit: f64,
    relocation_limit: f64,
) -> (PairList, PairList) {
    let mut ij = Vec::new();
    for (i, loc) in locations.iter().enumerate() {
        for (j, fac) in facilities.iter().enumerate() {
            if loc.distance(fac) <= ship_limit {
                ij.push((i, j));
            }
        }
    }
    let mut jj = Vec::new();
    for a in 0..facilities.len() {
        jj.push((DEPOT, site_of(a)));
        jj.push((site_of(a), DEPOT));
        for b in 0..facilities.len() {
            if a != b && facilities[a].distance(&facilities[b]) <= relocation_limit {
                jj.push((site_of(a), site_of(b)));
            }
        }
    }
    jj.sort_unstable();
    (ij, jj)
}

pub fn validate_instance(inst: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let net = &inst.network;
    let cap = &inst.capacity;
    let nj = net.facilities.len();
    let ni = net.demand_locations.len();

    if inst.horizon < 1 {
        out.push(String::from("horizon must be at least 1"));
    }
    if nj == 0 {
        out.push(String::from("network has no facilities"));
    }
    if net.depot != DEPOT {
        out.push(format!("depot id must be {DEPOT}, found {}", net.depot));
    }
    for l in net.demand_locations.iter().chain(net.facilities.iter()) {
        if !l.x.is_finite() || !l.y.is_finite() {
            out.push(format!("site {} has non-finite coordinates", l.id));
        }
    }

    for &(i, j) in &net.feasible_demand_pairs {
        if i >= ni || j >= nj {
            out.push(format!("demand pair ({i}, {j}) references an unknown site"));
        } else if net.demand_distance(i, j) > net.module_ship_limit {
            out.push(format!("demand pair ({i}, {j}) exceeds the shipping limit"));
        }
    }
    for i in 0..ni {
        if !net.feasible_demand_pairs.iter().any(|&(a, _)| a == i) {
            out.push(format!(
                "demand location {i} is not within reach of any facility"
            ));
        }
    }
    for &(a, b) in &net.feasible_move_pairs {
        if a == b {
            out.push(format!("move pair ({a}, {b}) is a self-pair"));
        } else if a > nj || b > nj {
            out.push(format!("move pair ({a}, {b}) references an unknown site"));
        } else if a != DEPOT && b != DEPOT && net.site_distance(a, b) > net.unit_relocation_limit {
            out.push(format!("move pair ({a}, {b}) exceeds the relocation limit"));
        }
    }
    for j in 0..nj {
        for pair in [(DEPOT, site_of(j)), (site_of(j), DEPOT)] {
            if !net.feasible_move_pairs.contains(&pair) {
                out.push(format!("depot pair {pair:?} for facility {j} is missing"));
            }
        }
    }

    if cap.levels < 2 {
        out.push(String::from("capacity structure needs at least two levels"));
    }
    if cap.modules_per_level.len() != nj {
        out.push(format!(
            "modules_per_level has {} rows for {nj} facilities",
            cap.modules_per_level.len()
        ));
    }
    for (j, row) in cap.modules_per_level.iter().enumerate() {
        if row.len() != cap.levels {
            out.push(format!(
                "facility {j} has {} levels, expected {}",
                row.len(),
                cap.levels
            ));
        }
        if row.first().is_some_and(|&u| u != 0) {
            out.push(format!(
                "facility {j} must have zero modules at the closed level"
            ));
        }
        if row.windows(2).any(|w| w[1] <= w[0]) {
            out.push(format!(
                "facility {j} module counts are not strictly increasing"
            ));
        }
    }
    if cap.initial_level.len() != nj {
        out.push(format!(
            "initial_level has {} entries for {nj} facilities",
            cap.initial_level.len()
        ));
    }
    for (j, &v) in cap.initial_level.iter().enumerate() {
        if v >= cap.levels {
            out.push(format!("facility {j} initial level {v} is out of range"));
        }
    }
    if !(cap.nominal_rate.is_finite() && cap.nominal_rate >= 0.0) {
        out.push(String::from(
            "nominal_rate must be a finite nonnegative number",
        ));
    }

    for (name, v) in inst.costs.money_fields() {
        if !(v.is_finite() && v >= 0.0) {
            out.push(format!("cost {name} must be finite and nonnegative"));
        }
    }
    if !(inst.costs.travel_speed.is_finite() && inst.costs.travel_speed > 0.0) {
        out.push(String::from("travel_speed must be positive"));
    }

    let rev = &inst.revision;
    if rev.w.len() != inst.horizon {
        out.push(format!(
            "revision schedule has {} flags for horizon {}",
            rev.w.len(),
            inst.horizon
        ));
    }
    if rev.w.first() != Some(&true) {
        out.push(String::from("first stage must allow revision"));
    }
    let count = rev.w.iter().filter(|&&f| f).count();
    if count != rev.revisions {
        out.push(format!(
            "revision schedule declares {} revisions but flags {count}",
            rev.revisions
        ));
    }

    if inst.demand_forecast.len() != inst.horizon {
        out.push(format!(
            "demand_forecast has {} periods for horizon {}",
            inst.demand_forecast.len(),
            inst.horizon
        ));
    }
    for (t, row) in inst.demand_forecast.iter().enumerate() {
        if row.len() != ni {
            out.push(format!(
                "demand_forecast period {} has {} entries",
                t + 1,
                row.len()
            ));
        }
        if row.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            out.push(format!(
                "demand_forecast period {} has a negative entry",
                t + 1
            ));
        }
    }
    out
}
