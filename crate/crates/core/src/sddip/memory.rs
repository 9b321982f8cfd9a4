//! Core points and alternation memory.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Core points keyed by `(stage, realization block)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorePointStore {
    pub weight: f64,
    pub points: BTreeMap<(usize, usize), Vec<f64>>,
}

impl CorePointStore {
    pub fn new(weight: f64) -> Self {
        CorePointStore {
            weight,
            points: BTreeMap::new(),
        }
    }

    /// First visit stores `y`; later visits blend `weight * old + (1 - weight) * y`.
    pub fn update(&mut self, stage: usize, block: usize, y: &[f64]) -> &[f64] {
        let w = self.weight;
        let entry = self
            .points
            .entry((stage, block))
            .or_insert_with(|| y.to_vec());
        for (c, &v) in entry.iter_mut().zip(y) {
            *c = w * *c + (1.0 - w) * v;
        }
        entry
    }

    pub fn get(&self, stage: usize, block: usize) -> Option<&[f64]> {
        self.points.get(&(stage, block)).map(Vec::as_slice)
    }
}

/// `(stage, node, binary state)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId {
    pub stage: usize,
    pub node: usize,
    pub state: Vec<bool>,
}

impl StateId {
    pub fn new(stage: usize, node: usize, y: &[f64]) -> Self {
        StateId {
            stage,
            node,
            state: y.iter().map(|&v| v > 0.5).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternationAction {
    LpCut,
    IntCut,
    Accept,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternationMemory {
    pub lp_visited: BTreeSet<StateId>,
    pub int_visited: BTreeSet<StateId>,
    pub accepted: usize,
    pub threshold: usize,
}

impl AlternationMemory {
    pub fn new(threshold: usize) -> Self {
        AlternationMemory {
            lp_visited: BTreeSet::new(),
            int_visited: BTreeSet::new(),
            accepted: 0,
            threshold,
        }
    }

    pub fn decide(&mut self, id: &StateId) -> AlternationAction {
        if self.accepted >= self.threshold {
            self.lp_visited.clear();
            self.int_visited.clear();
            self.accepted = 0;
        }
        if !self.lp_visited.contains(id) {
            self.lp_visited.insert(id.clone());
            AlternationAction::LpCut
        } else if !self.int_visited.contains(id) {
            self.int_visited.insert(id.clone());
            AlternationAction::IntCut
        } else {
            self.accepted += 1;
            AlternationAction::Accept
        }
    }
}
