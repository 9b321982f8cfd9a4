use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CutFamily {
    #[serde(rename = "B")]
    Benders,
    #[serde(rename = "SB")]
    StrengthenedBenders,
    #[serde(rename = "I")]
    Integer,
    #[serde(rename = "L")]
    Lagrangian,
    #[serde(rename = "PT")]
    ParetoOptimal,
    #[serde(rename = "IM")]
    IndependentMw,
    #[serde(rename = "SPT")]
    StrengthenedPareto,
    #[serde(rename = "SIM")]
    StrengthenedIndependentMw,
}

impl CutFamily {
    pub const ALL: [CutFamily; 8] = [
        CutFamily::Benders,
        CutFamily::StrengthenedBenders,
        CutFamily::Integer,
        CutFamily::Lagrangian,
        CutFamily::ParetoOptimal,
        CutFamily::IndependentMw,
        CutFamily::StrengthenedPareto,
        CutFamily::StrengthenedIndependentMw,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CutFamily::Benders => "B",
            CutFamily::StrengthenedBenders => "SB",
            CutFamily::Integer => "I",
            CutFamily::Lagrangian => "L",
            CutFamily::ParetoOptimal => "PT",
            CutFamily::IndependentMw => "IM",
            CutFamily::StrengthenedPareto => "SPT",
            CutFamily::StrengthenedIndependentMw => "SIM",
        }
    }

    /// Families built from integer subproblem solutions rather than an LP
    /// relaxation.
    pub fn is_integer(self) -> bool {
        matches!(self, CutFamily::Integer | CutFamily::Lagrangian)
    }

    pub fn uses_core_point(self) -> bool {
        matches!(
            self,
            CutFamily::ParetoOptimal
                | CutFamily::IndependentMw
                | CutFamily::StrengthenedPareto
                | CutFamily::StrengthenedIndependentMw
        )
    }
}

impl fmt::Display for CutFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CutFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let up = s.trim().to_ascii_uppercase();
        CutFamily::ALL
            .into_iter()
            .find(|f| f.label() == up)
            .ok_or_else(|| Error::Config(alloc::format!("unknown cut family '{s}'")))
    }
}

/// Affine lower bound `intercept + slope^T y` on the expected cost after
/// `stage`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub stage: usize,
    pub family: CutFamily,
    pub intercept: f64,
    pub slope: Vec<f64>,
    pub iteration: usize,
    pub core_point: Option<Vec<f64>>,
}

impl Cut {
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    pub stage: usize,
    pub floor: f64,
    pub cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new(stage: usize) -> Self {
        CutPool {
            stage,
            floor: 0.0,
            cuts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    /// Adds a cut unless an identical one is present. Returns whether it
    /// was added.
    pub fn push(&mut self, cut: Cut) -> bool {
        let dup = self.cuts.iter().any(|c| {
            c.family == cut.family && c.intercept == cut.intercept && c.slope == cut.slope
        });
        if !dup {
            self.cuts.push(cut);
        }
        !dup
    }

    /// `max(floor, max_k cut_k(y))`.
    pub fn value(&self, y: &[f64]) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.evaluate(y))
            .fold(self.floor, f64::max)
    }

    pub fn census(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for c in &self.cuts {
            *m.entry(String::from(c.family.label())).or_insert(0) += 1;
        }
        m
    }
}

/// Cut counts by family over several pools.
pub fn census(pools: &[CutPool]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for p in pools {
        for (k, v) in p.census() {
            *m.entry(k).or_insert(0) += v;
        }
    }
    m
}

/// A pairing of one LP-based family with one integer family. Either slot
/// may be empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPreset {
    pub lp: Option<CutFamily>,
    pub integer: Option<CutFamily>,
}

impl Default for CutPreset {
    fn default() -> Self {
        CutPreset {
            lp: Some(CutFamily::StrengthenedIndependentMw),
            integer: Some(CutFamily::Integer),
        }
    }
}

impl CutPreset {
    pub fn single(f: CutFamily) -> Self {
        if f.is_integer() {
            CutPreset {
                lp: None,
                integer: Some(f),
            }
        } else {
            CutPreset {
                lp: Some(f),
                integer: None,
            }
        }
    }

    /// Family used on a first visit.
    pub fn lp_family(&self) -> Option<CutFamily> {
        self.lp.or(self.integer)
    }

    /// Family used on a revisit.
    pub fn integer_family(&self) -> Option<CutFamily> {
        self.integer.or(self.lp)
    }

    pub fn families(&self) -> Vec<CutFamily> {
        let mut v: Vec<CutFamily> = self.lp.into_iter().chain(self.integer).collect();
        v.dedup();
        v
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = self.families().iter().map(|f| f.label()).collect();
        parts.join("+")
    }
}

impl FromStr for CutPreset {
    type Err = Error;

    /// Accepts labels such as `SIM+I`, `sim-i`, `SB + L` or a single family.
    fn from_str(s: &str) -> Result<Self, Error> {
        let mut preset = CutPreset {
            lp: None,
            integer: None,
        };
        let parts: Vec<&str> = s
            .split(['+', '-'])
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .collect();
        if parts.is_empty() || parts.len() > 2 {
            return Err(Error::Config(alloc::format!("invalid cut preset '{s}'")));
        }
        for p in parts {
            let f: CutFamily = p.parse()?;
            let slot = if f.is_integer() {
                &mut preset.integer
            } else {
                &mut preset.lp
            };
            if slot.is_some() {
                return Err(Error::Config(alloc::format!(
                    "cut preset '{s}' names two families of the same kind"
                )));
            }
            *slot = Some(f);
        }
        Ok(preset)
    }
}
