//! Solver-independent linear model description and the backend boundary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: Option<String>,
}

/// Minimization model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective_offset: f64,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ModelSpec {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
        cost: f64,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            cost,
        });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row and returns its index.
    pub fn add_row(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        tag: Option<String>,
    ) -> usize {
        self.constraints.push(Constraint {
            terms,
            sense,
            rhs,
            tag,
        });
        self.constraints.len() - 1
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_mut(&mut self, id: VarId) -> &mut Variable {
        &mut self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.kind != VarKind::Continuous)
    }

    /// Copy with every variable continuous.
    pub fn relaxed(&self) -> ModelSpec {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }

    /// Objective value of a primal vector.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.cost * x)
                .sum::<f64>()
    }

    /// Largest bound or row violation of a primal vector.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(id, a)| a * values[id.0]).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => libm::fabs(lhs - c.rhs),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Checks variable references, bounds and tag uniqueness.
    pub fn check(&self) -> Result<()> {
        let n = self.variables.len();
        for (k, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper || !v.cost.is_finite() {
                return Err(Error::Invariant(format!(
                    "variable {k} ({}) is malformed",
                    v.name
                )));
            }
        }
        let mut tags = alloc::collections::BTreeSet::new();
        for (r, c) in self.constraints.iter().enumerate() {
            if c.terms.iter().any(|(id, a)| id.0 >= n || !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::Invariant(format!("row {r} is malformed")));
            }
            if let Some(t) = &c.tag {
                if !tags.insert(t.as_str()) {
                    return Err(Error::Invariant(format!("row tag {t} is not unique")));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump in an LP-file-like layout.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let name = |id: VarId| self.variables[id.0].name.as_str();
        let _ = writeln!(s, "\\ model {}", self.name);
        let _ = write!(s, "Minimize\n obj:");
        for v in &self.variables {
            if v.cost != 0.0 {
                let _ = write!(s, " {:+} {}", v.cost, v.name);
            }
        }
        if self.objective_offset != 0.0 {
            let _ = write!(s, " {:+}", self.objective_offset);
        }
        let _ = writeln!(s, "\nSubject To");
        for (r, c) in self.constraints.iter().enumerate() {
            match &c.tag {
                Some(t) => {
                    let _ = write!(s, " {t}:");
                }
                None => {
                    let _ = write!(s, " r{r}:");
                }
            }
            for &(id, a) in &c.terms {
                let _ = write!(s, " {:+} {}", a, name(id));
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", c.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for v in &self.variables {
            let lo = if v.lower.is_finite() {
                format!("{}", v.lower)
            } else {
                "-inf".into()
            };
            let hi = if v.upper.is_finite() {
                format!("{}", v.upper)
            } else {
                "+inf".into()
            };
            let _ = writeln!(s, " {lo} <= {} <= {hi}", v.name);
        }
        for (label, kind) in [
            ("Generals", VarKind::Integer),
            ("Binaries", VarKind::Binary),
        ] {
            let names: Vec<&str> = self
                .variables
                .iter()
                .filter(|v| v.kind == kind)
                .map(|v| v.name.as_str())
                .collect();
            if !names.is_empty() {
                let _ = writeln!(s, "{label}");
                for n in names {
                    let _ = writeln!(s, " {n}");
                }
            }
        }
        s.push_str("End\n");
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals in row order, as objective change per unit rhs increase.
    /// Present only for continuous solves.
    pub row_duals: Option<Vec<f64>>,
    /// Duals of tagged rows.
    pub duals: Option<BTreeMap<String, f64>>,
    /// Relative MIP gap reported by the backend.
    pub gap: Option<f64>,
}

impl SolveResult {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Fails with a solver error unless the status is optimal.
    pub fn require_optimal(self, context: &'static str) -> Result<SolveResult> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                context,
            })
        }
    }
}

/// Collects the duals of tagged rows.
pub fn tagged_duals(model: &ModelSpec, row_duals: &[f64]) -> BTreeMap<String, f64> {
    model
        .constraints
        .iter()
        .zip(row_duals)
        .filter_map(|(c, &d)| c.tag.as_ref().map(|t| (t.clone(), d)))
        .collect()
}

/// An LP/MIP engine. Implementations must be callable from several threads
/// on distinct models.
pub trait SolverBackend: Sync {
    fn name(&self) -> &str;

    /// Solves respecting integrality.
    fn solve_mip(&self, model: &ModelSpec) -> Result<SolveResult>;

    /// Solves the continuous relaxation and reports row duals.
    fn solve_lp(&self, model: &ModelSpec) -> Result<SolveResult>;
}
