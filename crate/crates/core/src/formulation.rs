//! Model builders for the capacity planning program.
//!
//! Per node the variables are the level transitions `Y[j,l1,l2]` (binary),
//! module moves `F[a,b]` and module counts `S[j]` (integer), shipments
//! `X[i,j]` and outsourcing `R[j]` (continuous). A node is linked to its
//! predecessor through module counts and level continuity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{facility_of, site_of, Instance, RevisionSchedule, DEPOT};
use crate::model::{ModelSpec, Sense, SolveResult, SolverBackend, VarId, VarKind};
use crate::scenario::{Realization, ScenarioTree};
use crate::sddip::cut::CutPool;

/// Which module moves are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovePolicy {
    /// Every feasible pair of the move network.
    #[default]
    Full,
    /// Only renting from and returning to the depot.
    DepotOnly,
    /// Depot moves in the first stage, nothing afterwards.
    DepotFirstStageOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulationOptions {
    pub revision: RevisionSchedule,
    pub moves: MovePolicy,
}

impl FormulationOptions {
    pub fn for_instance(inst: &Instance) -> Self {
        FormulationOptions {
            revision: inst.revision.clone(),
            moves: MovePolicy::Full,
        }
    }

    pub fn move_pairs(&self, inst: &Instance, stage: usize) -> Vec<(usize, usize)> {
        inst.network
            .feasible_move_pairs
            .iter()
            .copied()
            .filter(|&(a, b)| match self.moves {
                MovePolicy::Full => true,
                MovePolicy::DepotOnly => a == DEPOT || b == DEPOT,
                MovePolicy::DepotFirstStageOnly => stage == 1 && (a == DEPOT || b == DEPOT),
            })
            .collect()
    }
}

/// Variable handles of one node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeVars {
    pub y: Vec<VarId>,
    pub f: Vec<((usize, usize), VarId)>,
    pub s: Vec<VarId>,
    pub x: Vec<((usize, usize), VarId)>,
    pub r: Vec<VarId>,
}

/// How a node's starting point is given.
#[derive(Clone, Copy, Debug)]
pub enum Incoming<'a> {
    /// First stage: start from the initial levels.
    Initial,
    /// Predecessor node in the same model.
    Parent(&'a NodeVars),
    /// Local copy variables pinned to the given state by tagged link rows.
    Copy(&'a [f64]),
    /// The given state enters as constants.
    Fixed(&'a [f64]),
}

/// Copy variables and link rows of a stage subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct CopyVars {
    pub yp: Vec<VarId>,
    pub link_rows: Range<usize>,
}

/// Tag of the `k`-th link row.
pub fn link_tag(k: usize) -> String {
    format!("link[{k}]")
}

/// Level-transition plan: `transitions[t - 1][j] = (l1, l2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub transitions: Vec<Vec<(usize, usize)>>,
}

impl CapacityPlan {
    /// Checks levels, the initial level, continuity and revision gating.
    pub fn check(&self, inst: &Instance, revision: &RevisionSchedule) -> Result<()> {
        let nl = inst.n_levels();
        for (k, stage) in self.transitions.iter().enumerate() {
            let t = k + 1;
            if stage.len() != inst.n_facilities() {
                return Err(Error::InconsistentPlan(format!(
                    "stage {t} has {} facilities",
                    stage.len()
                )));
            }
            for (j, &(l1, l2)) in stage.iter().enumerate() {
                if l1 >= nl || l2 >= nl {
                    return Err(Error::InconsistentPlan(format!(
                        "facility {j} stage {t} uses an unknown level"
                    )));
                }
                let start = if t == 1 {
                    inst.capacity.initial_level[j]
                } else {
                    self.transitions[k - 1][j].1
                };
                if l1 != start {
                    return Err(Error::InconsistentPlan(format!(
                        "facility {j} stage {t} starts at level {l1}, expected {start}"
                    )));
                }
                if l1 != l2 && !revision.allows(t) {
                    return Err(Error::InconsistentPlan(format!(
                        "facility {j} changes level at stage {t}, which is not a revision point"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One-hot state vector of a transition list.
pub fn state_from_transitions(inst: &Instance, trans: &[(usize, usize)]) -> Vec<f64> {
    let mut y = alloc::vec![0.0; inst.state_dim()];
    for (j, &(a, b)) in trans.iter().enumerate() {
        y[inst.state_index(j, a, b)] = 1.0;
    }
    y
}

/// Transition per facility of a (near) binary state vector.
pub fn transitions_from_state(inst: &Instance, y: &[f64]) -> Vec<(usize, usize)> {
    let nl = inst.n_levels();
    (0..inst.n_facilities())
        .map(|j| {
            let mut best = (0, 0);
            let mut best_v = f64::NEG_INFINITY;
            for a in 0..nl {
                for b in 0..nl {
                    let v = y[inst.state_index(j, a, b)];
                    if v > best_v {
                        best_v = v;
                        best = (a, b);
                    }
                }
            }
            best
        })
        .collect()
}

/// Rounds a state vector to binary.
pub fn round_state(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect()
}

/// Every binary state with one transition per facility.
pub fn enumerate_states(inst: &Instance) -> Vec<Vec<f64>> {
    let nl = inst.n_levels();
    let per = nl * nl;
    let nj = inst.n_facilities();
    let total = per.pow(nj as u32);
    (0..total)
        .map(|mut code| {
            let mut y = alloc::vec![0.0; inst.state_dim()];
            for j in 0..nj {
                let k = code % per;
                code /= per;
                y[inst.state_index(j, k / nl, k % nl)] = 1.0;
            }
            y
        })
        .collect()
}

/// Module count implied by a state vector for facility `j`.
fn state_modules(inst: &Instance, y: &[f64], j: usize) -> f64 {
    let nl = inst.n_levels();
    let mut s = 0.0;
    for a in 0..nl {
        for b in 0..nl {
            s += inst.modules(j, b) * y[inst.state_index(j, a, b)];
        }
    }
    s
}

fn total_modules(inst: &Instance) -> f64 {
    (0..inst.n_facilities())
        .map(|j| inst.modules(j, inst.n_levels() - 1))
        .sum()
}

/// Adds one node's variables and constraints. Objective terms are scaled by
/// `weight`.
#[allow(clippy::too_many_arguments)]
pub fn add_node(
    m: &mut ModelSpec,
    inst: &Instance,
    stage: usize,
    real: &Realization,
    weight: f64,
    incoming: Incoming<'_>,
    opts: &FormulationOptions,
    label: &str,
) -> Result<(NodeVars, Option<CopyVars>)> {
    let nj = inst.n_facilities();
    let nl = inst.n_levels();
    let gated = !opts.revision.allows(stage);
    let move_cap = total_modules(inst);

    let mut y = Vec::with_capacity(inst.state_dim());
    for j in 0..nj {
        for a in 0..nl {
            for b in 0..nl {
                let c = inst.facility_transition_cost(j, a, b)?;
                let ub = if gated && a != b { 0.0 } else { 1.0 };
                y.push(m.add_var(
                    format!("Y[{j},{a},{b}]{label}"),
                    VarKind::Binary,
                    0.0,
                    ub,
                    weight * c,
                ));
            }
        }
    }
    let mut f = Vec::new();
    for (a, b) in opts.move_pairs(inst, stage) {
        let c = inst.module_move_cost(a, b)?;
        let v = m.add_var(
            format!("F[{a},{b}]{label}"),
            VarKind::Integer,
            0.0,
            move_cap,
            weight * c,
        );
        f.push(((a, b), v));
    }
    let s: Vec<VarId> = (0..nj)
        .map(|j| {
            let top = inst.modules(j, nl - 1);
            m.add_var(format!("S[{j}]{label}"), VarKind::Integer, 0.0, top, 0.0)
        })
        .collect();
    let mut x = Vec::new();
    for &(i, j) in &inst.network.feasible_demand_pairs {
        let c = inst.shipping_cost(i, j);
        let v = m.add_var(
            format!("X[{i},{j}]{label}"),
            VarKind::Continuous,
            0.0,
            f64::INFINITY,
            weight * c,
        );
        x.push(((i, j), v));
    }
    let r: Vec<VarId> = (0..nj)
        .map(|j| {
            m.add_var(
                format!("R[{j}]{label}"),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                weight * inst.costs.outsource_per_module,
            )
        })
        .collect();

    for (i, &d) in real.demand.iter().enumerate() {
        let terms: Vec<_> = x
            .iter()
            .filter(|((a, _), _)| *a == i)
            .map(|&(_, v)| (v, 1.0))
            .collect();
        if terms.is_empty() {
            if d > 0.0 {
                return Err(Error::Invariant(format!(
                    "demand location {i} has no facility"
                )));
            }
            continue;
        }
        m.add_row(terms, Sense::Ge, d, None);
    }
    for j in 0..nj {
        let mut terms = alloc::vec![(s[j], real.throughput[j]), (r[j], 1.0)];
        terms.extend(
            x.iter()
                .filter(|((_, b), _)| *b == j)
                .map(|&(_, v)| (v, -1.0)),
        );
        m.add_row(terms, Sense::Ge, 0.0, None);
    }
    for j in 0..nj {
        let mut terms = alloc::vec![(s[j], 1.0)];
        for a in 0..nl {
            for b in 0..nl {
                let u = inst.modules(j, b);
                if u != 0.0 {
                    terms.push((y[inst.state_index(j, a, b)], -u));
                }
            }
        }
        m.add_row(terms, Sense::Eq, 0.0, None);
    }
    for j in 0..nj {
        let terms = (0..nl * nl).map(|k| (y[j * nl * nl + k], 1.0)).collect();
        m.add_row(terms, Sense::Eq, 1.0, None);
    }

    // Module balance: S_j - inflow + outflow - (previous modules) = 0.
    let balance = |j: usize| -> Vec<(VarId, f64)> {
        let site = site_of(j);
        let mut terms = alloc::vec![(s[j], 1.0)];
        for &((a, b), v) in &f {
            if b == site {
                terms.push((v, -1.0));
            }
            if a == site {
                terms.push((v, 1.0));
            }
        }
        terms
    };
    // Level continuity for facility j and level l: outgoing transitions.
    let leaving = |j: usize, l: usize| -> Vec<(VarId, f64)> {
        (0..nl)
            .map(|b| (y[inst.state_index(j, l, b)], 1.0))
            .collect()
    };

    let mut copy = None;
    match incoming {
        Incoming::Initial => {
            for j in 0..nj {
                let v = inst.capacity.initial_level[j];
                m.add_row(balance(j), Sense::Eq, inst.modules(j, v), None);
                m.add_row(leaving(j, v), Sense::Eq, 1.0, None);
            }
        }
        Incoming::Parent(p) => {
            for j in 0..nj {
                let mut terms = balance(j);
                terms.push((p.s[j], -1.0));
                m.add_row(terms, Sense::Eq, 0.0, None);
                for l in 0..nl {
                    let mut terms = leaving(j, l);
                    terms.extend((0..nl).map(|a| (p.y[inst.state_index(j, a, l)], -1.0)));
                    m.add_row(terms, Sense::Eq, 0.0, None);
                }
            }
        }
        Incoming::Fixed(state) => {
            for j in 0..nj {
                m.add_row(balance(j), Sense::Eq, state_modules(inst, state, j), None);
                for l in 0..nl {
                    let arriving: f64 = (0..nl).map(|a| state[inst.state_index(j, a, l)]).sum();
                    m.add_row(leaving(j, l), Sense::Eq, arriving, None);
                }
            }
        }
        Incoming::Copy(state) => {
            let yp: Vec<VarId> = (0..inst.state_dim())
                .map(|k| {
                    let (j, a, b) = inst.state_coords(k);
                    m.add_var(
                        format!("Yp[{j},{a},{b}]{label}"),
                        VarKind::Continuous,
                        0.0,
                        1.0,
                        0.0,
                    )
                })
                .collect();
            for j in 0..nj {
                let mut terms = balance(j);
                for a in 0..nl {
                    for b in 0..nl {
                        let u = inst.modules(j, b);
                        if u != 0.0 {
                            terms.push((yp[inst.state_index(j, a, b)], -u));
                        }
                    }
                }
                m.add_row(terms, Sense::Eq, 0.0, None);
                for l in 0..nl {
                    let mut terms = leaving(j, l);
                    terms.extend((0..nl).map(|a| (yp[inst.state_index(j, a, l)], -1.0)));
                    m.add_row(terms, Sense::Eq, 0.0, None);
                }
            }
            let start = m.num_rows();
            for (k, &v) in yp.iter().enumerate() {
                m.add_row(
                    alloc::vec![(v, 1.0)],
                    Sense::Eq,
                    state[k],
                    Some(link_tag(k)),
                );
            }
            copy = Some(CopyVars {
                yp,
                link_rows: start..m.num_rows(),
            });
        }
    }

    Ok((NodeVars { y, f, s, x, r }, copy))
}

/// Starting point of a stage subproblem.
#[derive(Clone, Copy, Debug)]
pub enum StageStart<'a> {
    Initial,
    State(&'a [f64]),
}

/// A single node's subproblem with copy variables and a cut-backed
/// cost-to-go variable.
#[derive(Clone, Debug)]
pub struct StageModel {
    pub spec: ModelSpec,
    pub stage: usize,
    pub vars: NodeVars,
    pub copy: Option<CopyVars>,
    pub theta: Option<VarId>,
}

impl StageModel {
    /// `pool` is the approximation of the expected cost after this stage;
    /// pass `None` at the last stage.
    pub fn build(
        inst: &Instance,
        stage: usize,
        real: &Realization,
        start: StageStart<'_>,
        pool: Option<&CutPool>,
        opts: &FormulationOptions,
    ) -> Result<Self> {
        let mut spec = ModelSpec::new(format!("stage{stage}"));
        let incoming = match start {
            StageStart::Initial => Incoming::Initial,
            StageStart::State(y) => Incoming::Copy(y),
        };
        let (vars, copy) = add_node(&mut spec, inst, stage, real, 1.0, incoming, opts, "")?;
        let theta = pool.map(|pool| {
            let th = spec.add_var("theta", VarKind::Continuous, pool.floor, f64::INFINITY, 1.0);
            for cut in &pool.cuts {
                let mut terms = alloc::vec![(th, 1.0)];
                terms.extend(
                    cut.slope
                        .iter()
                        .enumerate()
                        .filter(|(_, &a)| a != 0.0)
                        .map(|(k, &a)| (vars.y[k], -a)),
                );
                spec.add_row(terms, Sense::Ge, cut.intercept, None);
            }
            th
        });
        Ok(StageModel {
            spec,
            stage,
            vars,
            copy,
            theta,
        })
    }

    /// Re-pins the copy variables to another incoming state.
    pub fn set_incoming(&mut self, state: &[f64]) {
        if let Some(c) = &self.copy {
            for (k, row) in c.link_rows.clone().enumerate() {
                self.spec.constraints[row].rhs = state[k];
            }
        }
    }

    pub fn incoming(&self) -> Option<Vec<f64>> {
        self.copy.as_ref().map(|c| {
            c.link_rows
                .clone()
                .map(|r| self.spec.constraints[r].rhs)
                .collect()
        })
    }

    pub fn state(&self, res: &SolveResult) -> Vec<f64> {
        self.vars.y.iter().map(|&v| res.value(v)).collect()
    }

    pub fn theta_value(&self, res: &SolveResult) -> f64 {
        self.theta.map_or(0.0, |t| res.value(t))
    }

    /// Objective without the cost-to-go term.
    pub fn stage_cost(&self, res: &SolveResult) -> f64 {
        res.objective - self.theta_value(res)
    }

    /// Duals of the link rows, in state order.
    pub fn link_duals(&self, res: &SolveResult) -> Result<Vec<f64>> {
        let c = self
            .copy
            .as_ref()
            .ok_or_else(|| Error::Invariant("stage model has no copy variables".into()))?;
        let d = res
            .row_duals
            .as_ref()
            .ok_or_else(|| Error::Invariant("solve result carries no duals".into()))?;
        Ok(c.link_rows.clone().map(|r| d[r]).collect())
    }

    /// The relaxation with link rows dropped and `pi^T (y_hat - Yp)` added
    /// to the objective.
    pub fn lagrangian_model(&self, pi: &[f64]) -> Result<ModelSpec> {
        let c = self
            .copy
            .as_ref()
            .ok_or_else(|| Error::Invariant("stage model has no copy variables".into()))?;
        let y_hat = self.incoming().unwrap_or_default();
        let mut m = self.spec.clone();
        m.constraints.drain(c.link_rows.clone());
        for (k, &v) in c.yp.iter().enumerate() {
            m.variables[v.0].cost -= pi[k];
            m.objective_offset += pi[k] * y_hat[k];
        }
        Ok(m)
    }
}

/// Value of the Lagrangian relaxation at multipliers `pi` (including the
/// `pi^T y_hat` constant) and the copy-variable values at its minimizer.
pub fn evaluate_lagrangian(
    backend: &dyn SolverBackend,
    model: &StageModel,
    pi: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let spec = model.lagrangian_model(pi)?;
    let res = backend
        .solve_mip(&spec)?
        .require_optimal("lagrangian relaxation")?;
    let yp = model
        .copy
        .as_ref()
        .map(|c| c.yp.iter().map(|&v| res.value(v)).collect())
        .unwrap_or_default();
    Ok((res.objective, yp))
}

/// A model covering several nodes.
#[derive(Clone, Debug)]
pub struct ExtensiveForm {
    pub spec: ModelSpec,
    /// Tree node id of each local node.
    pub node_ids: Vec<usize>,
    pub stages: Vec<usize>,
    /// Local index of the predecessor.
    pub parents: Vec<Option<usize>>,
    pub vars: Vec<NodeVars>,
    /// Fixed incoming state of root nodes built from a given state.
    pub fixed_start: Option<Vec<f64>>,
    /// Probability weight of each local node in the objective.
    pub weights: Vec<f64>,
}

impl ExtensiveForm {
    pub fn transitions(&self, res: &SolveResult, local: usize) -> Vec<(usize, usize)> {
        let y: Vec<f64> = self.vars[local].y.iter().map(|&v| res.value(v)).collect();
        let nl = libm::sqrt((y.len() / self.vars[local].s.len().max(1)) as f64) as usize;
        let nj = self.vars[local].s.len();
        (0..nj)
            .map(|j| {
                let mut best = (0, 0, f64::NEG_INFINITY);
                for a in 0..nl {
                    for b in 0..nl {
                        let v = y[(j * nl + a) * nl + b];
                        if v > best.2 {
                            best = (a, b, v);
                        }
                    }
                }
                (best.0, best.1)
            })
            .collect()
    }

    /// Plan read along the first node of each stage.
    pub fn plan(&self, res: &SolveResult) -> CapacityPlan {
        let mut transitions = Vec::new();
        let mut seen = 0;
        for (local, &t) in self.stages.iter().enumerate() {
            if t > seen {
                transitions.push(self.transitions(res, local));
                seen = t;
            }
        }
        CapacityPlan { transitions }
    }

    /// Largest residual of the module balance recomputed from the primal.
    pub fn flow_balance_residual(&self, inst: &Instance, res: &SolveResult) -> f64 {
        let mut worst: f64 = 0.0;
        for (local, vars) in self.vars.iter().enumerate() {
            for j in 0..inst.n_facilities() {
                let site = site_of(j);
                let mut net = 0.0;
                for &((a, b), v) in &vars.f {
                    if b == site {
                        net += res.value(v);
                    }
                    if a == site {
                        net -= res.value(v);
                    }
                }
                let before = match self.parents[local] {
                    Some(p) => res.value(self.vars[p].s[j]),
                    None => match &self.fixed_start {
                        Some(y) => state_modules(inst, y, j),
                        None => inst.modules(j, inst.capacity.initial_level[j]),
                    },
                };
                let resid = res.value(vars.s[j]) - before - net;
                worst = worst.max(libm::fabs(resid));
            }
        }
        worst
    }

    /// Undiscounted cost of one local node.
    pub fn node_cost(&self, res: &SolveResult, local: usize) -> f64 {
        let w = self.weights[local];
        let v = &self.vars[local];
        let mut ids: Vec<VarId> = v.y.clone();
        ids.extend(v.f.iter().map(|&(_, id)| id));
        ids.extend(v.x.iter().map(|&(_, id)| id));
        ids.extend(v.r.iter().copied());
        let total: f64 = ids
            .iter()
            .map(|&id| self.spec.var(id).cost * res.value(id))
            .sum();
        if w > 0.0 {
            total / w
        } else {
            0.0
        }
    }
}

fn check_horizon(inst: &Instance, tree: &ScenarioTree) -> Result<()> {
    if tree.horizon != inst.horizon {
        return Err(Error::HorizonMismatch {
            tree: tree.horizon,
            instance: inst.horizon,
        });
    }
    Ok(())
}

fn build_subtree(
    inst: &Instance,
    tree: &ScenarioTree,
    roots: &[usize],
    start: Option<&[f64]>,
    base_prob: f64,
    opts: &FormulationOptions,
    name: &str,
) -> Result<ExtensiveForm> {
    let mut spec = ModelSpec::new(name);
    let mut form = ExtensiveForm {
        spec: ModelSpec::default(),
        node_ids: Vec::new(),
        stages: Vec::new(),
        parents: Vec::new(),
        vars: Vec::new(),
        fixed_start: start.map(|s| s.to_vec()),
        weights: Vec::new(),
    };
    // Breadth-first over (node id, local parent).
    let mut queue: Vec<(usize, Option<usize>)> = roots.iter().map(|&r| (r, None)).collect();
    let mut head = 0;
    while head < queue.len() {
        let (id, parent) = queue[head];
        head += 1;
        let t = tree.stage_of(id);
        let weight = tree.probability(id) / base_prob;
        let incoming = match (parent, start) {
            (Some(p), _) => Incoming::Parent(&form.vars[p]),
            (None, Some(y)) => Incoming::Fixed(y),
            (None, None) => Incoming::Initial,
        };
        let label = format!("@{id}");
        let (vars, _) = add_node(
            &mut spec,
            inst,
            t,
            tree.realization(id),
            weight,
            incoming,
            opts,
            &label,
        )?;
        let local = form.vars.len();
        form.vars.push(vars);
        form.node_ids.push(id);
        form.stages.push(t);
        form.parents.push(parent);
        form.weights.push(weight);
        for c in tree.children(id) {
            queue.push((c, Some(local)));
        }
    }
    form.spec = spec;
    Ok(form)
}

/// Deterministic equivalent over the whole tree.
pub fn build_extensive_form(
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
) -> Result<ExtensiveForm> {
    check_horizon(inst, tree)?;
    build_subtree(inst, tree, &[0], None, 1.0, opts, "extensive")
}

/// Expected cost after stage `t` from state `y`: all stage-`t+1` subtrees
/// below one stage-`t` node, weighted by their conditional probabilities.
pub fn build_cost_to_go(
    inst: &Instance,
    tree: &ScenarioTree,
    t: usize,
    y: &[f64],
    opts: &FormulationOptions,
) -> Result<ExtensiveForm> {
    check_horizon(inst, tree)?;
    if t >= tree.horizon {
        return Err(Error::Config(format!("no stages after stage {t}")));
    }
    let parent = tree.stage_offset(t);
    let roots: Vec<usize> = tree.children(parent).collect();
    build_subtree(
        inst,
        tree,
        &roots,
        Some(y),
        tree.probability(parent),
        opts,
        "cost_to_go",
    )
}

/// Single-path model using expected demand and nominal throughput.
pub fn build_deterministic(
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
) -> Result<ExtensiveForm> {
    check_horizon(inst, tree)?;
    let mut spec = ModelSpec::new("deterministic");
    let mut form = ExtensiveForm {
        spec: ModelSpec::default(),
        node_ids: Vec::new(),
        stages: Vec::new(),
        parents: Vec::new(),
        vars: Vec::new(),
        fixed_start: None,
        weights: Vec::new(),
    };
    let nominal = alloc::vec![inst.capacity.nominal_rate; inst.n_facilities()];
    for t in 1..=inst.horizon {
        let real = Realization {
            demand: tree.expected_demand(t),
            throughput: nominal.clone(),
        };
        let parent = (t > 1).then(|| t - 2);
        let incoming = match parent {
            Some(p) => Incoming::Parent(&form.vars[p]),
            None => Incoming::Initial,
        };
        let (vars, _) = add_node(
            &mut spec,
            inst,
            t,
            &real,
            1.0,
            incoming,
            opts,
            &format!("@t{t}"),
        )?;
        form.vars.push(vars);
        form.node_ids.push(t - 1);
        form.stages.push(t);
        form.parents.push(parent);
        form.weights.push(1.0);
    }
    form.spec = spec;
    Ok(form)
}

/// Extensive form with levels of stages `1..T-1` pinned to `plan`.
pub fn build_eev_model(
    inst: &Instance,
    tree: &ScenarioTree,
    plan: &CapacityPlan,
    opts: &FormulationOptions,
) -> Result<ExtensiveForm> {
    let fixed = inst.horizon.saturating_sub(1);
    if plan.transitions.len() < fixed {
        return Err(Error::InconsistentPlan(format!(
            "plan covers {} stages, {fixed} required",
            plan.transitions.len()
        )));
    }
    let pinned = CapacityPlan {
        transitions: plan.transitions[..fixed].to_vec(),
    };
    pinned.check(inst, &opts.revision)?;
    let mut form = build_extensive_form(inst, tree, opts)?;
    for local in 0..form.vars.len() {
        let t = form.stages[local];
        if t > fixed {
            continue;
        }
        let want = state_from_transitions(inst, &pinned.transitions[t - 1]);
        for (k, &v) in form.vars[local].y.iter().enumerate() {
            form.spec
                .add_row(alloc::vec![(v, 1.0)], Sense::Eq, want[k], None);
        }
    }
    form.spec.name = "eev".into();
    Ok(form)
}

/// Site label for messages and reports.
pub fn site_label(site: usize) -> String {
    match facility_of(site) {
        None => "depot".into(),
        Some(j) => format!("facility {j}"),
    }
}
