//! Forward and backward passes, bounds and stopping.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{
    round_state, transitions_from_state, FormulationOptions, StageModel, StageStart,
};
use crate::instance::Instance;
use crate::model::SolverBackend;
use crate::rng::{stream_rng, STREAM_SDDIP};
use crate::scenario::{sample_forward_paths, ScenarioPath, ScenarioTree};
use crate::sddip::cut::{census, CutFamily, CutPool, CutPreset};
use crate::sddip::exec::{Clock, Executor, NoClock, Sequential};
use crate::sddip::generation::{
    aggregate, child_term, ChildProblem, ChildTerm, CutEvent, LagrangianConfig,
};
use crate::sddip::memory::{AlternationAction, AlternationMemory, CorePointStore, StateId};
use crate::stats::{mean_sd, two_sided_z};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SddipConfig {
    /// Forward paths per iteration.
    pub forward_samples: usize,
    pub alpha: f64,
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    pub time_limit_ms: Option<u64>,
    pub preset: CutPreset,
    pub alternating: bool,
    /// Accepted states before the alternation memory is cleared.
    pub alternation_threshold: usize,
    pub workers: usize,
    pub seed: u64,
    /// Iterations without lower-bound progress before stopping.
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
    pub core_weight: f64,
    pub lagrangian: LagrangianConfig,
}

impl Default for SddipConfig {
    fn default() -> Self {
        SddipConfig {
            forward_samples: 5,
            alpha: 0.05,
            gap_tolerance: 0.01,
            max_iterations: 100,
            time_limit_ms: None,
            preset: CutPreset::default(),
            alternating: true,
            alternation_threshold: 20,
            workers: 1,
            seed: 1,
            stall_iterations: 10,
            stall_tolerance: 1e-9,
            core_weight: 0.5,
            lagrangian: LagrangianConfig::default(),
        }
    }
}

impl SddipConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.forward_samples < 2 {
            out.push("forward_samples must be at least 2".into());
        }
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance < 1.0) {
            out.push("gap_tolerance must lie in (0, 1)".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push("alpha must lie in (0, 1)".into());
        }
        if self.workers == 0 {
            out.push("workers must be at least 1".into());
        }
        if self.max_iterations == 0 {
            out.push("max_iterations must be at least 1".into());
        }
        if self.preset.families().is_empty() {
            out.push("cut preset selects no family".into());
        }
        if !(0.0..1.0).contains(&self.core_weight) {
            out.push("core_weight must lie in [0, 1)".into());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Stalled,
    IterationLimit,
    #[serde(rename = "limit")]
    TimeLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    /// Mean sampled path cost.
    pub mean: f64,
    pub half_width: f64,
    /// Cuts added this iteration by family label.
    pub cuts: BTreeMap<String, usize>,
    pub lp_cut_states: usize,
    pub int_cut_states: usize,
    pub accepted_states: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SddipResult {
    pub status: RunStatus,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub census: BTreeMap<String, usize>,
    pub wall_ms: u64,
    pub first_stage_plan: Vec<(usize, usize)>,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub events: Vec<CutEvent>,
    #[serde(skip)]
    pub pools: Vec<CutPool>,
}

/// Sampled trajectories of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectories {
    pub paths: Vec<ScenarioPath>,
    /// `states[m][t - 1]`: rounded state chosen at stage `t` on path `m`.
    pub states: Vec<Vec<Vec<f64>>>,
    /// `costs[m][t - 1]`: stage cost without the cost-to-go term.
    pub costs: Vec<Vec<f64>>,
    pub thetas: Vec<Vec<f64>>,
    /// Distinct `(stage, node, state)` solves in first-visit order.
    pub visits: Vec<(usize, usize, Vec<f64>)>,
}

impl Trajectories {
    pub fn path_costs(&self) -> Vec<f64> {
        self.costs.iter().map(|c| c.iter().sum()).collect()
    }
}

struct StageSolve {
    state: Vec<f64>,
    cost: f64,
    theta: f64,
}

fn state_key(y: &[f64]) -> Vec<bool> {
    y.iter().map(|&v| v > 0.5).collect()
}

fn pool_for(pools: &[CutPool], stage: usize) -> Option<&CutPool> {
    pools.get(stage.wrapping_sub(1))
}

/// Solves one stage subproblem and returns its state, stage cost and
/// cost-to-go estimate.
#[allow(clippy::too_many_arguments)]
pub fn solve_forward_subproblem(
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
    pools: &[CutPool],
    node: usize,
    incoming: Option<&[f64]>,
) -> Result<(Vec<f64>, f64, f64)> {
    let t = tree.stage_of(node);
    let start = match incoming {
        Some(y) => StageStart::State(y),
        None => StageStart::Initial,
    };
    let sm = StageModel::build(
        inst,
        t,
        tree.realization(node),
        start,
        pool_for(pools, t),
        opts,
    )?;
    let res = backend.solve_mip(&sm.spec)?;
    let res = match res.status {
        crate::model::SolveStatus::Optimal => res,
        status => {
            return Err(Error::Invariant(format!(
                "stage {t} subproblem reported {status:?} despite complete recourse"
            )))
        }
    };
    Ok((sm.state(&res), sm.stage_cost(&res), sm.theta_value(&res)))
}

/// Simulates `paths` under the policy defined by `pools`. Identical
/// `(node, incoming state)` solves are shared.
pub fn simulate<E: Executor>(
    exec: &E,
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
    pools: &[CutPool],
    paths: Vec<ScenarioPath>,
) -> Result<Trajectories> {
    let m = paths.len();
    let horizon = tree.horizon;
    let mut states: Vec<Vec<Vec<f64>>> = alloc::vec![Vec::with_capacity(horizon); m];
    let mut costs: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(horizon); m];
    let mut thetas: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(horizon); m];
    let mut visits = Vec::new();

    for t in 1..=horizon {
        let mut index: BTreeMap<(usize, Vec<bool>), usize> = BTreeMap::new();
        let mut jobs: Vec<(usize, Option<Vec<f64>>)> = Vec::new();
        let mut job_of = Vec::with_capacity(m);
        for (k, path) in paths.iter().enumerate() {
            let node = path.nodes[t - 1];
            let incoming = (t > 1).then(|| states[k][t - 2].clone());
            let key = (node, incoming.as_deref().map(state_key).unwrap_or_default());
            let next = jobs.len();
            let j = *index.entry(key).or_insert(next);
            if j == next {
                jobs.push((node, incoming));
            }
            job_of.push(j);
        }
        let results: Vec<Result<StageSolve>> = exec.map(&jobs, |(node, incoming)| {
            let (y, cost, theta) = solve_forward_subproblem(
                backend,
                inst,
                tree,
                opts,
                pools,
                *node,
                incoming.as_deref(),
            )?;
            Ok(StageSolve {
                state: round_state(&y),
                cost,
                theta,
            })
        });
        let results: Vec<StageSolve> = results.into_iter().collect::<Result<_>>()?;
        for ((node, _), r) in jobs.iter().zip(&results) {
            visits.push((t, *node, r.state.clone()));
        }
        for (k, &j) in job_of.iter().enumerate() {
            states[k].push(results[j].state.clone());
            costs[k].push(results[j].cost);
            thetas[k].push(results[j].theta);
        }
    }
    Ok(Trajectories {
        paths,
        states,
        costs,
        thetas,
        visits,
    })
}

/// The decomposition state between iterations.
pub struct Sddip<'a> {
    pub inst: &'a Instance,
    pub tree: &'a ScenarioTree,
    pub backend: &'a dyn SolverBackend,
    pub config: SddipConfig,
    pub opts: FormulationOptions,
    /// `pools[t - 1]` bounds the expected cost after stage `t`.
    pub pools: Vec<CutPool>,
    pub cores: CorePointStore,
    pub memory: AlternationMemory,
    pub rng: ChaCha8Rng,
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub history: Vec<IterationRecord>,
    pub events: Vec<CutEvent>,
    pub first_stage_state: Vec<f64>,
}

struct BackwardJob<'s> {
    family: CutFamily,
    block: usize,
    y_hat: &'s [f64],
    core: Option<&'s [f64]>,
}

impl<'a> Sddip<'a> {
    pub fn new(
        inst: &'a Instance,
        tree: &'a ScenarioTree,
        backend: &'a dyn SolverBackend,
        config: SddipConfig,
    ) -> Result<Self> {
        Self::with_options(
            inst,
            tree,
            backend,
            config,
            FormulationOptions::for_instance(inst),
        )
    }

    pub fn with_options(
        inst: &'a Instance,
        tree: &'a ScenarioTree,
        backend: &'a dyn SolverBackend,
        config: SddipConfig,
        opts: FormulationOptions,
    ) -> Result<Self> {
        if tree.horizon != inst.horizon {
            return Err(Error::HorizonMismatch {
                tree: tree.horizon,
                instance: inst.horizon,
            });
        }
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let pools = (1..inst.horizon).map(CutPool::new).collect();
        Ok(Sddip {
            inst,
            tree,
            backend,
            opts,
            pools,
            cores: CorePointStore::new(config.core_weight),
            memory: AlternationMemory::new(config.alternation_threshold),
            rng: stream_rng(config.seed, STREAM_SDDIP),
            iteration: 0,
            lower_bound: 0.0,
            upper_bound: f64::INFINITY,
            history: Vec::new(),
            events: Vec::new(),
            first_stage_state: Vec::new(),
            config,
        })
    }

    pub fn forward_pass<E: Executor>(&mut self, exec: &E) -> Result<(Trajectories, f64, f64, f64)> {
        let paths = sample_forward_paths(self.tree, self.config.forward_samples, &mut self.rng);
        let traj = simulate(
            exec,
            self.backend,
            self.inst,
            self.tree,
            &self.opts,
            &self.pools,
            paths,
        )?;
        for (t, node, y) in &traj.visits {
            self.cores.update(*t, self.tree.block_of(*node), y);
        }
        let (mean, sd) = mean_sd(&traj.path_costs());
        let hw = two_sided_z(self.config.alpha) * sd / libm::sqrt(traj.paths.len() as f64);
        Ok((traj, mean + hw, mean, hw))
    }

    /// Adds cuts for every distinct sampled state from the last stage back
    /// to the first, then re-solves the first stage for the lower bound.
    pub fn backward_pass<E: Executor>(
        &mut self,
        exec: &E,
        traj: &Trajectories,
    ) -> Result<(BTreeMap<String, usize>, [usize; 3])> {
        let mut added: BTreeMap<String, usize> = BTreeMap::new();
        let mut actions = [0usize; 3];
        for child_stage in (2..=self.tree.horizon).rev() {
            let t = child_stage - 1;
            // Distinct sampled parents at stage t, in path order.
            let mut parents: Vec<(usize, Vec<f64>)> = Vec::new();
            let mut seen = BTreeMap::new();
            for (k, path) in traj.paths.iter().enumerate() {
                let node = path.nodes[t - 1];
                let y = &traj.states[k][t - 1];
                if seen.insert((node, state_key(y)), ()).is_none() {
                    parents.push((node, y.clone()));
                }
            }
            let mut plans: Vec<(usize, CutFamily)> = Vec::new();
            for (p, (node, y)) in parents.iter().enumerate() {
                let families: Vec<CutFamily> = if self.config.alternating {
                    let action = self.memory.decide(&StateId::new(t, *node, y));
                    match action {
                        AlternationAction::LpCut => actions[0] += 1,
                        AlternationAction::IntCut => actions[1] += 1,
                        AlternationAction::Accept => actions[2] += 1,
                    }
                    match action {
                        AlternationAction::LpCut => {
                            self.config.preset.lp_family().into_iter().collect()
                        }
                        AlternationAction::IntCut => {
                            self.config.preset.integer_family().into_iter().collect()
                        }
                        AlternationAction::Accept => Vec::new(),
                    }
                } else {
                    self.config.preset.families()
                };
                plans.extend(families.into_iter().map(|f| (p, f)));
            }
            if plans.is_empty() {
                continue;
            }

            let b = self.tree.stage_blocks(child_stage).len();
            let cores: Vec<Option<Vec<f64>>> = parents
                .iter()
                .map(|(node, _)| {
                    self.cores
                        .get(t, self.tree.block_of(*node))
                        .map(<[f64]>::to_vec)
                })
                .collect();
            let mut jobs = Vec::with_capacity(plans.len() * b);
            for &(p, family) in &plans {
                for block in 0..b {
                    jobs.push(BackwardJob {
                        family,
                        block,
                        y_hat: &parents[p].1,
                        core: cores[p].as_deref(),
                    });
                }
            }
            let inst = self.inst;
            let tree = self.tree;
            let backend = self.backend;
            let opts = &self.opts;
            let child_pool = pool_for(&self.pools, child_stage);
            let lag = self.config.lagrangian;
            let prob = tree.block_probability(child_stage);
            let results: Vec<Result<ChildTerm>> = exec.map(&jobs, |job| {
                let child = ChildProblem {
                    inst,
                    stage: child_stage,
                    real: &tree.stage_blocks(child_stage)[job.block],
                    pool: child_pool,
                    opts,
                    probability: prob,
                };
                child_term(backend, &child, job.family, job.y_hat, job.core, &lag)
            });
            let terms: Vec<ChildTerm> = results.into_iter().collect::<Result<_>>()?;

            for (q, &(p, family)) in plans.iter().enumerate() {
                let (node, y) = &parents[p];
                let floor = self.pools[t - 1].floor;
                let (cut, event) = aggregate(
                    family,
                    &terms[q * b..(q + 1) * b],
                    y,
                    cores[p].as_deref(),
                    floor,
                    t,
                    *node,
                    self.iteration,
                );
                if self.pools[t - 1].push(cut) {
                    *added.entry(String::from(family.label())).or_insert(0) += 1;
                }
                self.events.push(event);
            }
        }
        self.solve_root()?;
        Ok((added, actions))
    }

    fn solve_root(&mut self) -> Result<()> {
        let t = 1;
        let sm = StageModel::build(
            self.inst,
            t,
            self.tree.realization(0),
            StageStart::Initial,
            pool_for(&self.pools, t),
            &self.opts,
        )?;
        let res = self
            .backend
            .solve_mip(&sm.spec)?
            .require_optimal("first-stage problem")?;
        self.lower_bound = self.lower_bound.max(res.objective);
        self.first_stage_state = round_state(&sm.state(&res));
        Ok(())
    }

    /// One forward and one backward pass.
    pub fn iterate<E: Executor>(&mut self, exec: &E, clock: &dyn Clock) -> Result<IterationRecord> {
        self.iteration += 1;
        let (traj, ub, mean, hw) = self.forward_pass(exec)?;
        let (cuts, actions) = self.backward_pass(exec, &traj)?;
        self.upper_bound = ub;
        let rec = IterationRecord {
            iteration: self.iteration,
            lower_bound: self.lower_bound,
            upper_bound: ub,
            gap: relative_gap(self.lower_bound, ub),
            mean,
            half_width: hw,
            cuts,
            lp_cut_states: actions[0],
            int_cut_states: actions[1],
            accepted_states: actions[2],
            wall_ms: clock.elapsed_ms(),
        };
        self.history.push(rec.clone());
        Ok(rec)
    }

    /// Iterates until a stopping rule fires. `on_iteration` sees every record.
    pub fn run<E: Executor>(
        &mut self,
        exec: &E,
        clock: &dyn Clock,
        on_iteration: &mut dyn FnMut(&IterationRecord),
    ) -> Result<SddipResult> {
        let status = loop {
            let rec = self.iterate(exec, clock)?;
            on_iteration(&rec);
            if rec.upper_bound < rec.lower_bound {
                log::warn!(
                    "sampled upper bound {} is below the lower bound {}; more forward samples give a steadier estimate",
                    rec.upper_bound,
                    rec.lower_bound
                );
            }
            if rec.gap <= self.config.gap_tolerance {
                break RunStatus::Converged;
            }
            if self.iteration >= self.config.max_iterations {
                break RunStatus::IterationLimit;
            }
            if let Some(limit) = self.config.time_limit_ms {
                if clock.elapsed_ms() >= limit {
                    break RunStatus::TimeLimit;
                }
            }
            let w = self.config.stall_iterations;
            if w > 0 && self.history.len() > w {
                let old = self.history[self.history.len() - 1 - w].lower_bound;
                let tol = self.config.stall_tolerance * self.lower_bound.abs().max(1.0);
                if self.lower_bound - old < tol {
                    log::info!("lower bound stalled for {w} iterations");
                    break RunStatus::Stalled;
                }
            }
        };
        Ok(self.result(status, clock.elapsed_ms()))
    }

    pub fn result(&self, status: RunStatus, wall_ms: u64) -> SddipResult {
        SddipResult {
            status,
            lower_bound: self.lower_bound,
            upper_bound: self.upper_bound,
            gap: relative_gap(self.lower_bound, self.upper_bound),
            iterations: self.iteration,
            census: census(&self.pools),
            wall_ms,
            first_stage_plan: transitions_from_state(self.inst, &self.first_stage_state),
            history: self.history.clone(),
            events: self.events.clone(),
            pools: self.pools.clone(),
        }
    }
}

/// `(ub - lb) / ub`, zero when both bounds vanish.
pub fn relative_gap(lb: f64, ub: f64) -> f64 {
    if !ub.is_finite() {
        return f64::INFINITY;
    }
    let diff = ub - lb;
    if diff <= 0.0 {
        0.0
    } else if ub.abs() < 1e-12 {
        f64::INFINITY
    } else {
        diff / ub.abs()
    }
}

/// Sequential run without a time source.
pub fn run(
    inst: &Instance,
    tree: &ScenarioTree,
    backend: &dyn SolverBackend,
    config: SddipConfig,
) -> Result<SddipResult> {
    let mut s = Sddip::new(inst, tree, backend, config)?;
    s.run(&Sequential, &NoClock, &mut |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_edge_cases() {
        assert_eq!(relative_gap(10.0, 10.0), 0.0);
        assert_eq!(relative_gap(11.0, 10.0), 0.0);
        assert!((relative_gap(9.0, 10.0) - 0.1).abs() < 1e-12);
        assert_eq!(relative_gap(0.0, f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn config_validation() {
        assert!(SddipConfig::default().problems().is_empty());
        let bad = SddipConfig {
            forward_samples: 1,
            workers: 0,
            gap_tolerance: 1.5,
            ..SddipConfig::default()
        };
        assert_eq!(bad.problems().len(), 3);
    }
}
