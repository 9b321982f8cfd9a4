//! Value of partial adaptivity, value of the stochastic solution, value of
//! modularity and mobility, and out-of-sample policy evaluation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{
    build_deterministic, build_eev_model, build_extensive_form, ExtensiveForm, FormulationOptions,
    MovePolicy,
};
use crate::instance::{Instance, RevisionSchedule};
use crate::model::{SolveResult, SolverBackend};
use crate::rng::{stream_rng, STREAM_OUT_OF_SAMPLE};
use crate::scenario::{sample_forward_paths, ScenarioTree};
use crate::sddip::cut::CutPool;
use crate::sddip::engine::simulate;
use crate::sddip::exec::Executor;
use crate::stats::{mean_sd, two_sided_z};

/// Solves a built model to optimality.
pub fn solve_form(backend: &dyn SolverBackend, form: &ExtensiveForm) -> Result<SolveResult> {
    backend
        .solve_mip(&form.spec)?
        .require_optimal("extensive form")
}

/// Optimal value of the extensive form under `opts`.
pub fn oracle_value(
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
) -> Result<f64> {
    let form = build_extensive_form(inst, tree, opts)?;
    Ok(solve_form(backend, &form)?.objective)
}

/// Share of the two-stage to multi-stage value gap recovered, in percent.
/// `None` when the gap is degenerate.
pub fn vpamsp(z_tssp: f64, z_pamssp: f64, z_mssp: f64) -> Option<f64> {
    let denom = z_tssp - z_mssp;
    if denom.abs() < 1e-9 * z_tssp.abs().max(z_mssp.abs()).max(1.0) {
        return None;
    }
    Some(100.0 * (z_tssp - z_pamssp) / denom)
}

/// All schedules over `horizon` periods with the first period open and
/// `revisions` revision points in total.
pub fn schedules_of_size(horizon: usize, revisions: usize) -> Vec<RevisionSchedule> {
    let mut out = Vec::new();
    if revisions == 0 || revisions > horizon {
        return out;
    }
    let rest = horizon - 1;
    for mask in 0u64..(1u64 << rest) {
        if mask.count_ones() as usize == revisions - 1 {
            let mut w = alloc::vec![true];
            w.extend((0..rest).map(|k| mask >> k & 1 == 1));
            out.push(RevisionSchedule::from_flags(w));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptivityReport {
    pub z_tssp: f64,
    pub z_pamssp_by_a: BTreeMap<usize, f64>,
    pub z_mssp: f64,
    pub vpamsp_by_a: BTreeMap<usize, Option<f64>>,
    /// Schedule attaining the value for each revision count.
    pub schedule_by_a: BTreeMap<usize, Vec<bool>>,
}

/// Solves every schedule, keeps the best per revision count and reports
/// VPAMSP against the one-revision and every-period schedules.
pub fn adaptivity_sweep(
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    schedules: &[RevisionSchedule],
) -> Result<AdaptivityReport> {
    let value = |rev: &RevisionSchedule| -> Result<f64> {
        let opts = FormulationOptions {
            revision: rev.clone(),
            moves: MovePolicy::Full,
        };
        oracle_value(backend, inst, tree, &opts)
    };
    let z_tssp = value(&RevisionSchedule::first_only(inst.horizon))?;
    let z_mssp = value(&RevisionSchedule::full(inst.horizon))?;
    let mut z_pamssp_by_a = BTreeMap::new();
    let mut schedule_by_a = BTreeMap::new();
    for s in schedules {
        if s.w.len() != inst.horizon || s.w.first() != Some(&true) {
            return Err(Error::Config(alloc::format!(
                "revision schedule {:?} does not fit the horizon",
                s.w
            )));
        }
        let z = value(s)?;
        let a = s.revisions;
        if z_pamssp_by_a.get(&a).is_none_or(|&best| z < best) {
            z_pamssp_by_a.insert(a, z);
            schedule_by_a.insert(a, s.w.clone());
        }
    }
    let vpamsp_by_a = z_pamssp_by_a
        .iter()
        .map(|(&a, &z)| (a, vpamsp(z_tssp, z, z_mssp)))
        .collect();
    Ok(AdaptivityReport {
        z_tssp,
        z_pamssp_by_a,
        z_mssp,
        vpamsp_by_a,
        schedule_by_a,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Bounds,
}

/// Where the stochastic optimum comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RpSource {
    Oracle,
    /// Lower and upper bounds from a decomposition run.
    Bounds {
        lower: f64,
        upper: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VssReport {
    pub ev: f64,
    pub eev_t: f64,
    /// Point value of the stochastic optimum; the upper bound for bound
    /// provenance.
    pub rp: f64,
    pub rp_lower: f64,
    pub rp_upper: f64,
    pub vss_t: f64,
    pub provenance: Provenance,
}

pub fn vss_suite(
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
    source: RpSource,
) -> Result<VssReport> {
    let det = build_deterministic(inst, tree, opts)?;
    let det_res = solve_form(backend, &det)?;
    let plan = det.plan(&det_res);
    let eev_form = build_eev_model(inst, tree, &plan, opts)?;
    let eev_t = solve_form(backend, &eev_form)?.objective;
    let (rp, rp_lower, rp_upper, provenance) = match source {
        RpSource::Oracle => {
            let z = oracle_value(backend, inst, tree, opts)?;
            (z, z, z, Provenance::Oracle)
        }
        RpSource::Bounds { lower, upper } => (upper, lower, upper, Provenance::Bounds),
    };
    Ok(VssReport {
        ev: det_res.objective,
        eev_t,
        rp,
        rp_lower,
        rp_upper,
        vss_t: eev_t - rp,
        provenance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityReport {
    pub z_static: f64,
    pub z_mod_only: f64,
    pub z_mod_mob: f64,
    pub vmod: f64,
    pub vmob: f64,
    pub vmm: f64,
}

impl MobilityReport {
    pub fn from_values(z_static: f64, z_mod_only: f64, z_mod_mob: f64) -> Self {
        let vmod = z_static - z_mod_only;
        let vmob = z_mod_only - z_mod_mob;
        MobilityReport {
            z_static,
            z_mod_only,
            z_mod_mob,
            vmod,
            vmob,
            vmm: vmod + vmob,
        }
    }
}

/// Formulation options of the three network variants: static, modular
/// without mobility, modular with mobility.
pub fn mobility_variants(inst: &Instance) -> [FormulationOptions; 3] {
    [
        FormulationOptions {
            revision: RevisionSchedule::first_only(inst.horizon),
            moves: MovePolicy::DepotFirstStageOnly,
        },
        FormulationOptions {
            revision: inst.revision.clone(),
            moves: MovePolicy::DepotOnly,
        },
        FormulationOptions {
            revision: inst.revision.clone(),
            moves: MovePolicy::Full,
        },
    ]
}

pub fn mobility_suite(
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
) -> Result<MobilityReport> {
    let [s, m, mm] = mobility_variants(inst);
    Ok(MobilityReport::from_values(
        oracle_value(backend, inst, tree, &s)?,
        oracle_value(backend, inst, tree, &m)?,
        oracle_value(backend, inst, tree, &mm)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutOfSampleReport {
    pub paths: usize,
    pub mean: f64,
    pub half_width: f64,
    /// Right end of the confidence interval.
    pub upper: f64,
}

/// Mean cost and confidence interval of the policy defined by `pools` over
/// `n` fresh paths.
#[allow(clippy::too_many_arguments)]
pub fn out_of_sample_eval<E: Executor>(
    exec: &E,
    backend: &dyn SolverBackend,
    inst: &Instance,
    tree: &ScenarioTree,
    opts: &FormulationOptions,
    pools: &[CutPool],
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<OutOfSampleReport> {
    if n < 2 {
        return Err(Error::Config(
            "out-of-sample evaluation needs at least two paths".into(),
        ));
    }
    let mut rng = stream_rng(seed, STREAM_OUT_OF_SAMPLE);
    let paths = sample_forward_paths(tree, n, &mut rng);
    let traj = simulate(exec, backend, inst, tree, opts, pools, paths)?;
    let (mean, sd) = mean_sd(&traj.path_costs());
    let half_width = two_sided_z(alpha) * sd / libm::sqrt(n as f64);
    Ok(OutOfSampleReport {
        paths: n,
        mean,
        half_width,
        upper: mean + half_width,
    })
}
