//! Cut coefficients from the child subproblems of one sampled state.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{evaluate_lagrangian, FormulationOptions, StageModel, StageStart};
use crate::instance::Instance;
use crate::model::{ModelSpec, Sense, SolveResult, SolverBackend, VarKind};
use crate::scenario::Realization;
use crate::sddip::cut::{Cut, CutFamily, CutPool};

/// Step size rule of the Lagrangian subgradient ascent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `(target - g_k) / |s|^2` with the child MIP value as target.
    #[default]
    Polyak,
    /// `gap_0 / ((k + 1) |s|^2)`.
    Harmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LagrangianConfig {
    pub max_iterations: usize,
    /// Relative distance to the target at which the ascent stops.
    pub tolerance: f64,
    pub step: StepRule,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig {
            max_iterations: 50,
            tolerance: 1e-6,
            step: StepRule::Polyak,
        }
    }
}

/// One child subproblem below a sampled state.
#[derive(Clone, Copy, Debug)]
pub struct ChildProblem<'a> {
    pub inst: &'a Instance,
    pub stage: usize,
    pub real: &'a Realization,
    /// Cost-to-go approximation after the child's stage.
    pub pool: Option<&'a CutPool>,
    pub opts: &'a FormulationOptions,
    pub probability: f64,
}

impl ChildProblem<'_> {
    pub fn model(&self, state: &[f64]) -> Result<StageModel> {
        StageModel::build(
            self.inst,
            self.stage,
            self.real,
            StageStart::State(state),
            self.pool,
            self.opts,
        )
    }
}

/// Contribution of one child to a cut: `value + multipliers^T (y - anchor)`,
/// with a zero anchor when `anchor` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChildTerm {
    pub probability: f64,
    pub value: f64,
    pub multipliers: Vec<f64>,
    pub anchor: Option<Vec<f64>>,
    /// Value of the classical counterpart at the reference point, for
    /// strengthened families.
    pub classical: Option<f64>,
    /// Child MIP value at the incumbent, when it was computed.
    pub mip_value: Option<f64>,
    /// Whether an LP solve behind the term had fractional integer variables.
    pub fractional: bool,
    /// Lagrangian ascent stopped before reaching its target.
    pub fallback: bool,
}

/// Diagnostics of one aggregated cut.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutEvent {
    pub iteration: usize,
    pub stage: usize,
    pub node: usize,
    pub family: CutFamily,
    /// Cut value at the incumbent state.
    pub value_at_state: f64,
    /// Expected child MIP value at the incumbent.
    pub child_mip: Option<f64>,
    /// Classical counterpart and strengthened cut, both evaluated at the
    /// reference point (incumbent for SB, core point for SPT and SIM).
    pub classical: Option<f64>,
    pub strengthened: Option<f64>,
    pub fractional: bool,
    pub fallback: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn has_fractional(spec: &ModelSpec, res: &SolveResult) -> bool {
    spec.variables
        .iter()
        .zip(&res.values)
        .any(|(v, &x)| v.kind != VarKind::Continuous && libm::fabs(x - libm::round(x)) > 1e-6)
}

struct LpSolve {
    value: f64,
    duals: Vec<f64>,
    fractional: bool,
}

fn solve_lp_at(
    backend: &dyn SolverBackend,
    child: &ChildProblem<'_>,
    state: &[f64],
) -> Result<LpSolve> {
    let sm = child.model(state)?;
    let res = backend
        .solve_lp(&sm.spec)?
        .require_optimal("child LP relaxation")?;
    Ok(LpSolve {
        value: res.objective,
        duals: sm.link_duals(&res)?,
        fractional: has_fractional(&sm.spec, &res),
    })
}

fn solve_mip_at(
    backend: &dyn SolverBackend,
    child: &ChildProblem<'_>,
    state: &[f64],
) -> Result<f64> {
    let sm = child.model(state)?;
    Ok(backend
        .solve_mip(&sm.spec)?
        .require_optimal("child subproblem")?
        .objective)
}

/// `L(pi) - pi^T y_hat`: the Lagrangian value without its constant.
fn lagrangian_intercept(
    backend: &dyn SolverBackend,
    child: &ChildProblem<'_>,
    y_hat: &[f64],
    pi: &[f64],
) -> Result<f64> {
    let sm = child.model(y_hat)?;
    let (v, _) = evaluate_lagrangian(backend, &sm, pi)?;
    Ok(v - dot(pi, y_hat))
}

/// Primal form of the Magnanti–Wong secondary problem.
///
/// Every row with a nonzero right-hand side gets coefficient `rhs` on a new
/// column `x0` priced at `sigma`, and link rows are re-pinned to `core`.
/// Nonzero finite bounds are turned into rows first. Row duals of the
/// result solve the core-priced dual restricted to optimal duals at the
/// incumbent.
pub fn magnanti_wong_model(
    sm: &StageModel,
    core: &[f64],
    sigma: f64,
    nonpositive_x0: bool,
) -> Result<ModelSpec> {
    let copy = sm
        .copy
        .as_ref()
        .ok_or_else(|| Error::Invariant("stage model has no copy variables".into()))?;
    let mut m = sm.spec.relaxed();
    for k in 0..m.variables.len() {
        let (lo, hi) = (m.variables[k].lower, m.variables[k].upper);
        let id = crate::model::VarId(k);
        if hi.is_finite() && hi != 0.0 && lo != hi {
            m.variables[k].upper = f64::INFINITY;
            m.add_row(alloc::vec![(id, 1.0)], Sense::Le, hi, None);
        }
        if lo.is_finite() && lo != 0.0 && lo != hi {
            m.variables[k].lower = f64::NEG_INFINITY;
            m.add_row(alloc::vec![(id, 1.0)], Sense::Ge, lo, None);
        }
    }
    let upper = if nonpositive_x0 { 0.0 } else { f64::INFINITY };
    let x0 = m.add_var(
        "mw_x0",
        VarKind::Continuous,
        f64::NEG_INFINITY,
        upper,
        sigma,
    );
    for (r, c) in m.constraints.iter_mut().enumerate() {
        if c.rhs != 0.0 {
            c.terms.push((x0, c.rhs));
        }
        if copy.link_rows.contains(&r) {
            c.rhs = core[r - copy.link_rows.start];
        }
    }
    Ok(m)
}

struct MwSolve {
    value: f64,
    multipliers: Vec<f64>,
    fractional: bool,
}

fn pareto_at(
    backend: &dyn SolverBackend,
    child: &ChildProblem<'_>,
    y_hat: &[f64],
    core: &[f64],
) -> Result<MwSolve> {
    let sm = child.model(y_hat)?;
    let base = backend
        .solve_lp(&sm.spec)?
        .require_optimal("child LP relaxation")?;
    let fractional = has_fractional(&sm.spec, &base);
    let sigma = base.objective;
    let attempts = [(sigma, false), (sigma - 1e-7 * sigma.abs().max(1.0), true)];
    for (s, nonpos) in attempts {
        let mw = magnanti_wong_model(&sm, core, s, nonpos)?;
        let res = backend.solve_lp(&mw)?;
        if res.is_optimal() {
            let duals = res
                .row_duals
                .as_ref()
                .ok_or_else(|| Error::Invariant("secondary problem returned no duals".into()))?;
            let copy = sm.copy.as_ref().expect("stage model has copies");
            let multipliers = copy.link_rows.clone().map(|r| duals[r]).collect();
            if nonpos {
                log::warn!("secondary problem relaxed at stage {}", child.stage);
            }
            return Ok(MwSolve {
                value: res.objective,
                multipliers,
                fractional,
            });
        }
    }
    log::warn!(
        "secondary problem failed at stage {}; using LP duals",
        child.stage
    );
    let duals = sm.link_duals(&base)?;
    let value = sigma + dot(&duals, core) - dot(&duals, y_hat);
    Ok(MwSolve {
        value,
        multipliers: duals,
        fractional,
    })
}

/// Best Lagrangian multipliers found by subgradient ascent from `start`.
/// Returns `(L(lambda) - lambda^T y_hat, lambda, reached_target)`.
pub fn lagrangian_ascent(
    backend: &dyn SolverBackend,
    sm: &StageModel,
    y_hat: &[f64],
    start: &[f64],
    target: f64,
    cfg: &LagrangianConfig,
) -> Result<(f64, Vec<f64>, bool)> {
    let tol = cfg.tolerance * target.abs().max(1.0);
    let mut lambda = start.to_vec();
    let (mut g, mut yp) = evaluate_lagrangian(backend, sm, &lambda)?;
    let mut best = (g, lambda.clone());
    let gap0 = (target - g).max(0.0);
    let mut reached = target - g <= tol;
    let mut k = 0;
    while !reached && k < cfg.max_iterations {
        let s: Vec<f64> = y_hat.iter().zip(&yp).map(|(a, b)| a - b).collect();
        let n2 = dot(&s, &s);
        if n2 < 1e-18 {
            // A zero subgradient certifies optimality of lambda.
            break;
        }
        let step = match cfg.step {
            StepRule::Polyak => (target - g).max(tol) / n2,
            StepRule::Harmonic => gap0 / ((k + 1) as f64 * n2),
        };
        for (l, si) in lambda.iter_mut().zip(&s) {
            *l += step * si;
        }
        let next = evaluate_lagrangian(backend, sm, &lambda)?;
        g = next.0;
        yp = next.1;
        if g > best.0 {
            best = (g, lambda.clone());
        }
        reached = target - best.0 <= tol;
        k += 1;
    }
    let (g, lambda) = best;
    Ok((g - dot(&lambda, y_hat), lambda, reached))
}

/// Coefficients contributed by one child for `family`.
pub fn child_term(
    backend: &dyn SolverBackend,
    child: &ChildProblem<'_>,
    family: CutFamily,
    y_hat: &[f64],
    core: Option<&[f64]>,
    lag: &LagrangianConfig,
) -> Result<ChildTerm> {
    let p = child.probability;
    let need_core = || {
        core.ok_or_else(|| Error::Invariant("core point missing for a core-point family".into()))
    };
    let term = match family {
        CutFamily::Benders => {
            let lp = solve_lp_at(backend, child, y_hat)?;
            ChildTerm {
                probability: p,
                value: lp.value,
                multipliers: lp.duals,
                anchor: Some(y_hat.to_vec()),
                classical: None,
                mip_value: None,
                fractional: lp.fractional,
                fallback: false,
            }
        }
        CutFamily::StrengthenedBenders => {
            let lp = solve_lp_at(backend, child, y_hat)?;
            let eta = lagrangian_intercept(backend, child, y_hat, &lp.duals)?;
            ChildTerm {
                probability: p,
                value: eta,
                multipliers: lp.duals,
                anchor: None,
                classical: Some(lp.value),
                mip_value: None,
                fractional: lp.fractional,
                fallback: false,
            }
        }
        CutFamily::Integer => {
            let v = solve_mip_at(backend, child, y_hat)?;
            ChildTerm {
                probability: p,
                value: v,
                multipliers: Vec::new(),
                anchor: None,
                classical: None,
                mip_value: Some(v),
                fractional: false,
                fallback: false,
            }
        }
        CutFamily::Lagrangian => {
            let lp = solve_lp_at(backend, child, y_hat)?;
            let target = solve_mip_at(backend, child, y_hat)?;
            let sm = child.model(y_hat)?;
            let (delta, lambda, reached) =
                lagrangian_ascent(backend, &sm, y_hat, &lp.duals, target, lag)?;
            if !reached {
                log::warn!(
                    "lagrangian ascent at stage {} stopped {:.3e} below target",
                    child.stage,
                    target - delta - dot(&lambda, y_hat)
                );
            }
            ChildTerm {
                probability: p,
                value: delta,
                multipliers: lambda,
                anchor: None,
                classical: None,
                mip_value: Some(target),
                fractional: lp.fractional,
                fallback: !reached,
            }
        }
        CutFamily::ParetoOptimal => {
            let core = need_core()?;
            let mw = pareto_at(backend, child, y_hat, core)?;
            ChildTerm {
                probability: p,
                value: mw.value,
                multipliers: mw.multipliers,
                anchor: Some(core.to_vec()),
                classical: None,
                mip_value: None,
                fractional: mw.fractional,
                fallback: false,
            }
        }
        CutFamily::IndependentMw => {
            let core = need_core()?;
            let lp = solve_lp_at(backend, child, core)?;
            ChildTerm {
                probability: p,
                value: lp.value,
                multipliers: lp.duals,
                anchor: Some(core.to_vec()),
                classical: None,
                mip_value: None,
                fractional: lp.fractional,
                fallback: false,
            }
        }
        CutFamily::StrengthenedPareto => {
            let core = need_core()?;
            let mw = pareto_at(backend, child, y_hat, core)?;
            let eta = lagrangian_intercept(backend, child, y_hat, &mw.multipliers)?;
            ChildTerm {
                probability: p,
                value: eta,
                multipliers: mw.multipliers,
                anchor: None,
                classical: Some(mw.value),
                mip_value: None,
                fractional: mw.fractional,
                fallback: false,
            }
        }
        CutFamily::StrengthenedIndependentMw => {
            let core = need_core()?;
            let lp = solve_lp_at(backend, child, core)?;
            let eta = lagrangian_intercept(backend, child, y_hat, &lp.duals)?;
            ChildTerm {
                probability: p,
                value: eta,
                multipliers: lp.duals,
                anchor: None,
                classical: Some(lp.value),
                mip_value: None,
                fractional: lp.fractional,
                fallback: false,
            }
        }
    };
    Ok(term)
}

/// Point at which strengthened and classical values are compared.
fn reference_point<'a>(family: CutFamily, y_hat: &'a [f64], core: Option<&'a [f64]>) -> &'a [f64] {
    match family {
        CutFamily::StrengthenedPareto | CutFamily::StrengthenedIndependentMw => {
            core.unwrap_or(y_hat)
        }
        _ => y_hat,
    }
}

/// Combines child terms into one cut on the parent state.
#[allow(clippy::too_many_arguments)]
pub fn aggregate(
    family: CutFamily,
    terms: &[ChildTerm],
    y_hat: &[f64],
    core: Option<&[f64]>,
    floor: f64,
    stage: usize,
    node: usize,
    iteration: usize,
) -> (Cut, CutEvent) {
    let dim = y_hat.len();
    let mut intercept = 0.0;
    let mut slope = alloc::vec![0.0; dim];

    if family == CutFamily::Integer {
        let gbar: f64 = terms.iter().map(|t| t.probability * t.value).sum();
        let scale = gbar - floor;
        let ones: f64 = y_hat.iter().filter(|&&v| v > 0.5).count() as f64;
        for (s, &v) in slope.iter_mut().zip(y_hat) {
            *s = if v > 0.5 { scale } else { -scale };
        }
        intercept = gbar - scale * ones;
    } else {
        for t in terms {
            let shift = t.anchor.as_deref().map_or(0.0, |a| dot(&t.multipliers, a));
            intercept += t.probability * (t.value - shift);
            for (s, m) in slope.iter_mut().zip(&t.multipliers) {
                *s += t.probability * m;
            }
        }
    }

    let cut = Cut {
        stage,
        family,
        intercept,
        slope,
        iteration,
        core_point: if family.uses_core_point() {
            core.map(<[f64]>::to_vec)
        } else {
            None
        },
    };
    let reference = reference_point(family, y_hat, core);
    let classical = terms
        .iter()
        .map(|t| t.classical.map(|c| t.probability * c))
        .sum::<Option<f64>>();
    let child_mip = terms
        .iter()
        .map(|t| t.mip_value.map(|v| t.probability * v))
        .sum::<Option<f64>>();
    let event = CutEvent {
        iteration,
        stage,
        node,
        family,
        value_at_state: cut.evaluate(y_hat),
        child_mip,
        strengthened: classical.map(|_| cut.evaluate(reference)),
        classical,
        fractional: terms.iter().any(|t| t.fractional),
        fallback: terms.iter().any(|t| t.fallback),
    };
    (cut, event)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(value: f64, mult: Vec<f64>, anchor: Option<Vec<f64>>) -> ChildTerm {
        ChildTerm {
            probability: 0.5,
            value,
            multipliers: mult,
            anchor,
            classical: None,
            mip_value: Some(value),
            fractional: false,
            fallback: false,
        }
    }

    #[test]
    fn anchored_terms_evaluate_to_value_at_anchor() {
        let y = [1.0, 0.0, 1.0];
        let terms = [
            term(10.0, alloc::vec![1.0, 2.0, -1.0], Some(y.to_vec())),
            term(20.0, alloc::vec![0.0, 0.0, 3.0], Some(y.to_vec())),
        ];
        let (cut, ev) = aggregate(CutFamily::Benders, &terms, &y, None, 0.0, 1, 0, 1);
        assert!((cut.evaluate(&y) - 15.0).abs() < 1e-12);
        assert_eq!(ev.value_at_state, cut.evaluate(&y));
        assert_eq!(cut.slope, alloc::vec![0.5, 1.0, 1.0]);
    }

    #[test]
    fn zero_duals_give_constant_cut() {
        let y = [1.0, 0.0];
        let terms = [term(4.0, alloc::vec![0.0, 0.0], Some(y.to_vec()))];
        let (cut, _) = aggregate(CutFamily::Benders, &terms, &y, None, 0.0, 1, 0, 1);
        assert!(cut.slope.iter().all(|&s| s == 0.0));
        assert_eq!(cut.evaluate(&[0.0, 1.0]), cut.evaluate(&y));
    }

    #[test]
    fn integer_cut_shape() {
        let y = [1.0, 0.0, 0.0, 1.0];
        let terms = [term(10.0, Vec::new(), None), term(30.0, Vec::new(), None)];
        let (cut, ev) = aggregate(CutFamily::Integer, &terms, &y, None, 0.0, 1, 0, 1);
        assert!((cut.evaluate(&y) - 20.0).abs() < 1e-12);
        assert_eq!(ev.child_mip, Some(20.0));
        // Any other binary point is at most zero.
        for code in 0..16u32 {
            let z: Vec<f64> = (0..4).map(|k| f64::from((code >> k) & 1)).collect();
            if z != y {
                assert!(cut.evaluate(&z) <= 1e-12);
            }
        }
    }
}
