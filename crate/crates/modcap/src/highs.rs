//! LP/MIP backend on the HiGHS C API.

use std::ffi::{c_void, CStr};
use std::os::raw::c_double;

use highs_sys::*;
use modcap_core::model::{
    tagged_duals, ModelSpec, Sense, SolveResult, SolveStatus, SolverBackend, VarKind,
};
use modcap_core::{Error, Result};

/// Environment variable naming the solver backend.
pub const BACKEND_ENV: &str = "MODCAP_BACKEND";

#[derive(Clone, Debug)]
pub struct HighsBackend {
    pub mip_rel_gap: f64,
    /// Per-solve time limit in seconds.
    pub time_limit: Option<f64>,
}

impl Default for HighsBackend {
    fn default() -> Self {
        HighsBackend {
            mip_rel_gap: 1e-6,
            time_limit: None,
        }
    }
}

impl HighsBackend {
    pub fn with_gap(mip_rel_gap: f64) -> Self {
        HighsBackend {
            mip_rel_gap,
            ..Self::default()
        }
    }
}

/// Backend selected by `MODCAP_BACKEND` (default `highs`).
pub fn backend_from_env() -> std::result::Result<HighsBackend, String> {
    match std::env::var(BACKEND_ENV) {
        Err(_) => Ok(HighsBackend::default()),
        Ok(v) if v.eq_ignore_ascii_case("highs") || v.is_empty() => Ok(HighsBackend::default()),
        Ok(v) => Err(format!(
            "solver backend '{v}' is not available; unset {BACKEND_ENV} or set it to 'highs'"
        )),
    }
}

struct Handle(*mut c_void);

impl Drop for Handle {
    fn drop(&mut self) {
        // SAFETY: the pointer came from Highs_create and is destroyed once.
        unsafe { Highs_destroy(self.0) }
    }
}

impl Handle {
    fn new() -> Result<Self> {
        // SAFETY: plain constructor call.
        let p = unsafe { Highs_create() };
        if p.is_null() {
            return Err(Error::Backend("Highs_create returned null".into()));
        }
        Ok(Handle(p))
    }

    fn set_bool(&self, name: &CStr, v: bool) -> Result<()> {
        // SAFETY: valid handle and NUL-terminated option name.
        let s = unsafe { Highs_setBoolOptionValue(self.0, name.as_ptr(), HighsInt::from(v)) };
        check(s, name)
    }

    fn set_int(&self, name: &CStr, v: HighsInt) -> Result<()> {
        // SAFETY: as above.
        let s = unsafe { Highs_setIntOptionValue(self.0, name.as_ptr(), v) };
        check(s, name)
    }

    fn set_double(&self, name: &CStr, v: f64) -> Result<()> {
        // SAFETY: as above.
        let s = unsafe { Highs_setDoubleOptionValue(self.0, name.as_ptr(), v) };
        check(s, name)
    }
}

fn check(status: HighsInt, what: &CStr) -> Result<()> {
    if status == STATUS_ERROR {
        Err(Error::Backend(format!(
            "HiGHS rejected {}",
            what.to_string_lossy()
        )))
    } else {
        Ok(())
    }
}

fn to_int(n: usize) -> Result<HighsInt> {
    HighsInt::try_from(n).map_err(|_| Error::Backend("model too large for HiGHS".into()))
}

impl HighsBackend {
    fn solve(&self, m: &ModelSpec, integral: bool) -> Result<SolveResult> {
        m.check()?;
        let h = Handle::new()?;
        h.set_bool(c"output_flag", false)?;
        h.set_int(c"threads", 1)?;
        h.set_double(c"mip_rel_gap", self.mip_rel_gap)?;
        h.set_double(c"mip_feasibility_tolerance", 1e-6)?;
        if let Some(t) = self.time_limit {
            h.set_double(c"time_limit", t)?;
        }
        // SAFETY: valid handle.
        let inf = unsafe { Highs_getInfinity(h.0) };
        let clamp = |v: f64| {
            if v == f64::INFINITY {
                inf
            } else if v == f64::NEG_INFINITY {
                -inf
            } else {
                v
            }
        };

        let ncol = m.num_vars();
        let nrow = m.num_rows();
        let cost: Vec<c_double> = m.variables.iter().map(|v| v.cost).collect();
        let lower: Vec<c_double> = m
            .variables
            .iter()
            .map(|v| {
                clamp(if v.kind == VarKind::Binary {
                    v.lower.max(0.0)
                } else {
                    v.lower
                })
            })
            .collect();
        let upper: Vec<c_double> = m
            .variables
            .iter()
            .map(|v| {
                clamp(if v.kind == VarKind::Binary {
                    v.upper.min(1.0)
                } else {
                    v.upper
                })
            })
            .collect();
        let mut row_lower = Vec::with_capacity(nrow);
        let mut row_upper = Vec::with_capacity(nrow);
        let mut start = Vec::with_capacity(nrow + 1);
        let mut index = Vec::new();
        let mut value = Vec::new();
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for c in &m.constraints {
            let (lo, hi) = match c.sense {
                Sense::Le => (-inf, c.rhs),
                Sense::Ge => (c.rhs, inf),
                Sense::Eq => (c.rhs, c.rhs),
            };
            row_lower.push(lo);
            row_upper.push(hi);
            start.push(to_int(index.len())?);
            merged.clear();
            merged.extend(c.terms.iter().map(|&(id, a)| (id.0, a)));
            merged.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < merged.len() {
                let col = merged[k].0;
                let mut a = 0.0;
                while k < merged.len() && merged[k].0 == col {
                    a += merged[k].1;
                    k += 1;
                }
                if a != 0.0 {
                    index.push(to_int(col)?);
                    value.push(a);
                }
            }
        }
        start.push(to_int(index.len())?);
        let integrality: Vec<HighsInt> = m
            .variables
            .iter()
            .map(|v| match v.kind {
                VarKind::Continuous => VAR_TYPE_CONTINUOUS,
                _ => VAR_TYPE_INTEGER,
            })
            .collect();
        let mip = integral && m.has_integers();

        // SAFETY: every array has the length HiGHS reads from the counts.
        let status = unsafe {
            if mip {
                Highs_passMip(
                    h.0,
                    to_int(ncol)?,
                    to_int(nrow)?,
                    to_int(index.len())?,
                    MATRIX_FORMAT_ROW_WISE,
                    OBJECTIVE_SENSE_MINIMIZE,
                    m.objective_offset,
                    cost.as_ptr(),
                    lower.as_ptr(),
                    upper.as_ptr(),
                    row_lower.as_ptr(),
                    row_upper.as_ptr(),
                    start.as_ptr(),
                    index.as_ptr(),
                    value.as_ptr(),
                    integrality.as_ptr(),
                )
            } else {
                Highs_passLp(
                    h.0,
                    to_int(ncol)?,
                    to_int(nrow)?,
                    to_int(index.len())?,
                    MATRIX_FORMAT_ROW_WISE,
                    OBJECTIVE_SENSE_MINIMIZE,
                    m.objective_offset,
                    cost.as_ptr(),
                    lower.as_ptr(),
                    upper.as_ptr(),
                    row_lower.as_ptr(),
                    row_upper.as_ptr(),
                    start.as_ptr(),
                    index.as_ptr(),
                    value.as_ptr(),
                )
            }
        };
        check(status, c"model")?;
        // SAFETY: valid handle with a loaded model.
        let run = unsafe { Highs_run(h.0) };
        check(run, c"run")?;
        // SAFETY: valid handle.
        let model_status = unsafe { Highs_getModelStatus(h.0) };
        let status = match model_status {
            MODEL_STATUS_OPTIMAL | MODEL_STATUS_MODEL_EMPTY => SolveStatus::Optimal,
            MODEL_STATUS_INFEASIBLE => SolveStatus::Infeasible,
            MODEL_STATUS_UNBOUNDED | MODEL_STATUS_UNBOUNDED_OR_INFEASIBLE => SolveStatus::Unbounded,
            MODEL_STATUS_REACHED_TIME_LIMIT
            | MODEL_STATUS_REACHED_ITERATION_LIMIT
            | MODEL_STATUS_REACHED_SOLUTION_LIMIT
            | MODEL_STATUS_REACHED_INTERRUPT
            | MODEL_STATUS_OBJECTIVE_BOUND
            | MODEL_STATUS_OBJECTIVE_TARGET => SolveStatus::Limit,
            other => {
                return Err(Error::Backend(format!(
                    "HiGHS finished with model status {other}"
                )))
            }
        };

        let mut col_value = vec![0.0; ncol];
        let mut col_dual = vec![0.0; ncol];
        let mut row_value = vec![0.0; nrow];
        let mut row_dual = vec![0.0; nrow];
        if status == SolveStatus::Optimal || status == SolveStatus::Limit {
            // SAFETY: buffers sized to the model dimensions.
            unsafe {
                Highs_getSolution(
                    h.0,
                    col_value.as_mut_ptr(),
                    col_dual.as_mut_ptr(),
                    row_value.as_mut_ptr(),
                    row_dual.as_mut_ptr(),
                );
            }
        }
        // SAFETY: valid handle.
        let objective = unsafe { Highs_getObjectiveValue(h.0) };
        let (row_duals, duals, gap) = if mip {
            let mut g = 0.0;
            // SAFETY: valid handle and info name.
            unsafe { Highs_getDoubleInfoValue(h.0, c"mip_gap".as_ptr(), &mut g) };
            (None, None, Some(g))
        } else {
            let d = tagged_duals(m, &row_dual);
            (Some(row_dual), Some(d), None)
        };
        Ok(SolveResult {
            status,
            objective,
            values: col_value,
            row_duals,
            duals,
            gap,
        })
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_mip(&self, model: &ModelSpec) -> Result<SolveResult> {
        self.solve(model, true)
    }

    fn solve_lp(&self, model: &ModelSpec) -> Result<SolveResult> {
        self.solve(model, false)
    }
}
