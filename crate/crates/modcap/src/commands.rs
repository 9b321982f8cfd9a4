//! Command implementations behind the CLI.

use std::path::Path;
use std::time::Instant;

use modcap_core::formulation::{
    build_deterministic, build_extensive_form, state_from_transitions, FormulationOptions,
    StageModel, StageStart,
};
use modcap_core::generate::{generate_synthetic_instance, SyntheticConfig};
use modcap_core::instance::RevisionSchedule;
use modcap_core::metrics::{
    mobility_suite, oracle_value, out_of_sample_eval, schedules_of_size, vpamsp, vss_suite,
    AdaptivityReport, RpSource,
};
use modcap_core::scenario::{build_tree, ScenarioTree};
use modcap_core::sddip::{Sddip, SddipResult};
use modcap_core::Instance;
use serde::{Deserialize, Serialize};

use crate::config::{InstanceSource, RunConfig};
use crate::error::{io_error, CliError};
use crate::exec::{ThreadedExecutor, WallClock};
use crate::highs::{backend_from_env, HighsBackend};
use crate::io::{
    format_points, instance_to_string, write_csv, write_json, MetricReports, MobilityRow,
    OracleCheck, ResultBundle, Telemetry, TreeExport, VpamspRow, VssRow, SCHEMA_VERSION,
};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const TELEMETRY_FILE: &str = "telemetry.jsonl";
pub const TREE_FILE: &str = "tree.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const VPAMSP_CSV: &str = "vpamsp.csv";
pub const VSS_CSV: &str = "vss.csv";
pub const MOBILITY_CSV: &str = "mobility.csv";

fn backend(cfg: &RunConfig) -> Result<HighsBackend, CliError> {
    let mut b = backend_from_env().map_err(CliError::Environment)?;
    b.mip_rel_gap = cfg.mip_rel_gap;
    Ok(b)
}

fn prepare(cfg: &RunConfig) -> Result<(Instance, ScenarioTree), CliError> {
    cfg.validate()?;
    let inst = cfg.load_instance()?;
    let tree = build_tree(&inst, &cfg.tree)?;
    Ok((inst, tree))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Generates an instance; returns its JSON text.
pub fn cmd_generate(spec: &SyntheticConfig) -> Result<String, CliError> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(CliError::Validation(problems.join("; ")));
    }
    let inst = generate_synthetic_instance(spec);
    let problems = inst.validate();
    if !problems.is_empty() {
        return Err(CliError::Validation(problems.join("; ")));
    }
    Ok(instance_to_string(&inst))
}

/// Runs the decomposition and writes the bundle into the output directory.
pub fn cmd_solve(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let be = backend(cfg)?;
    let (inst, tree) = prepare(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let tele_path = dir.join(TELEMETRY_FILE);
    let mut tele = Telemetry::create(&tele_path)?;

    let exec = ThreadedExecutor::new(cfg.sddip.workers);
    let clock = WallClock::start();
    let opts = FormulationOptions::for_instance(&inst);
    let mut sddip = Sddip::with_options(&inst, &tree, &be, cfg.sddip.clone(), opts.clone())?;
    let mut write_err = None;
    let result = sddip.run(&exec, &clock, &mut |rec| {
        log::info!(
            "iter {} lb {:.4} ub {:.4} gap {:.4}%",
            rec.iteration,
            rec.lower_bound,
            rec.upper_bound,
            100.0 * rec.gap
        );
        if let Err(e) = tele.record(rec) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_error(&tele_path, e));
    }
    if !(result.lower_bound.is_finite() && result.upper_bound.is_finite()) {
        return Err(CliError::Limit(format!(
            "stopped ({:?}) before finite bounds were available",
            result.status
        )));
    }

    let oracle = if cfg.with_oracle {
        let z = oracle_value(&be, &inst, &tree, &opts)?;
        Some(OracleCheck {
            value: z,
            lb_gap_to_oracle: (z - result.lower_bound) / z.abs().max(1e-12),
            ub_gap_to_oracle: (result.upper_bound - z) / z.abs().max(1e-12),
        })
    } else {
        None
    };
    let mut metrics = MetricReports::default();
    if let Some(n) = cfg.evaluation_paths {
        metrics.out_of_sample = Some(out_of_sample_eval(
            &exec,
            &be,
            &inst,
            &tree,
            &opts,
            &result.pools,
            n,
            cfg.sddip.alpha,
            cfg.sddip.seed,
        )?);
    }
    write_json(&dir.join(TREE_FILE), &TreeExport::new(&tree))?;
    let bundle = ResultBundle {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        result,
        oracle,
        metrics,
        telemetry: TELEMETRY_FILE.into(),
        files: vec![TREE_FILE.into()],
    };
    write_json(&dir.join(BUNDLE_FILE), &bundle)?;
    Ok(bundle)
}

/// Which metric suites to run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRequest {
    /// Revision counts to sweep over all placements.
    pub revision_counts: Vec<usize>,
    /// Explicit placements as 1-based periods.
    pub schedules: Vec<Vec<usize>>,
    pub vss: bool,
    /// Use decomposition bounds instead of the extensive form for RP.
    pub vss_from_bounds: bool,
    pub mobility: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema_version: u32,
    pub config: RunConfig,
    pub reports: MetricReports,
    pub files: Vec<String>,
}

fn cost_label(l: modcap_core::generate::CostLevel) -> String {
    serde_json::to_value(l)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Capacity, relocation and outsourcing cost levels of a generated instance.
fn cost_levels(cfg: &RunConfig) -> [String; 3] {
    match &cfg.instance {
        InstanceSource::Generate(g) => [
            cost_label(g.capacity_cost),
            cost_label(g.relocation_cost),
            cost_label(g.outsourcing_cost),
        ],
        InstanceSource::Path(_) => ["file".into(), "file".into(), "file".into()],
    }
}

/// Runs the requested metric suites and writes JSON and CSV reports.
pub fn cmd_metrics(cfg: &RunConfig, req: &MetricsRequest) -> Result<MetricsFile, CliError> {
    let be = backend(cfg)?;
    let (inst, tree) = prepare(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut reports = MetricReports::default();
    let mut files = Vec::new();
    let horizon = inst.horizon;

    if !req.revision_counts.is_empty() || !req.schedules.is_empty() {
        let mut schedules: Vec<RevisionSchedule> = Vec::new();
        for &a in &req.revision_counts {
            if a == 0 || a > horizon {
                return Err(CliError::Validation(format!(
                    "revision count {a} lies outside 1..{horizon}"
                )));
            }
            schedules.extend(schedules_of_size(horizon, a));
        }
        for pts in &req.schedules {
            if pts.iter().any(|&p| p == 0 || p > horizon) || !pts.contains(&1) {
                return Err(CliError::Validation(format!(
                    "schedule {pts:?} must use periods 1..{horizon} and include 1"
                )));
            }
            schedules.push(RevisionSchedule::from_points(horizon, pts));
        }
        let timed = |rev: &RevisionSchedule| -> Result<(f64, f64), CliError> {
            let opts = FormulationOptions {
                revision: rev.clone(),
                moves: modcap_core::formulation::MovePolicy::Full,
            };
            let t0 = Instant::now();
            let z = oracle_value(&be, &inst, &tree, &opts)?;
            Ok((z, t0.elapsed().as_secs_f64()))
        };
        let (z_tssp, _) = timed(&RevisionSchedule::first_only(horizon))?;
        let (z_mssp, _) = timed(&RevisionSchedule::full(horizon))?;
        let mut report = AdaptivityReport {
            z_tssp,
            z_pamssp_by_a: Default::default(),
            z_mssp,
            vpamsp_by_a: Default::default(),
            schedule_by_a: Default::default(),
        };
        let mut rows = Vec::new();
        for s in &schedules {
            let (z, secs) = timed(s)?;
            rows.push(VpamspRow {
                periods: horizon,
                revisions: s.revisions,
                revision_points: format_points(&s.w),
                iterations: None,
                gap_pct: 100.0 * be.mip_rel_gap,
                runtime_s: secs,
                z,
                vpamsp_pct: vpamsp(z_tssp, z, z_mssp),
            });
            if report
                .z_pamssp_by_a
                .get(&s.revisions)
                .is_none_or(|&best| z < best)
            {
                report.z_pamssp_by_a.insert(s.revisions, z);
                report.schedule_by_a.insert(s.revisions, s.w.clone());
            }
        }
        report.vpamsp_by_a = report
            .z_pamssp_by_a
            .iter()
            .map(|(&a, &z)| (a, vpamsp(z_tssp, z, z_mssp)))
            .collect();
        write_csv(&dir.join(VPAMSP_CSV), &rows)?;
        files.push(VPAMSP_CSV.into());
        reports.adaptivity = Some(report);
    }

    let opts = FormulationOptions::for_instance(&inst);
    if req.vss {
        let source = if req.vss_from_bounds {
            let exec = ThreadedExecutor::new(cfg.sddip.workers);
            let clock = WallClock::start();
            let mut s = Sddip::with_options(&inst, &tree, &be, cfg.sddip.clone(), opts.clone())?;
            let r: SddipResult = s.run(&exec, &clock, &mut |_| {})?;
            if !r.upper_bound.is_finite() {
                return Err(CliError::Limit("no finite upper bound for RP".into()));
            }
            RpSource::Bounds {
                lower: r.lower_bound,
                upper: r.upper_bound,
            }
        } else {
            RpSource::Oracle
        };
        let v = vss_suite(&be, &inst, &tree, &opts, source)?;
        let row = VssRow {
            sigma: cfg.tree.demand_sigma,
            lambda: cfg.tree.disruption_rate,
            ev: v.ev,
            eev_t: v.eev_t,
            rp: v.rp,
            vss_t: v.vss_t,
            provenance: serde_json::to_value(v.provenance)
                .ok()
                .and_then(|x| x.as_str().map(String::from))
                .unwrap_or_default(),
        };
        write_csv(&dir.join(VSS_CSV), &[row])?;
        files.push(VSS_CSV.into());
        reports.vss = Some(v);
    }

    if req.mobility {
        let m = mobility_suite(&be, &inst, &tree)?;
        let [capacity_cost, relocation_cost, outsource_cost] = cost_levels(cfg);
        let row = MobilityRow {
            periods: horizon,
            capacity_cost,
            relocation_cost,
            outsource_cost,
            z_static: m.z_static,
            z_mod_only: m.z_mod_only,
            z_mod_mob: m.z_mod_mob,
            vmod: m.vmod,
            vmob: m.vmob,
            vmm: m.vmm,
        };
        write_csv(&dir.join(MOBILITY_CSV), &[row])?;
        files.push(MOBILITY_CSV.into());
        reports.mobility = Some(m);
    }

    let out = MetricsFile {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        reports,
        files,
    };
    write_json(&dir.join(METRICS_FILE), &out)?;
    Ok(out)
}

pub fn cmd_dump_tree(cfg: &RunConfig) -> Result<String, CliError> {
    let (_, tree) = prepare(cfg)?;
    let mut s = serde_json::to_string_pretty(&TreeExport::new(&tree))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Extensive,
    Deterministic,
    /// Subproblem of the first node of a stage, entered with every
    /// facility at its initial level.
    Stage(usize),
}

pub fn cmd_dump_model(cfg: &RunConfig, kind: ModelKind) -> Result<String, CliError> {
    let (inst, tree) = prepare(cfg)?;
    let opts = FormulationOptions::for_instance(&inst);
    let spec = match kind {
        ModelKind::Extensive => build_extensive_form(&inst, &tree, &opts)?.spec,
        ModelKind::Deterministic => build_deterministic(&inst, &tree, &opts)?.spec,
        ModelKind::Stage(t) => {
            if t == 0 || t > inst.horizon {
                return Err(CliError::Validation(format!(
                    "stage {t} lies outside 1..{}",
                    inst.horizon
                )));
            }
            let l0 = inst.capacity.initial_level.clone();
            let trans: Vec<(usize, usize)> = l0.iter().map(|&l| (l, l)).collect();
            let y = state_from_transitions(&inst, &trans);
            let start = if t == 1 {
                StageStart::Initial
            } else {
                StageStart::State(&y)
            };
            let node = tree.stage_offset(t);
            StageModel::build(&inst, t, tree.realization(node), start, None, &opts)?.spec
        }
    };
    Ok(spec.to_lp_string())
}
