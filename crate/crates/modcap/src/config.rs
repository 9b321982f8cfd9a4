//! Run configuration.

use std::path::{Path, PathBuf};

use modcap_core::generate::{generate_synthetic_instance, SyntheticConfig};
use modcap_core::instance::RevisionSchedule;
use modcap_core::scenario::TreeParams;
use modcap_core::sddip::SddipConfig;
use modcap_core::Instance;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::read_instance;

/// Where the instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    Path(PathBuf),
    Generate(SyntheticConfig),
}

impl Default for InstanceSource {
    fn default() -> Self {
        InstanceSource::Generate(SyntheticConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub instance: InstanceSource,
    pub tree: TreeParams,
    /// 1-based revision periods; `None` keeps the instance schedule.
    pub revision_points: Option<Vec<usize>>,
    pub sddip: SddipConfig,
    pub output_dir: PathBuf,
    pub with_oracle: bool,
    /// Fresh paths for an out-of-sample policy evaluation after solving.
    pub evaluation_paths: Option<usize>,
    /// Relative MIP gap passed to the solver.
    pub mip_rel_gap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            instance: InstanceSource::default(),
            tree: TreeParams::default(),
            revision_points: None,
            sddip: SddipConfig::default(),
            output_dir: PathBuf::from("out"),
            with_oracle: false,
            evaluation_paths: None,
            mip_rel_gap: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Environment(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.sddip.problems();
        if let InstanceSource::Generate(g) = &self.instance {
            out.extend(g.problems());
        }
        if self.tree.branching == 0 {
            out.push("tree.branching must be at least 1".into());
        }
        if self.tree.demand_sigma.is_nan() || self.tree.demand_sigma < 0.0 {
            out.push("tree.demand_sigma must be nonnegative".into());
        }
        if self.tree.disruption_rate.is_nan() || self.tree.disruption_rate < 0.0 {
            out.push("tree.disruption_rate must be nonnegative".into());
        }
        if !(self.mip_rel_gap >= 0.0 && self.mip_rel_gap < 1.0) {
            out.push("mip_rel_gap must lie in [0, 1)".into());
        }
        if self.evaluation_paths.is_some_and(|n| n < 2) {
            out.push("evaluation_paths must be at least 2".into());
        }
        if let Some(points) = &self.revision_points {
            if !points.contains(&1) {
                out.push("revision_points must include period 1".into());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(p.join("; ")))
        }
    }

    /// Loads or generates the instance and applies the revision override.
    pub fn load_instance(&self) -> Result<Instance, CliError> {
        let mut inst = match &self.instance {
            InstanceSource::Path(p) => read_instance(p)?,
            InstanceSource::Generate(g) => generate_synthetic_instance(g),
        };
        if let Some(points) = &self.revision_points {
            if let Some(bad) = points.iter().find(|&&p| p == 0 || p > inst.horizon) {
                return Err(CliError::Validation(format!(
                    "revision point {bad} lies outside periods 1..{}",
                    inst.horizon
                )));
            }
            inst.revision = RevisionSchedule::from_points(inst.horizon, points);
        }
        let problems = inst.validate();
        if !problems.is_empty() {
            return Err(CliError::Validation(problems.join("; ")));
        }
        Ok(inst)
    }
}

/// Parses `"1,3,5"` into periods.
pub fn parse_points(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| CliError::Validation(format!("'{p}' is not a period number")))
        })
        .collect()
}
