//! File formats: instance, tree export, result bundle, telemetry and CSV
//! report tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use modcap_core::metrics::{AdaptivityReport, MobilityReport, OutOfSampleReport, VssReport};
use modcap_core::scenario::{Node, ScenarioTree, TreeParams};
use modcap_core::sddip::engine::IterationRecord;
use modcap_core::sddip::SddipResult;
use modcap_core::Instance;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_error, CliError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub instance: Instance,
}

pub fn instance_to_string(inst: &Instance) -> String {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        instance: inst.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

pub fn parse_instance(text: &str) -> Result<Instance, CliError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("instance: {e}")))?;
    check_version(file.schema_version)?;
    let problems = file.instance.validate();
    if !problems.is_empty() {
        return Err(CliError::Validation(problems.join("; ")));
    }
    Ok(file.instance)
}

pub fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_instance(&text).map_err(|e| match e {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<(), CliError> {
    std::fs::write(path, instance_to_string(inst)).map_err(|e| io_error(path, e))
}

fn check_version(v: u32) -> Result<(), CliError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "unsupported schema_version {v}; expected {SCHEMA_VERSION}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeExport {
    pub schema_version: u32,
    pub horizon: usize,
    pub params: TreeParams,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl TreeExport {
    pub fn new(tree: &ScenarioTree) -> Self {
        let nodes = tree.nodes();
        let edges = nodes
            .iter()
            .filter_map(|n| {
                n.parent.map(|p| Edge {
                    parent: p,
                    child: n.id,
                    probability: n.conditional_probability,
                })
            })
            .collect();
        TreeExport {
            schema_version: SCHEMA_VERSION,
            horizon: tree.horizon,
            params: tree.params.clone(),
            nodes,
            edges,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub value: f64,
    /// `(oracle - LB) / oracle`.
    pub lb_gap_to_oracle: f64,
    /// `(UB - oracle) / oracle`.
    pub ub_gap_to_oracle: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptivity: Option<AdaptivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vss: Option<VssReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mobility: Option<MobilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_of_sample: Option<OutOfSampleReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub config: RunConfig,
    pub result: SddipResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
    pub metrics: MetricReports,
    /// Telemetry file name, relative to the bundle.
    pub telemetry: String,
    /// Every other file written next to the bundle.
    pub files: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Reads a bundle and checks its version and referenced files.
pub fn read_bundle(path: &Path) -> Result<ResultBundle, CliError> {
    let b: ResultBundle = read_json(path)?;
    check_version(b.schema_version)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for f in b.files.iter().chain(std::iter::once(&b.telemetry)) {
        if !dir.join(f).is_file() {
            return Err(CliError::Validation(format!(
                "bundle references missing file {f}"
            )));
        }
    }
    Ok(b)
}

/// Appends iteration records as JSON lines.
pub struct Telemetry {
    out: BufWriter<File>,
}

impl Telemetry {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let f = File::create(path).map_err(|e| io_error(path, e))?;
        Ok(Telemetry {
            out: BufWriter::new(f),
        })
    }

    pub fn record(&mut self, rec: &IterationRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

pub fn read_telemetry(path: &Path) -> Result<Vec<IterationRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| CliError::Validation(format!("telemetry: {e}")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VssRow {
    #[serde(rename = "sigma")]
    pub sigma: f64,
    #[serde(rename = "lambda")]
    pub lambda: f64,
    #[serde(rename = "EV")]
    pub ev: f64,
    #[serde(rename = "EEV_T")]
    pub eev_t: f64,
    #[serde(rename = "RP")]
    pub rp: f64,
    #[serde(rename = "VSS_T")]
    pub vss_t: f64,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VpamspRow {
    #[serde(rename = "#Periods")]
    pub periods: usize,
    #[serde(rename = "#Rev")]
    pub revisions: usize,
    #[serde(rename = "Revision points")]
    pub revision_points: String,
    /// Empty for oracle values.
    #[serde(rename = "#Iter")]
    pub iterations: Option<usize>,
    #[serde(rename = "%Gap")]
    pub gap_pct: f64,
    #[serde(rename = "Runtime")]
    pub runtime_s: f64,
    #[serde(rename = "z")]
    pub z: f64,
    #[serde(rename = "%VPAMSP")]
    pub vpamsp_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityRow {
    #[serde(rename = "#Periods")]
    pub periods: usize,
    #[serde(rename = "Capacity cost level")]
    pub capacity_cost: String,
    #[serde(rename = "Relocation cost level")]
    pub relocation_cost: String,
    #[serde(rename = "Outsource cost level")]
    pub outsource_cost: String,
    #[serde(rename = "z Non-mod&Non-mob")]
    pub z_static: f64,
    #[serde(rename = "z Mod&Non-mob")]
    pub z_mod_only: f64,
    #[serde(rename = "z Mod&Mob")]
    pub z_mod_mob: f64,
    #[serde(rename = "VMoD")]
    pub vmod: f64,
    #[serde(rename = "VMoB")]
    pub vmob: f64,
    #[serde(rename = "VMM")]
    pub vmm: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))))
        .collect()
}

/// `"1,3,5"` from revision flags.
pub fn format_points(w: &[bool]) -> String {
    w.iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(t, _)| (t + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use modcap_core::generate::{generate_synthetic_instance, SyntheticConfig};
    use modcap_core::scenario::build_tree;

    #[test]
    fn instance_round_trip_is_byte_identical() {
        let inst = generate_synthetic_instance(&SyntheticConfig::default());
        let a = instance_to_string(&inst);
        let back = parse_instance(&a).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_string(&back), a);
        assert!(a.contains("\"schema_version\": 1"));
    }

    #[test]
    fn rejects_other_versions() {
        let inst = generate_synthetic_instance(&SyntheticConfig::default());
        let s = instance_to_string(&inst).replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse_instance(&s), Err(CliError::Validation(_))));
    }

    #[test]
    fn tree_export_edges() {
        let inst = generate_synthetic_instance(&SyntheticConfig::default());
        let tree = build_tree(&inst, &TreeParams::default()).unwrap();
        let t = TreeExport::new(&tree);
        assert_eq!(t.nodes.len(), 7);
        assert_eq!(t.edges.len(), 6);
        let back: TreeExport = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let row = MobilityRow {
            periods: 3,
            capacity_cost: "low".into(),
            relocation_cost: "medium".into(),
            outsource_cost: "high".into(),
            z_static: 3.0,
            z_mod_only: 2.0,
            z_mod_mob: 1.5,
            vmod: 1.0,
            vmob: 0.5,
            vmm: 1.5,
        };
        write_csv(&p, std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("#Periods,Capacity cost level,"));
        assert_eq!(read_csv::<MobilityRow>(&p).unwrap(), vec![row]);
    }

    #[test]
    fn points_format() {
        assert_eq!(format_points(&[true, false, true, true]), "1,3,4");
    }
}
