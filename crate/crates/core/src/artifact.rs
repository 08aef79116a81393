//! Run artifacts: the resolved configuration of a command, digests of its
//! inputs and outputs, and timestamps. Also the published JSON schemas and
//! CSV column layouts of everything the tool writes.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use schemars::{schema::RootSchema, schema_for, JsonSchema};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{BootstrapConfig, BootstrapRun};
use crate::calibration::CalibrationResult;
use crate::error::{Error, Result};
use crate::market_data::{load_surface, OptionSurface, SurfaceMeta};
use crate::mc_filter::FilterReport;
use crate::models::{ModelKind, ModelParams, ParamBounds};
use crate::pricing::{McConfig, PriceResult, PricingRequest};
use crate::robustness::ScatterData;
use crate::synthetic::SynthSpec;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const ARTIFACT_FILE: &str = "artifact.json";

/// Quote file plus the resolved surface metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSource {
    pub path: PathBuf,
    pub spot: f64,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation_date: Option<NaiveDate>,
}

impl SurfaceSource {
    pub fn load(&self) -> Result<OptionSurface> {
        Ok(
            load_surface(&self.path, self.spot, self.rate)?
                .with_valuation_date(self.valuation_date),
        )
    }

    pub fn meta(&self) -> SurfaceMeta {
        SurfaceMeta {
            spot: self.spot,
            rate: self.rate,
            valuation_date: self.valuation_date,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    pub params: ModelParams,
    pub request: PricingRequest,
    /// Used for FSV only.
    pub mc: McConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub surface: SurfaceSource,
    pub model: ModelKind,
    pub bounds: ParamBounds,
    pub budget: usize,
    pub seed: u64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BootstrapRunConfig {
    pub surface: SurfaceSource,
    pub bootstrap: BootstrapConfig,
    /// Thread cap used for the recorded run; results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub run: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub run: PathBuf,
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SynthGenConfig {
    pub spec: SynthSpec,
}

/// Fully resolved configuration of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Price(PriceConfig),
    Calibrate(CalibrateConfig),
    BootstrapRun(BootstrapRunConfig),
    RobustnessReport(ReportConfig),
    McFilter(FilterConfig),
    SynthGen(SynthGenConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Price(_) => "price",
            RunConfig::Calibrate(_) => "calibrate",
            RunConfig::BootstrapRun(_) => "bootstrap-run",
            RunConfig::RobustnessReport(_) => "robustness-report",
            RunConfig::McFilter(_) => "mc-filter",
            RunConfig::SynthGen(_) => "synth-gen",
        }
    }

    /// Files the command reads.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            RunConfig::Calibrate(c) => vec![c.surface.path.clone()],
            RunConfig::BootstrapRun(c) => vec![c.surface.path.clone()],
            RunConfig::RobustnessReport(c) => vec![c.run.clone()],
            RunConfig::McFilter(c) => vec![c.run.clone()],
            RunConfig::Price(_) | RunConfig::SynthGen(_) => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct FileDigest {
    /// Input paths as recorded; output paths relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunArtifact {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunArtifact {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::robustness::write_json(path.as_ref(), self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: file_digest(p)?,
            })
        })
        .collect()
}

/// Digests of written files, named relative to `dir`.
pub fn digest_outputs(dir: &Path, paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            let name = p.strip_prefix(dir).unwrap_or(p);
            Ok(FileDigest {
                path: name.display().to_string(),
                sha256: file_digest(p)?,
            })
        })
        .collect()
}

/// Names of the published JSON schemas.
pub const SCHEMA_NAMES: [&str; 8] = [
    "run-artifact",
    "price-result",
    "calibration-result",
    "bootstrap-run",
    "scatter-data",
    "filter-report",
    "synth-spec",
    "surface-meta",
];

pub fn schema(name: &str) -> Option<RootSchema> {
    Some(match name {
        "run-artifact" => schema_for!(RunArtifact),
        "price-result" => schema_for!(PriceResult),
        "calibration-result" => schema_for!(CalibrationResult),
        "bootstrap-run" => schema_for!(BootstrapRun),
        "scatter-data" => schema_for!(ScatterData),
        "filter-report" => schema_for!(FilterReport),
        "synth-spec" => schema_for!(SynthSpec),
        "surface-meta" => schema_for!(SurfaceMeta),
        _ => return None,
    })
}

/// Schema name for a JSON file written by the tool, by file name.
pub fn json_schema_for_file(file_name: &str) -> Option<&'static str> {
    Some(match file_name {
        ARTIFACT_FILE => "run-artifact",
        "price.json" => "price-result",
        "calibration.json" => "calibration-result",
        "bootstrap_run.json" => "bootstrap-run",
        "scatter.json" => "scatter-data",
        "surface.json" => "surface-meta",
        n if n.starts_with("filter_") && n.ends_with(".json") => "filter-report",
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Int,
    Real,
    /// Real number or the undefined marker `--`.
    RealOrUndefined,
    Text,
}

/// Header and column kinds of a CSV file written by the tool, by file name.
/// `params` is the list of model parameter names for per-trial tables.
pub fn csv_layout(file_name: &str, params: &[String]) -> Option<Vec<(String, Column)>> {
    let fixed = |cols: &[(&str, Column)]| cols.iter().map(|(n, c)| (n.to_string(), *c)).collect();
    use Column::*;
    Some(match file_name {
        "surface.csv" => fixed(&[
            ("strike", Real),
            ("maturity", Real),
            ("bid", Real),
            ("ask", Real),
        ]),
        "dispersion.csv" => fixed(&[
            ("j", Int),
            ("K", Real),
            ("T", Real),
            ("mid", Real),
            ("Cbar", Real),
            ("BRE", Real),
            ("V", Real),
        ]),
        "bubbles.csv" => fixed(&[
            ("measure", Text),
            ("K", Real),
            ("T", Real),
            ("value", Real),
            ("spot", Real),
        ]),
        "correlations.csv" => {
            let mut v = vec![("param".to_string(), Text)];
            v.extend(params.iter().map(|p| (p.clone(), RealOrUndefined)));
            v
        }
        "trials.csv" => {
            let mut v = vec![("trial".to_string(), Int)];
            v.extend(params.iter().map(|p| (p.clone(), RealOrUndefined)));
            v.push(("fval".to_string(), RealOrUndefined));
            v.push(("aare".to_string(), RealOrUndefined));
            v
        }
        n if n.starts_with("qn_") && n.ends_with(".csv") => {
            fixed(&[("normal", Real), ("sample", Real)])
        }
        n if n.starts_with("ecdf_") && n.ends_with(".csv") => {
            fixed(&[("group", Text), ("x", Real), ("F", Real)])
        }
        _ => return None,
    })
}

/// Checks a CSV file against its published layout.
pub fn validate_csv(path: &Path, params: &[String]) -> Result<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let layout = csv_layout(name, params)
        .ok_or_else(|| Error::Validation(format!("no published layout for {name}")))?;
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let want: Vec<&String> = layout.iter().map(|(n, _)| n).collect();
    if header.iter().collect::<Vec<_>>() != want {
        return Err(Error::Validation(format!(
            "{}: header {:?}, expected {:?}",
            path.display(),
            header,
            want
        )));
    }
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        for ((name, kind), field) in layout.iter().zip(rec.iter()) {
            let ok = match kind {
                Column::Int => field.parse::<u64>().is_ok(),
                Column::Real => field.parse::<f64>().is_ok(),
                Column::RealOrUndefined => {
                    field == crate::robustness::UNDEFINED || field.parse::<f64>().is_ok()
                }
                Column::Text => !field.is_empty(),
            };
            if !ok {
                return Err(Error::Validation(format!(
                    "{}: line {}: column {name} has invalid value {field:?}",
                    path.display(),
                    line + 2
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn every_schema_name_resolves() {
        for name in SCHEMA_NAMES {
            assert!(schema(name).is_some(), "{name}");
        }
        assert!(schema("nope").is_none());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::RobustnessReport(ReportConfig {
            run: "x/bootstrap_run.json".into(),
        });
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"command\":\"robustness-report\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
