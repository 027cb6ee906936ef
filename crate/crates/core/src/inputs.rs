//! Loading and cross-validating the four input documents.

use crate::agents::{ArchetypeCatalog, TransitSchedule};
use crate::sim::{SimConfig, SimContext, SimInputs};
use crate::site::{load_site, validate_site, Severity, SiteMap};
use crate::tour::{validate_scenario, BarrierScenario};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub site: PathBuf,
    pub scenario: PathBuf,
    pub schedule: PathBuf,
    pub catalog: PathBuf,
}

impl InputPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> InputPaths {
        let d = dir.as_ref();
        InputPaths {
            site: d.join("site.json"),
            scenario: d.join("tour.json"),
            schedule: d.join("schedule.json"),
            catalog: d.join("catalog.json"),
        }
    }
}

/// Path of the bundled fixture set.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Parsed documents plus the exact bytes they were read from.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub inputs: SimInputs,
    pub site_bytes: Vec<u8>,
    pub scenario_bytes: Vec<u8>,
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    std::fs::read(path).map_err(|source| LoadError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> LoadError {
    LoadError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn load_inputs(paths: &InputPaths, config: SimConfig) -> Result<LoadedInputs, LoadError> {
    let site_bytes = read(&paths.site)?;
    let scenario_bytes = read(&paths.scenario)?;
    let schedule_bytes = read(&paths.schedule)?;
    let catalog_bytes = read(&paths.catalog)?;
    let site = load_site(&site_bytes).map_err(|e| parse_err(&paths.site, e))?;
    let text = |p: &Path, b: &[u8]| String::from_utf8(b.to_vec()).map_err(|e| parse_err(p, e));
    let scenario = BarrierScenario::from_json(&text(&paths.scenario, &scenario_bytes)?)
        .map_err(|e| parse_err(&paths.scenario, e))?;
    let schedule = TransitSchedule::from_json(&text(&paths.schedule, &schedule_bytes)?)
        .map_err(|e| parse_err(&paths.schedule, e))?;
    let catalog = ArchetypeCatalog::from_json(&text(&paths.catalog, &catalog_bytes)?)
        .map_err(|e| parse_err(&paths.catalog, e))?;
    Ok(LoadedInputs {
        inputs: SimInputs {
            site,
            scenario,
            schedule,
            catalog,
            config,
        },
        site_bytes,
        scenario_bytes,
    })
}

/// One finding of [`validate_inputs`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    /// `site`, `scenario`, `schedule` or `catalog`.
    pub source: &'static str,
    pub severity: Severity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub message: String,
}

impl Finding {
    fn error(source: &'static str, message: String) -> Finding {
        Finding {
            source,
            severity: Severity::Error,
            subject: None,
            message,
        }
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

/// Site rules, signal programs, scenario, schedule and catalog checks.
pub fn validate_inputs(inputs: &SimInputs) -> Vec<Finding> {
    let site: &SiteMap = &inputs.site;
    let mut out: Vec<Finding> = validate_site(site)
        .into_iter()
        .map(|i| Finding {
            source: "site",
            severity: i.severity,
            subject: Some(i.feature),
            message: i.message,
        })
        .collect();
    for (head, message) in crate::agents::SignalPrograms::from_site(site).problems() {
        out.push(Finding {
            subject: Some(head),
            ..Finding::error("site", message)
        });
    }
    out.extend(
        validate_scenario(&inputs.scenario, site, inputs.config.corridor_half_width)
            .into_iter()
            .map(|e| Finding::error("scenario", e.to_string())),
    );
    out.extend(
        inputs
            .schedule
            .validate(site, &inputs.catalog)
            .into_iter()
            .map(|m| Finding::error("schedule", m)),
    );
    out.extend(
        inputs
            .catalog
            .validate()
            .into_iter()
            .map(|m| Finding::error("catalog", m)),
    );
    out
}

/// Load the bundled fixture set with default configuration.
pub fn fixture_context() -> Arc<SimContext> {
    let loaded = load_inputs(&InputPaths::in_dir(fixture_dir()), SimConfig::default())
        .expect("bundled fixtures load");
    Arc::new(SimContext::new(loaded.inputs).expect("fixture site builds nav graphs"))
}
