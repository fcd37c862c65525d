//! Scenario interchange format: one JSON document per split.
//!
//! ```json
//! { "version": 1, "dt": 0.5, "scenarios": [ { "id": "...", "family": "MERGE",
//!   "history_a": [[x, y], ...], "history_b": [...], "future_a": [...],
//!   "future_b": [...], "extra_agents": [[[x, y], ...], ...],
//!   "map_polylines": [ { "tag": "lane", "points": [[x, y], ...] } ] } ] }
//! ```
//!
//! An optional `validation` array holds a second split in the same file, and
//! an optional `provenance` object records how the file was produced.

use std::path::Path;

use scbg_core::types::Point;
use scbg_core::{DatasetSplit, Family, Observation, Polyline, Scenario, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::{self, Provenance};

pub const DATASET_VERSION: u32 = 1;
const FALLBACK_DT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub version: u32,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub scenarios: Vec<ScenarioRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<Vec<ScenarioRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    pub id: String,
    pub family: Family,
    pub history_a: Vec<Point>,
    pub history_b: Vec<Point>,
    pub future_a: Vec<Point>,
    pub future_b: Vec<Point>,
    #[serde(default)]
    pub extra_agents: Vec<Vec<Point>>,
    #[serde(default)]
    pub map_polylines: Vec<PolylineRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolylineRecord {
    pub tag: String,
    pub points: Vec<Point>,
}

impl ScenarioRecord {
    pub fn from_scenario(s: &Scenario) -> Self {
        let o = &s.observation;
        Self {
            id: s.id.clone(),
            family: s.family,
            history_a: o.history_a.points().to_vec(),
            history_b: o.history_b.points().to_vec(),
            future_a: s.future_a.points().to_vec(),
            future_b: s.future_b.points().to_vec(),
            extra_agents: o.extra_agents.iter().map(|t| t.points().to_vec()).collect(),
            map_polylines: o.map_polylines.iter().map(|p| PolylineRecord { tag: p.tag.clone(), points: p.points.clone() }).collect(),
        }
    }

    /// Builds and validates the scenario; errors name the id and field.
    pub fn to_scenario(&self, dt: f64) -> scbg_core::Result<Scenario> {
        let traj = |field: &str, pts: &[Point]| {
            Trajectory::new(pts.to_vec(), dt).map_err(|e| scbg_core::Error::Validation(format!("scenario {}: {field}: {e}", self.id)))
        };
        let extra_agents =
            self.extra_agents.iter().enumerate().map(|(i, p)| traj(&format!("extra_agents[{i}]"), p)).collect::<scbg_core::Result<_>>()?;
        let s = Scenario {
            id: self.id.clone(),
            family: self.family,
            observation: Observation {
                history_a: traj("history_a", &self.history_a)?,
                history_b: traj("history_b", &self.history_b)?,
                extra_agents,
                map_polylines: self.map_polylines.iter().map(|p| Polyline { tag: p.tag.clone(), points: p.points.clone() }).collect(),
            },
            future_a: traj("future_a", &self.future_a)?,
            future_b: traj("future_b", &self.future_b)?,
        };
        s.validate()?;
        Ok(s)
    }
}

fn common_dt(scenarios: &[&Scenario]) -> Result<f64> {
    let Some(first) = scenarios.first() else {
        return Ok(FALLBACK_DT);
    };
    let dt = first.observation.dt();
    if let Some(s) = scenarios.iter().find(|s| s.observation.dt() != dt) {
        return Err(Error::Invalid(format!("scenario {} uses dt {} but the file uses {dt}", s.id, s.observation.dt())));
    }
    Ok(dt)
}

/// Encodes a split; `validation` is written only when non-empty.
pub fn to_file(split: &DatasetSplit, provenance: Option<&Provenance>) -> Result<DatasetFile> {
    split.validate()?;
    let all: Vec<&Scenario> = split.train.iter().chain(&split.validation).collect();
    Ok(DatasetFile {
        version: DATASET_VERSION,
        dt: common_dt(&all)?,
        provenance: provenance.cloned(),
        scenarios: split.train.iter().map(ScenarioRecord::from_scenario).collect(),
        validation: (!split.validation.is_empty()).then(|| split.validation.iter().map(ScenarioRecord::from_scenario).collect()),
    })
}

pub fn save_dataset(split: &DatasetSplit, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
    fsio::write_json(path, &to_file(split, provenance)?)
}

/// Decodes a dataset document; scenarios keep file order.
pub fn from_file(file: &DatasetFile) -> Result<DatasetSplit> {
    let convert = |records: &[ScenarioRecord]| -> Result<Vec<Scenario>> {
        records.iter().map(|r| r.to_scenario(file.dt).map_err(Error::from)).collect()
    };
    let split = DatasetSplit { train: convert(&file.scenarios)?, validation: convert(file.validation.as_deref().unwrap_or_default())? };
    split.validate()?;
    Ok(split)
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit> {
    Ok(load_dataset_with_provenance(path)?.0)
}

pub fn load_dataset_with_provenance(path: &Path) -> Result<(DatasetSplit, Option<Provenance>)> {
    let text = fsio::read_artifact(path, "dataset", "gen-data")?;
    let file: DatasetFile = fsio::parse_json(path, &text)?;
    if file.version != DATASET_VERSION {
        return Err(Error::Corrupt { path: path.to_path_buf(), message: format!("dataset version {} is not supported", file.version) });
    }
    Ok((from_file(&file)?, file.provenance))
}
