//! Labeled futures as JSON lines:
//! `{ "scenario_id", "m", "source", "psi", "trajectory": [[x, y], ...] }`.

use std::fmt::Write as _;
use std::path::Path;

use scbg_core::courtesy::{LabeledSample, SampleSource};
use scbg_core::types::Point;
use scbg_core::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub scenario_id: String,
    pub m: usize,
    pub source: SampleSource,
    pub psi: f64,
    pub trajectory: Vec<Point>,
}

impl LabelRecord {
    pub fn from_sample(s: &LabeledSample) -> Self {
        Self { scenario_id: s.scenario_id.clone(), m: s.m, source: s.source, psi: s.psi, trajectory: s.trajectory.points().to_vec() }
    }

    pub fn to_sample(&self, dt: f64) -> scbg_core::Result<LabeledSample> {
        let trajectory = Trajectory::new(self.trajectory.clone(), dt)
            .map_err(|e| scbg_core::Error::Validation(format!("label {}#{}: {e}", self.scenario_id, self.m)))?;
        let s = LabeledSample { scenario_id: self.scenario_id.clone(), m: self.m, source: self.source, psi: self.psi, trajectory };
        s.validate(s.trajectory.len())?;
        Ok(s)
    }
}

pub fn to_jsonl(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let line = serde_json::to_string(&LabelRecord::from_sample(s)).expect("label records always encode");
        writeln!(out, "{line}").expect("writing to a string cannot fail");
    }
    out
}

pub fn save_labels(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    fsio::write(path, to_jsonl(samples))
}

/// Parses labels; `dt` comes from the dataset the labels belong to. Blank
/// lines are skipped; errors carry the file line.
pub fn parse_labels(path: &Path, text: &str, dt: f64) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(line).map_err(|e| {
            let mut err = Error::json(path, line, &e);
            if let Error::Parse { line: l, .. } = &mut err {
                *l = i + 1;
            }
            err
        })?;
        out.push(rec.to_sample(dt)?);
    }
    Ok(out)
}

pub fn load_labels(path: &Path, dt: f64) -> Result<Vec<LabeledSample>> {
    let text = fsio::read_artifact(path, "labeled dataset", "label")?;
    parse_labels(path, &text, dt)
}
