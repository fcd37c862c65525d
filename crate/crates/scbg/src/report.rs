//! Evaluation outputs: a JSON report, a plain-text table and per-scenario CSV.

use std::fmt::Write as _;
use std::path::Path;

use scbg_core::eval::{AblationRow, DatasetStats, EvalReport};
use scbg_core::range::{quantile_to_courtesy, Coverage, RangeModel};
use scbg_core::scbg::{LabeledScenario, ScbgTrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsio::{self, Provenance};
use crate::logs::write_csv;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub provenance: Provenance,
    pub stats: DatasetStats,
    /// Coverage of the predicted quantiles on the evaluation labels.
    pub coverage: Coverage,
    /// Top-1 ADE of the predictor's marginal forecast of B, for reference.
    pub marginal_top1_ade: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub name: String,
    pub config: ScbgTrainConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationFile {
    pub version: u32,
    pub provenance: Provenance,
    pub rows: Vec<AblationEntry>,
}

impl AblationFile {
    pub fn new(provenance: Provenance, rows: &[AblationRow]) -> Self {
        let rows = rows
            .iter()
            .map(|r| AblationEntry {
                name: r.variant.name.clone(),
                config: r.variant.config,
                report: r.report.as_ref().ok().cloned(),
                error: r.report.as_ref().err().map(ToString::to_string),
            })
            .collect();
        Self { version: REPORT_VERSION, provenance, rows }
    }
}

fn pm(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}

/// Human-readable summary of one report.
pub fn text_table(file: &ReportFile) -> String {
    let r = &file.report;
    let mut s = String::new();
    let _ = writeln!(s, "seed {}  config {}", file.provenance.seed, file.provenance.config_hash);
    let _ = writeln!(s, "scenarios {}  psi range [{:.3}, {:.3}]", r.rows.len(), file.stats.psi_min, file.stats.psi_max);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<12} {:>22}", "strategy", "courtesy MSE");
    for m in &r.courtesy_mse {
        let _ = writeln!(s, "{:<12} {:>22}", m.name, pm(m.mse.summary.mean, m.mse.summary.std));
    }
    let _ = writeln!(s, "{:<12} {:>22}", "TrajADE (m)", pm(r.traj_ade.mean, r.traj_ade.std));
    let _ = writeln!(s, "{:<12} {:>22.4}", "top-1 ADE B", file.marginal_top1_ade);
    let _ = writeln!(s);
    let c = &r.correlation;
    let high = c.high.map_or_else(|| "n/a".to_string(), |h| format!("{h:.3}"));
    let _ = writeln!(s, "quantile/courtesy r  {:.3} ({} scenes)", c.overall, c.scenes);
    let _ = writeln!(s, "  |psi0| >= {:<8} {high} ({} scenes)", c.threshold, c.high_scenes);
    let cv = &file.coverage;
    let _ = writeln!(
        s,
        "coverage  below q0.1 {:.3}  below q0.9 {:.3}  inside {:.3} ({} labels)",
        cv.below_lo, cv.below_hi, cv.inside, cv.count
    );
    let _ = writeln!(s);
    let h = &r.histogram;
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1);
    for (i, &n) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(i);
        let _ = writeln!(s, "{lo:>8.2} .. {hi:>6.2} {n:>6} {}", "#".repeat(n * 40 / peak));
    }
    s
}

pub fn ablation_table(file: &AblationFile) -> String {
    let mut s = String::new();
    let names: Vec<&str> = file
        .rows
        .iter()
        .find_map(|r| r.report.as_ref())
        .map(|r| r.courtesy_mse.iter().map(|m| m.name.as_str()).collect())
        .unwrap_or_default();
    let _ = write!(s, "{:<16}", "variant");
    for n in &names {
        let _ = write!(s, " {:>20}", format!("MSE {n}"));
    }
    let _ = writeln!(s, " {:>20} {:>8}", "TrajADE", "r");
    for row in &file.rows {
        let _ = write!(s, "{:<16}", row.name);
        match (&row.report, &row.error) {
            (Some(r), _) => {
                for m in &r.courtesy_mse {
                    let _ = write!(s, " {:>20}", pm(m.mse.summary.mean, m.mse.summary.std));
                }
                let _ = writeln!(s, " {:>20} {:>8.3}", pm(r.traj_ade.mean, r.traj_ade.std), r.correlation.overall);
            }
            (None, e) => {
                let _ = writeln!(s, " failed: {}", e.as_deref().unwrap_or("unknown error"));
            }
        }
    }
    s
}

/// `scenario_id,psi0,traj_ade,mse_<STRATEGY>...`
pub fn write_scenario_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut header = vec!["scenario_id".to_string(), "psi0".into(), "traj_ade".into()];
    header.extend(report.courtesy_mse.iter().map(|m| format!("mse_{}", m.name)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        report.rows.iter().map(|r| {
            let mut rec = vec![r.scenario_id.clone(), r.psi0.to_string(), r.traj_ade.to_string()];
            rec.extend(r.courtesy_mse.iter().map(f64::to_string));
            rec
        }),
    )
}

/// `scenario_id,psi_lo,psi_mid,psi_hi,psi0,labels,inside`: the predicted range
/// per scenario against its labels.
pub fn write_range_eval(path: &Path, model: &RangeModel, groups: &[LabeledScenario<'_>]) -> Result<()> {
    let mut rows = Vec::with_capacity(groups.len());
    for g in groups {
        let r = model.predict_range(&g.scenario.observation)?;
        let inside = g.samples.iter().filter(|s| r.contains(s.psi)).count();
        rows.push(vec![
            g.scenario.id.clone(),
            r.psi_lo.to_string(),
            quantile_to_courtesy(&r, 0.5)?.to_string(),
            r.psi_hi.to_string(),
            g.psi0().to_string(),
            g.samples.len().to_string(),
            inside.to_string(),
        ]);
    }
    write_csv(path, &["scenario_id", "psi_lo", "psi_mid", "psi_hi", "psi0", "labels", "inside"], rows)
}

pub fn save_report(json: &Path, txt: &Path, csv: &Path, file: &ReportFile) -> Result<()> {
    fsio::write_json(json, file)?;
    fsio::write(txt, text_table(file))?;
    fsio::write_sidecar(txt, &file.provenance)?;
    write_scenario_csv(csv, &file.report)?;
    fsio::write_sidecar(csv, &file.provenance)
}
