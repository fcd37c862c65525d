//! Training logs as CSV.

use std::path::Path;

use scbg_core::predictor::PredictorLogRow;
use scbg_core::range::RangeLogRow;
use scbg_core::scbg::ScbgLogRow;

use crate::error::{Error, Result};
use crate::fsio;

fn to_csv<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("csv encoding failed: {e}")))
}

pub(crate) fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    fsio::write(path, to_csv(header, rows)?)
}

/// `step,mode,loss` with mode `marginal` or `conditional`.
pub fn write_predictor_log(path: &Path, rows: &[PredictorLogRow]) -> Result<()> {
    write_csv(
        path,
        &["step", "mode", "loss"],
        rows.iter().map(|r| [r.step.to_string(), if r.conditional { "conditional" } else { "marginal" }.to_string(), r.loss.to_string()]),
    )
}

/// `step,L_traj,L_court,L`; `L_court` is empty when the courtesy loss is off.
pub fn write_scbg_log(path: &Path, rows: &[ScbgLogRow]) -> Result<()> {
    fsio::write(path, scbg_csv(rows)?)
}

fn scbg_csv(rows: &[ScbgLogRow]) -> Result<Vec<u8>> {
    to_csv(
        &["step", "L_traj", "L_court", "L"],
        rows.iter()
            .map(|r| [r.step.to_string(), r.traj.to_string(), r.court.map(|c| c.to_string()).unwrap_or_default(), r.total.to_string()]),
    )
}

/// `step,loss` (pinball at both quantiles, summed).
pub fn write_range_log(path: &Path, rows: &[RangeLogRow]) -> Result<()> {
    write_csv(path, &["step", "loss"], rows.iter().map(|r| [r.step.to_string(), r.loss.to_string()]))
}
