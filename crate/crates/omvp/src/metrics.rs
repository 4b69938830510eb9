//! CSV output for training curves and evaluations.

use std::io::Write;

use omvp_core::trainer::{EvalSummary, MetricsRow};

use crate::Result;

pub const METRICS_HEADER: [&str; 7] = ["env_step", "train_step", "epsilon", "lr", "loss", "eval_mean_reward", "eval_capture_rate"];

pub const EVAL_HEADER: [&str; 5] = ["episodes", "seed", "mean_reward", "capture_rate", "mean_steps_to_first_capture"];

/// Streams [`MetricsRow`]s; floats use the shortest round-trip form, so equal
/// runs give byte-equal files. A missing loss is an empty field.
pub struct MetricsWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut csv = csv::Writer::from_writer(inner);
        csv.write_record(METRICS_HEADER)?;
        csv.flush()?;
        Ok(Self { csv })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.csv.write_record([
            row.env_step.to_string(),
            row.train_step.to_string(),
            row.epsilon.to_string(),
            row.lr.to_string(),
            row.loss.map(|l| l.to_string()).unwrap_or_default(),
            row.eval_mean_reward.to_string(),
            row.eval_capture_rate.to_string(),
        ])?;
        self.csv.flush()?;
        Ok(())
    }
}

pub fn write_eval<W: Write>(inner: W, seed: u64, s: &EvalSummary) -> Result<()> {
    let mut csv = csv::Writer::from_writer(inner);
    csv.write_record(EVAL_HEADER)?;
    csv.write_record([
        s.episodes.to_string(),
        seed.to_string(),
        s.mean_reward.to_string(),
        s.capture_rate.to_string(),
        s.mean_steps_to_first_capture.map(|v| v.to_string()).unwrap_or_default(),
    ])?;
    csv.flush()?;
    Ok(())
}
