//! Single-gate synthesis runs with persisted result, ledger and waveform.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::config::ExperimentConfig;
use super::persistence::{digest, with_workers, write_json};
use super::Assessment;
use crate::error::Result;
use crate::metrics::SimResult;
use crate::model::TargetRotation;
use crate::optimizer::{multistart_optimize, ParamVector, RestartRecord};
use crate::pulses::write_waveform_csv;

/// AllXY gate pairs in their usual order.
pub const ALLXY_PAIRS: [(&str, &str); 21] = [
    ("I", "I"),
    ("X", "X"),
    ("Y", "Y"),
    ("X", "Y"),
    ("Y", "X"),
    ("X/2", "I"),
    ("Y/2", "I"),
    ("X/2", "Y/2"),
    ("Y/2", "X/2"),
    ("X/2", "Y"),
    ("Y/2", "X"),
    ("X", "Y/2"),
    ("Y", "X/2"),
    ("X/2", "X"),
    ("X", "X/2"),
    ("Y/2", "Y"),
    ("Y", "Y/2"),
    ("X", "I"),
    ("Y", "I"),
    ("X/2", "X/2"),
    ("Y/2", "Y/2"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub config_hash: String,
    pub seed: u64,
    pub x: ParamVector,
    pub result: SimResult,
    pub ledger: Vec<RestartRecord>,
    pub ledger_digest: String,
}

impl SynthesisRecord {
    /// Gate error at most 1e−4.
    pub fn assess(&self) -> Assessment {
        let mut a = Assessment::default();
        a.check(self.result.gate_error <= 1e-4, format!("gate error {:.3e}", self.result.gate_error));
        a
    }
}

/// Optimizes `target` with the configured system, gate time, optimizer and grid.
pub fn synthesize_target(cfg: &ExperimentConfig, target: &TargetRotation) -> Result<SynthesisRecord> {
    let params = cfg.params()?;
    let opt = cfg.optimizer_config()?;
    let o = with_workers(cfg.workers, || multistart_optimize(&params, target, cfg.tg_ns, &opt))??;
    let grid = cfg.grid.grid(cfg.tg_ns)?;
    let result = if grid == o.result.grid { o.result } else { SimResult::simulate(&o.result.pulse, target, &params, &grid) };
    Ok(SynthesisRecord {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        x: o.x,
        ledger_digest: digest(&serde_json::to_vec(&o.ledger)?),
        result,
        ledger: o.ledger,
    })
}

fn persist(record: &SynthesisRecord, dir: &Path, stem: &str, dt: f64) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), record)?;
    write_waveform_csv(&record.result.pulse, dt, BufWriter::new(File::create(dir.join(format!("{stem}_waveform.csv")))?))
}

/// Synthesizes the configured target, writing `synthesis.json` and `synthesis_waveform.csv`.
pub fn run_synthesis(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SynthesisRecord> {
    let record = synthesize_target(cfg, &cfg.target()?)?;
    if let Some(dir) = out {
        persist(&record, dir, "synthesis", cfg.output.waveform_dt_ns)?;
    }
    Ok(record)
}

/// Synthesizes every AllXY pair, one record and waveform per pair.
pub fn run_allxy(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SynthesisRecord>> {
    ALLXY_PAIRS
        .iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let record = synthesize_target(cfg, &TargetRotation::from_names(a, b)?)?;
            if let Some(dir) = out {
                persist(&record, dir, &format!("allxy_{k:02}"), cfg.output.waveform_dt_ns)?;
            }
            Ok(record)
        })
        .collect()
}
