//! Configured studies: synthesis, sweeps, WahWah, filtering and gate sequences.

pub mod config;
pub mod filter;
pub mod persistence;
pub mod sequence;
pub mod sweeps;
pub mod synthesis;
pub mod wahwah;

use serde::{Deserialize, Serialize};

pub use config::ExperimentConfig;
pub use filter::{filter_study, FilterReport, FilterRow};
pub use sequence::{compose_sequence, run_sequence, SequenceReport};
pub use sweeps::{
    evaluate_strategy, extract_limit, fit_speed_limit, robustness_map, sweep_gate_time, sweep_robustness, sweep_speed_limit, Strategy,
};
pub use synthesis::{run_allxy, run_synthesis, SynthesisRecord};
pub use wahwah::{wahwah_point, wahwah_study, WahWahProblem, WahWahReport, WahWahRow};

/// Outcome of a study's threshold checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Default for Assessment {
    fn default() -> Self {
        Assessment { passed: true, lines: Vec::new() }
    }
}

impl Assessment {
    pub fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }
}
