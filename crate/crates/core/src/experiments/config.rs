//! JSON experiment configuration with unit-suffixed keys.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hardware::FilterSpec;
use crate::linalg::C64;
use crate::model::{SystemParams, TargetRotation, HARMONIC_LAMBDA};
use crate::optimizer::{OptimizerConfig, SearchMode};
use crate::propagator::{Method, PropagationGrid};
use crate::pulses::AmplitudeMode;

fn mhz(v: f64) -> f64 {
    TAU * v * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "omega1_GHz")]
    pub omega1_ghz: f64,
    #[serde(rename = "omega2_GHz")]
    pub omega2_ghz: f64,
    #[serde(rename = "anharmonicity_MHz")]
    pub anharmonicity_mhz: f64,
    #[serde(default = "harmonic")]
    pub lambda: [[f64; 2]; 2],
}

fn harmonic() -> [[f64; 2]; 2] {
    HARMONIC_LAMBDA
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { omega1_ghz: 5.508, omega2_ghz: 5.903, anharmonicity_mhz: -350.0, lambda: HARMONIC_LAMBDA }
    }
}

impl SystemConfig {
    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::from_cyclic(self.omega1_ghz, self.omega2_ghz, self.anharmonicity_mhz, self.lambda)
    }
}

/// Either gate names (`"X"`, `"Y/2"`, …) or complex angles `[re, im]` in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TargetConfig {
    Named { gate1: String, gate2: String },
    Angles { theta1_rad: [f64; 2], theta2_rad: [f64; 2] },
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig::Named { gate1: "X".into(), gate2: "X".into() }
    }
}

impl TargetConfig {
    pub fn rotation(&self) -> Result<TargetRotation> {
        match self {
            TargetConfig::Named { gate1, gate2 } => TargetRotation::from_names(gate1, gate2),
            TargetConfig::Angles { theta1_rad, theta2_rad } => {
                TargetRotation::new(C64::new(theta1_rad[0], theta1_rad[1]), C64::new(theta2_rad[0], theta2_rad[1]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub coeff_step: f64,
    #[serde(rename = "detuning_step_MHz")]
    pub detuning_step_mhz: f64,
    pub start_coeff_range: f64,
    #[serde(rename = "start_detuning_range_MHz")]
    pub start_detuning_range_mhz: f64,
    pub leakage_weight: f64,
    pub mode: SearchMode,
    pub amplitude_mode: AmplitudeMode,
    pub search_steps: Option<usize>,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerBlock {
            restarts: d.restarts,
            max_iter: d.max_iter,
            tol: d.tol,
            coeff_step: d.coeff_step,
            detuning_step_mhz: d.detuning_step / TAU * 1e3,
            start_coeff_range: d.start_coeff_range,
            start_detuning_range_mhz: d.start_detuning_range / TAU * 1e3,
            leakage_weight: d.leakage_weight,
            mode: d.mode,
            amplitude_mode: d.amplitude_mode,
            search_steps: d.search_steps,
        }
    }
}

impl OptimizerBlock {
    pub fn build(&self, seed: u64) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            coeff_step: self.coeff_step,
            detuning_step: mhz(self.detuning_step_mhz),
            start_coeff_range: self.start_coeff_range,
            start_detuning_range: mhz(self.start_detuning_range_mhz),
            seed,
            leakage_weight: self.leakage_weight,
            mode: self.mode,
            amplitude_mode: self.amplitude_mode,
            search_steps: self.search_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    /// Fixed step count; the default grid for each gate time when absent.
    pub steps: Option<usize>,
    pub method: Option<Method>,
}

impl GridBlock {
    pub fn grid(&self, tg: f64) -> Result<PropagationGrid> {
        let base = PropagationGrid::default_for(tg);
        PropagationGrid::new(tg, self.steps.unwrap_or(base.steps), self.method.unwrap_or(base.method))
    }
}

/// Explicit values or `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Range {
    Values { values: Vec<f64> },
    Linear { start: f64, stop: f64, points: usize },
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Range::Values { values } => values.clone(),
            Range::Linear { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64).collect(),
            },
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        let v = self.values();
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("sweep range `{what}` must contain finite values")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    #[serde(rename = "tg_ns")]
    pub tg_ns: Range,
    #[serde(rename = "crowding_MHz")]
    pub crowding_mhz: Range,
    /// Gate times of the speed-limit scan.
    #[serde(rename = "limit_tg_ns")]
    pub limit_tg_ns: Range,
    /// Speed-limit gate times in units of 2π/δ; overrides `limit_tg_ns` when present.
    pub tg_normalized: Option<Range>,
    /// Stop a speed-limit column at its first gate time meeting the threshold.
    pub stop_at_threshold: bool,
    pub threshold: f64,
    #[serde(rename = "anharmonicity_deviation_percent")]
    pub anharmonicity_deviation_percent: Range,
    #[serde(rename = "crowding_deviation_percent")]
    pub crowding_deviation_percent: Range,
    /// Normalized WahWah gate times `tg·δ/2π`.
    pub tg_bar: Range,
    pub strategies: Vec<String>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            tg_ns: Range::Linear { start: 20.0, stop: 60.0, points: 21 },
            crowding_mhz: Range::Linear { start: 30.0, stop: 90.0, points: 9 },
            limit_tg_ns: Range::Linear { start: 12.0, stop: 44.0, points: 17 },
            tg_normalized: None,
            stop_at_threshold: false,
            threshold: 1e-4,
            anharmonicity_deviation_percent: Range::Linear { start: -6.0, stop: 6.0, points: 25 },
            crowding_deviation_percent: Range::Linear { start: -6.0, stop: 6.0, points: 25 },
            tg_bar: Range::Values { values: vec![0.8, 0.85, 0.9, 1.0, 1.25, 1.5, 1.75, 2.0] },
            strategies: vec!["gaussian".into(), "derivative".into(), "resonant".into(), "off_resonant".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBlock {
    #[serde(rename = "omega0_MHz")]
    pub omega0_mhz: f64,
    #[serde(rename = "pad_ns", default)]
    pub pad_ns: Option<f64>,
}

impl Default for FilterBlock {
    fn default() -> Self {
        FilterBlock { omega0_mhz: 425.4, pad_ns: None }
    }
}

impl FilterBlock {
    pub fn spec(&self) -> Result<FilterSpec> {
        let mut spec = FilterSpec::new(mhz(self.omega0_mhz))?;
        if let Some(p) = self.pad_ns {
            spec.pad_length = p;
            spec.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    #[serde(rename = "waveform_dt_ns")]
    pub waveform_dt_ns: f64,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: PathBuf::from("results"), waveform_dt_ns: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(rename = "tg_ns", default = "default_tg")]
    pub tg_ns: f64,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub filter: FilterBlock,
    /// Gate pairs applied in time order by the sequence check.
    #[serde(default = "hadamard_sequence")]
    pub sequence: Vec<[String; 2]>,
    #[serde(default)]
    pub output: OutputBlock,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
}

fn default_tg() -> f64 {
    30.0
}

fn one() -> usize {
    1
}

fn hadamard_sequence() -> Vec<[String; 2]> {
    vec![["Y/2".into(), "Y/2".into()], ["X".into(), "X".into()]]
}

impl ExperimentConfig {
    /// Reference device, X⊗X at 30 ns.
    pub fn reference(seed: u64) -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            target: TargetConfig::default(),
            tg_ns: default_tg(),
            optimizer: OptimizerBlock::default(),
            grid: GridBlock::default(),
            sweep: SweepBlock::default(),
            filter: FilterBlock::default(),
            sequence: hadamard_sequence(),
            output: OutputBlock::default(),
            seed,
            workers: 1,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.target()?;
        if !(self.tg_ns > 0.0 && self.tg_ns.is_finite()) {
            return Err(Error::Config(format!("tg_ns = {} must be positive", self.tg_ns)));
        }
        self.optimizer.build(self.seed).map_err(|e| Error::Config(e.to_string()))?;
        self.grid.grid(self.tg_ns).map_err(|e| Error::Config(e.to_string()))?;
        self.filter.spec().map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.sweep;
        s.tg_ns.check("tg_ns")?;
        s.crowding_mhz.check("crowding_MHz")?;
        s.limit_tg_ns.check("limit_tg_ns")?;
        s.anharmonicity_deviation_percent.check("anharmonicity_deviation_percent")?;
        s.crowding_deviation_percent.check("crowding_deviation_percent")?;
        s.tg_bar.check("tg_bar")?;
        if let Some(r) = &s.tg_normalized {
            r.check("tg_normalized")?;
        }
        if s.tg_ns.values().iter().chain(&s.limit_tg_ns.values()).any(|t| *t <= 0.0) {
            return Err(Error::Config("sweep gate times must be positive".into()));
        }
        if s.crowding_mhz.values().iter().any(|d| *d <= 0.0) {
            return Err(Error::Config("crowding frequencies must be positive".into()));
        }
        if !(s.threshold > 0.0) {
            return Err(Error::Config("threshold must be positive".into()));
        }
        for name in &s.strategies {
            super::sweeps::Strategy::parse(name)?;
        }
        for [a, b] in &self.sequence {
            TargetRotation::from_names(a, b)?;
        }
        if !(self.output.waveform_dt_ns > 0.0) {
            return Err(Error::Config("waveform_dt_ns must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        self.system.params().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn target(&self) -> Result<TargetRotation> {
        self.target.rotation().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        self.optimizer.build(self.seed)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        super::persistence::digest(&serde_json::to_vec(self).unwrap_or_default())
    }
}
