//! Gate-time, speed-limit and robustness sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use super::config::ExperimentConfig;
use super::persistence::{digest, point_key, point_seed, run_points, with_workers, write_csv, RecordStore};
use super::Assessment;
use crate::error::{Error, Result};
use crate::metrics::SimResult;
use crate::model::{SystemParams, TargetRotation};
use crate::optimizer::{multistart_optimize, nelder_mead, GateProblem, NmOptions, OptimizerConfig, ParamVector, SearchMode};
use crate::propagator::PropagationGrid;
use crate::pulses::{derivative_baseline, gaussian_baseline, ControlField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Gaussian,
    /// Gaussian plus derivative quadrature, β tuned by a 1-D search.
    Derivative,
    /// Three Hanning windows, resonant carriers.
    Resonant,
    /// Three Hanning windows with optimized carrier detunings.
    OffResonant,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Gaussian, Strategy::Derivative, Strategy::Resonant, Strategy::OffResonant];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(Strategy::Gaussian),
            "derivative" => Ok(Strategy::Derivative),
            "resonant" => Ok(Strategy::Resonant),
            "off_resonant" => Ok(Strategy::OffResonant),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Gaussian => "gaussian",
            Strategy::Derivative => "derivative",
            Strategy::Resonant => "resonant",
            Strategy::OffResonant => "off_resonant",
        }
    }

    fn index(&self) -> f64 {
        Strategy::ALL.iter().position(|s| s == self).unwrap_or(0) as f64
    }
}

/// A pulse produced by one strategy, scored on the final grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub result: SimResult,
    pub beta: Option<f64>,
    pub x: Option<ParamVector>,
    pub ledger_digest: Option<String>,
}

/// Builds the pulse of `strategy` at gate time `tg` and simulates it on `grid`.
pub fn evaluate_strategy(
    strategy: Strategy,
    params: &SystemParams,
    target: &TargetRotation,
    tg: f64,
    optimizer: &OptimizerConfig,
    grid: &PropagationGrid,
) -> Result<StrategyOutcome> {
    let simulate = |field: &ControlField| SimResult::simulate(field, target, params, grid);
    match strategy {
        Strategy::Gaussian => {
            let field = gaussian_baseline(tg, target, params, [0.0, 0.0])?;
            Ok(StrategyOutcome { result: simulate(&field), beta: None, x: None, ledger_digest: None })
        }
        Strategy::Derivative => {
            let problem = GateProblem::new(*params, *target, tg, GateProblem::search_grid(tg, optimizer.search_steps));
            let score = |b: &[f64]| match derivative_baseline(tg, target, params, [0.0, 0.0], b[0]) {
                Ok(f) => problem.score(&f),
                Err(_) => f64::INFINITY,
            };
            // first-order leakage cancellation sets the scale of β
            let b0 = -1.0 / (2.0 * params.anharmonicity());
            let r = nelder_mead(score, &[b0], &[0.5 * b0.abs()], NmOptions { max_iter: 200, tol: 1e-14 });
            let beta = if r.f <= score(&[0.0]) { r.x[0] } else { 0.0 };
            let field = derivative_baseline(tg, target, params, [0.0, 0.0], beta)?;
            Ok(StrategyOutcome { result: simulate(&field), beta: Some(beta), x: None, ledger_digest: None })
        }
        Strategy::Resonant | Strategy::OffResonant => {
            let mode = if strategy == Strategy::Resonant { SearchMode::Resonant } else { SearchMode::OffResonant };
            let cfg = OptimizerConfig { mode, ..optimizer.clone() };
            let o = multistart_optimize(params, target, tg, &cfg)?;
            let result = if *grid == o.result.grid { o.result } else { simulate(&o.result.pulse) };
            Ok(StrategyOutcome {
                result,
                beta: None,
                x: Some(o.x),
                ledger_digest: Some(digest(&serde_json::to_vec(&o.ledger)?)),
            })
        }
    }
}

/// One point of the gate-time sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRecord {
    pub tg: f64,
    pub strategy: Strategy,
    pub gate_error: f64,
    pub leakage: f64,
    pub leakage_worst: f64,
    pub beta: Option<f64>,
    pub x: Option<ParamVector>,
    pub config_hash: String,
    pub seed: u64,
    pub ledger_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTimeReport {
    pub records: Vec<TimeRecord>,
}

impl GateTimeReport {
    pub fn error(&self, tg: f64, strategy: Strategy) -> Option<f64> {
        self.records.iter().find(|r| r.tg == tg && r.strategy == strategy).map(|r| r.gate_error)
    }

    /// Off-resonant at least 10× better than resonant at 30 and 36 ns, and better than the
    /// Gaussian baseline at every gate time from 26 ns, wherever both were computed.
    pub fn assess(&self) -> Assessment {
        let mut a = Assessment::default();
        for tg in [30.0, 36.0] {
            if let (Some(r), Some(o)) = (self.error(tg, Strategy::Resonant), self.error(tg, Strategy::OffResonant)) {
                a.check(r >= 10.0 * o, format!("tg {tg} ns: resonant {r:.3e} vs off-resonant {o:.3e}"));
            }
        }
        for rec in self.records.iter().filter(|r| r.strategy == Strategy::OffResonant && r.tg >= 26.0) {
            if let Some(g) = self.error(rec.tg, Strategy::Gaussian) {
                a.check(rec.gate_error < g, format!("tg {} ns: Hanning {:.3e} vs Gaussian {g:.3e}", rec.tg, rec.gate_error));
            }
        }
        a
    }
}

/// Error versus gate time for each configured strategy.
pub fn sweep_gate_time(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<GateTimeReport> {
    let params = cfg.params()?;
    let target = cfg.target()?;
    let hash = cfg.hash();
    let strategies: Vec<Strategy> = cfg.sweep.strategies.iter().map(|s| Strategy::parse(s)).collect::<Result<_>>()?;
    let mut points = Vec::new();
    for tg in cfg.sweep.tg_ns.values() {
        for s in &strategies {
            points.push((point_key(&hash, s.name(), &[tg]), (tg, *s)));
        }
    }
    let store = out.map(|d| RecordStore::open(&d.join("sweep_time.jsonl"))).transpose()?;
    let records = with_workers(cfg.workers, || {
        run_points(store.as_ref(), &points, |key, &(tg, strategy)| {
            let seed = point_seed(cfg.seed, key);
            let opt = cfg.optimizer.build(seed)?;
            let o = evaluate_strategy(strategy, &params, &target, tg, &opt, &cfg.grid.grid(tg)?)?;
            Ok(TimeRecord {
                tg,
                strategy,
                gate_error: o.result.gate_error,
                leakage: o.result.leakage,
                leakage_worst: o.result.leakage_worst,
                beta: o.beta,
                x: o.x,
                config_hash: hash.clone(),
                seed,
                ledger_digest: o.ledger_digest,
            })
        })
    })??;
    if let Some(dir) = out {
        let rows = records
            .iter()
            .map(|r| vec![r.tg, r.strategy.index(), r.gate_error, r.leakage, r.leakage_worst, r.beta.unwrap_or(f64::NAN)])
            .collect();
        write_csv(&dir.join("sweep_time.csv"), &["tg_ns", "strategy", "gate_error", "leakage", "leakage_worst", "beta_ns"], rows, 2)?;
    }
    Ok(GateTimeReport { records })
}

/// Log-linear interpolation of the first crossing of `threshold` in a gate-time scan.
///
/// `None` when no point reaches the threshold or the first point already does.
pub fn extract_limit(scan: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let i = scan.iter().position(|&(_, e)| e <= threshold)?;
    if i == 0 {
        return None;
    }
    let (t0, e0) = scan[i - 1];
    let (t1, e1) = scan[i];
    if e1 <= 0.0 {
        return Some(t1);
    }
    let (l0, l1, lt) = (e0.ln(), e1.ln(), threshold.ln());
    Some(t0 + (t1 - t0) * (lt - l0) / (l1 - l0))
}

/// Least-squares α in `log t_min = log α + log(2π/δ)` over `(δ, t_min)` pairs (rad/ns, ns).
pub fn fit_speed_limit(limits: &[(f64, f64)]) -> Option<f64> {
    if limits.is_empty() {
        return None;
    }
    let mean = limits.iter().map(|&(d, t)| (t * d / TAU).ln()).sum::<f64>() / limits.len() as f64;
    Some(mean.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCell {
    #[serde(rename = "crowding_MHz")]
    pub crowding_mhz: f64,
    pub tg: f64,
    pub gate_error: f64,
    pub leakage: f64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnLimit {
    #[serde(rename = "crowding_MHz")]
    pub crowding_mhz: f64,
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimitReport {
    pub threshold: f64,
    pub cells: Vec<LimitCell>,
    pub limits: Vec<ColumnLimit>,
    pub alpha: Option<f64>,
}

impl SpeedLimitReport {
    /// α within [0.7, 1.1]; where a column extends 8 ns past its limit, the error there is no larger.
    pub fn assess(&self) -> Assessment {
        let mut a = Assessment::default();
        match self.alpha {
            Some(alpha) => a.check((0.7..=1.1).contains(&alpha), format!("alpha = {alpha:.3}")),
            None => a.check(false, "no column reached the threshold".to_string()),
        }
        for lim in &self.limits {
            let column: Vec<&LimitCell> = self.cells.iter().filter(|c| c.crowding_mhz == lim.crowding_mhz).collect();
            let Some(first) = column.iter().find(|c| c.gate_error <= self.threshold) else { continue };
            if let Some(later) = column.iter().find(|c| (c.tg - first.tg - 8.0).abs() < 1e-9) {
                a.check(
                    later.gate_error <= first.gate_error,
                    format!("{} MHz: error {:.3e} at {} ns after {:.3e} at {} ns", lim.crowding_mhz, later.gate_error, later.tg, first.gate_error, first.tg),
                );
            }
        }
        a
    }
}

/// Gate-time scans of the off-resonant Hanning pulse across crowding frequencies.
pub fn sweep_speed_limit(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SpeedLimitReport> {
    let base = cfg.params()?;
    let target = cfg.target()?;
    let hash = cfg.hash();
    let threshold = cfg.sweep.threshold;
    let store = out.map(|d| RecordStore::open(&d.join("speed_limit.jsonl"))).transpose()?;
    let columns = cfg.sweep.crowding_mhz.values();
    let column = |dmhz: f64| -> Result<Vec<LimitCell>> {
        let params = base.with_crowding(TAU * dmhz * 1e-3)?;
        let tgs: Vec<f64> = match &cfg.sweep.tg_normalized {
            Some(r) => r.values().iter().map(|t| t * 1e3 / dmhz).collect(),
            None => cfg.sweep.limit_tg_ns.values(),
        };
        let mut cells = Vec::new();
        for tg in tgs {
            let key = point_key(&hash, "speed_limit", &[dmhz, tg]);
            let cell = match store.as_ref().and_then(|s| s.get::<LimitCell>(&key)) {
                Some(c) => c,
                None => {
                    let seed = point_seed(cfg.seed, &key);
                    let opt = cfg.optimizer.build(seed)?;
                    let o = evaluate_strategy(Strategy::OffResonant, &params, &target, tg, &opt, &cfg.grid.grid(tg)?)?;
                    let c = LimitCell { crowding_mhz: dmhz, tg, gate_error: o.result.gate_error, leakage: o.result.leakage, config_hash: hash.clone(), seed };
                    if let Some(s) = &store {
                        s.append(&key, &c)?;
                    }
                    c
                }
            };
            let done = cell.gate_error <= threshold;
            cells.push(cell);
            if done && cfg.sweep.stop_at_threshold {
                break;
            }
        }
        Ok(cells)
    };
    let per_column: Vec<Vec<LimitCell>> = with_workers(cfg.workers, || columns.par_iter().map(|&d| column(d)).collect::<Result<_>>())??;
    let limits: Vec<ColumnLimit> = columns
        .iter()
        .zip(&per_column)
        .map(|(&d, cells)| {
            let scan: Vec<(f64, f64)> = cells.iter().map(|c| (c.tg, c.gate_error)).collect();
            ColumnLimit { crowding_mhz: d, t_min: extract_limit(&scan, threshold) }
        })
        .collect();
    let pairs: Vec<(f64, f64)> = limits.iter().filter_map(|l| l.t_min.map(|t| (TAU * l.crowding_mhz * 1e-3, t))).collect();
    let cells: Vec<LimitCell> = per_column.into_iter().flatten().collect();
    if let Some(dir) = out {
        let rows = cells.iter().map(|c| vec![c.crowding_mhz, c.tg, c.gate_error, c.leakage]).collect();
        write_csv(&dir.join("speed_limit.csv"), &["crowding_MHz", "tg_ns", "gate_error", "leakage"], rows, 2)?;
        let rows = limits.iter().map(|l| vec![l.crowding_mhz, l.t_min.unwrap_or(f64::NAN), 1e3 / l.crowding_mhz]).collect();
        write_csv(&dir.join("speed_limit_fit.csv"), &["crowding_MHz", "t_min_ns", "two_pi_over_delta_ns"], rows, 1)?;
    }
    Ok(SpeedLimitReport { threshold, cells, limits, alpha: fit_speed_limit(&pairs) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    /// Relative deviation of Δ.
    pub anharmonicity_rel: f64,
    /// Relative deviation of δ.
    pub crowding_rel: f64,
    pub gate_error: f64,
    pub leakage: f64,
}

/// Re-simulates a fixed pulse on devices whose Δ and δ deviate by the given fractions.
///
/// The carriers follow the deviated qubit frequencies.
pub fn robustness_map(
    field: &ControlField,
    target: &TargetRotation,
    params: &SystemParams,
    anharmonicity_rel: &[f64],
    crowding_rel: &[f64],
    grid: &PropagationGrid,
) -> Result<Vec<RobustnessCell>> {
    let mut points = Vec::new();
    for &a in anharmonicity_rel {
        for &c in crowding_rel {
            points.push((a, c));
        }
    }
    points
        .par_iter()
        .map(|&(a, c)| {
            let p = params.with_relative_deviation(a, c)?;
            let r = SimResult::simulate(field, target, &p, grid);
            Ok(RobustnessCell { anharmonicity_rel: a, crowding_rel: c, gate_error: r.gate_error, leakage: r.leakage })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub nominal: SimResult,
    pub cells: Vec<RobustnessCell>,
    pub config_hash: String,
    pub seed: u64,
}

impl RobustnessReport {
    fn error_at(&self, a: f64, c: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|x| (x.anharmonicity_rel - a).abs() < 1e-12 && (x.crowding_rel - c).abs() < 1e-12)
            .map(|x| x.gate_error)
    }

    /// δ within ±1.5% ≤ 1e−4 and within ±4% ≤ 1e−3; Δ at ±4% within 10× of nominal.
    pub fn assess(&self) -> Assessment {
        let mut a = Assessment::default();
        let nominal = self.nominal.gate_error;
        for cell in self.cells.iter().filter(|c| c.anharmonicity_rel == 0.0) {
            let d = cell.crowding_rel.abs();
            if d <= 0.015 + 1e-12 {
                a.check(cell.gate_error <= 1e-4, format!("δ {:+.1}%: {:.3e}", 100.0 * cell.crowding_rel, cell.gate_error));
            } else if d <= 0.04 + 1e-12 {
                a.check(cell.gate_error <= 1e-3, format!("δ {:+.1}%: {:.3e}", 100.0 * cell.crowding_rel, cell.gate_error));
            }
        }
        for dev in [-0.04, 0.04] {
            if let Some(e) = self.error_at(dev, 0.0) {
                let ratio = (e / nominal).max(nominal / e);
                a.check(ratio < 10.0, format!("Δ {:+.0}%: {e:.3e} vs nominal {nominal:.3e}", 100.0 * dev));
            }
        }
        a
    }
}

/// Optimizes the configured gate once and maps its error over the deviation grid.
pub fn sweep_robustness(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RobustnessReport> {
    let params = cfg.params()?;
    let target = cfg.target()?;
    let grid = cfg.grid.grid(cfg.tg_ns)?;
    let opt = cfg.optimizer_config()?;
    let nominal = with_workers(cfg.workers, || evaluate_strategy(Strategy::OffResonant, &params, &target, cfg.tg_ns, &opt, &grid))??.result;
    let pct = |r: &super::config::Range| r.values().iter().map(|v| v / 100.0).collect::<Vec<f64>>();
    let cells = with_workers(cfg.workers, || {
        robustness_map(&nominal.pulse, &target, &params, &pct(&cfg.sweep.anharmonicity_deviation_percent), &pct(&cfg.sweep.crowding_deviation_percent), &grid)
    })??;
    if let Some(dir) = out {
        let rows = cells.iter().map(|c| vec![100.0 * c.anharmonicity_rel, 100.0 * c.crowding_rel, c.gate_error, c.leakage]).collect();
        write_csv(&dir.join("robustness.csv"), &["anharmonicity_dev_percent", "crowding_dev_percent", "gate_error", "leakage"], rows, 2)?;
        super::persistence::write_json(&dir.join("robustness_pulse.json"), &nominal)?;
    }
    Ok(RobustnessReport { nominal, cells, config_hash: cfg.hash(), seed: cfg.seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_injected_alpha() {
        let exact: Vec<(f64, f64)> = [30.0, 45.0, 60.0, 75.0, 90.0].iter().map(|m| (TAU * m * 1e-3, 1e3 / m)).collect();
        assert!((fit_speed_limit(&exact).unwrap() - 1.0).abs() < 1e-12);
        let scaled: Vec<(f64, f64)> = exact.iter().map(|&(d, t)| (d, 0.83 * t)).collect();
        assert!((fit_speed_limit(&scaled).unwrap() - 0.83).abs() < 1e-12);
        assert_eq!(fit_speed_limit(&[]), None);
    }

    #[test]
    fn limit_interpolates_on_log_error() {
        let scan = [(10.0, 1e-2), (12.0, 1e-3), (14.0, 1e-5), (16.0, 1e-6)];
        assert!((extract_limit(&scan, 1e-4).unwrap() - 13.0).abs() < 1e-12);
        assert_eq!(extract_limit(&scan, 1e-7), None);
        assert_eq!(extract_limit(&scan, 0.5), None);
    }

    #[test]
    fn zero_deviation_reproduces_nominal_bit_exactly() {
        let p = SystemParams::reference();
        let target = TargetRotation::from_names("X", "X").unwrap();
        let field = gaussian_baseline(20.0, &target, &p, [0.0, 0.0]).unwrap();
        let grid = PropagationGrid::new(20.0, 256, crate::propagator::Method::CommutatorFree4).unwrap();
        let nominal = SimResult::simulate(&field, &target, &p, &grid);
        let cells = robustness_map(&field, &target, &p, &[-0.02, 0.0], &[0.0, 0.03], &grid).unwrap();
        assert_eq!(cells.len(), 4);
        let zero = cells.iter().find(|c| c.anharmonicity_rel == 0.0 && c.crowding_rel == 0.0).unwrap();
        assert_eq!(zero.gate_error.to_bits(), nominal.gate_error.to_bits());
        assert!(cells.iter().any(|c| c.gate_error != nominal.gate_error));
    }

    #[test]
    fn strategies_parse_by_name() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::parse(s.name()).unwrap(), s);
        }
        assert!(Strategy::parse("drag").is_err());
    }

    #[test]
    fn derivative_baseline_tuning_does_not_lose_to_plain_gaussian() {
        let p = SystemParams::reference();
        let target = TargetRotation::from_names("X", "X").unwrap();
        let grid = PropagationGrid::new(24.0, 512, crate::propagator::Method::CommutatorFree4).unwrap();
        let opt = OptimizerConfig { search_steps: Some(512), ..Default::default() };
        let g = evaluate_strategy(Strategy::Gaussian, &p, &target, 24.0, &opt, &grid).unwrap();
        let d = evaluate_strategy(Strategy::Derivative, &p, &target, 24.0, &opt, &grid).unwrap();
        assert!(d.result.gate_error <= g.result.gate_error * (1.0 + 1e-9));
        assert!(d.beta.is_some());
    }
}
