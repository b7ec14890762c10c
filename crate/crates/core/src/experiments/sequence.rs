//! Composite gates from simulated pulses joined by virtual Z corrections.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::config::ExperimentConfig;
use super::persistence::{point_seed, with_workers, write_json};
use super::sweeps::{evaluate_strategy, Strategy};
use super::Assessment;
use crate::error::{Error, Result};
use crate::linalg::{Mat9, C64};
use crate::metrics::{gate_fidelity, SimResult};
use crate::model::{target_unitary, transform_frame, FrameSpec, TargetRotation};

/// Lab-frame gate of one result with its Z correction applied.
pub fn corrected_gate(result: &SimResult) -> Mat9 {
    let lab = transform_frame(&result.unitary_matrix(), &FrameSpec::interaction(&result.params), result.pulse.tg);
    result.z_correction.unitary() * lab
}

/// Hadamard on one qubit as a 2×2 matrix.
pub fn hadamard() -> [[C64; 2]; 2] {
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    [[h, h], [h, -h]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    /// Error of each gate on its own.
    pub gate_errors: Vec<f64>,
    pub composite_error: f64,
    /// Composite target, row-major `[re, im]` on the computational subspace.
    pub composite_target: Vec<Vec<[f64; 2]>>,
}

impl SequenceReport {
    /// Composite error within `(Σ √e_k)²`, the worst case of coherent error addition.
    pub fn assess(&self) -> Assessment {
        let bound = self.gate_errors.iter().map(|e| e.sqrt()).sum::<f64>().powi(2) + 1e-12;
        let mut a = Assessment::default();
        a.check(self.composite_error <= bound, format!("composite {:.3e} vs bound {bound:.3e}", self.composite_error));
        a
    }
}

/// Multiplies the corrected gates of `results` (applied in order) and scores the product
/// against the product of their targets.
pub fn compose_sequence(results: &[SimResult]) -> Result<SequenceReport> {
    if results.is_empty() {
        return Err(Error::Config("empty gate sequence".into()));
    }
    let mut u = Mat9::identity();
    let mut t = Mat9::identity();
    for r in results {
        u = corrected_gate(r) * u;
        t = target_unitary(&r.target) * t;
    }
    let idx = crate::linalg::COMPUTATIONAL;
    let composite_target = idx.iter().map(|&i| idx.iter().map(|&j| [t[(i, j)].re, t[(i, j)].im]).collect()).collect();
    Ok(SequenceReport {
        gate_errors: results.iter().map(|r| r.gate_error).collect(),
        composite_error: (1.0 - gate_fidelity(&u, &t)).max(0.0),
        composite_target,
    })
}

/// Optimizes each configured gate pair at the configured gate time and composes them.
pub fn run_sequence(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SequenceReport> {
    let params = cfg.params()?;
    let grid = cfg.grid.grid(cfg.tg_ns)?;
    let mut results = Vec::new();
    for (k, [a, b]) in cfg.sequence.iter().enumerate() {
        let target = TargetRotation::from_names(a, b)?;
        let seed = point_seed(cfg.seed, &format!("sequence/{k}/{a}/{b}"));
        let opt = cfg.optimizer.build(seed)?;
        let o = with_workers(cfg.workers, || evaluate_strategy(Strategy::OffResonant, &params, &target, cfg.tg_ns, &opt, &grid))??;
        results.push(o.result);
    }
    let report = compose_sequence(&results)?;
    if let Some(dir) = out {
        write_json(&dir.join("sequence.json"), &report)?;
        write_json(&dir.join("sequence_gates.json"), &results)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::COMPUTATIONAL;
    use crate::model::SystemParams;
    use crate::pulses::PulseAnsatz;
    use crate::propagator::{Method, PropagationGrid};

    fn qubit(m: &Mat9) -> [[C64; 2]; 2] {
        // qubit-1 block with qubit 2 in |0>
        [[m[(0, 0)], m[(0, 3)]], [m[(3, 0)], m[(3, 3)]]]
    }

    #[test]
    fn x_after_half_y_is_hadamard_up_to_phase() {
        let x = target_unitary(&TargetRotation::from_names("X", "I").unwrap());
        let y2 = target_unitary(&TargetRotation::from_names("Y/2", "I").unwrap());
        let p = qubit(&(x * y2));
        let h = hadamard();
        let phase = p[0][0] / h[0][0];
        assert!((phase.norm() - 1.0).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[i][j] - phase * h[i][j]).norm() < 1e-14);
            }
        }
    }

    /// A result whose interaction-frame unitary is exactly the target.
    fn perfect(target: &TargetRotation, tg: f64, p: &SystemParams) -> SimResult {
        let field = PulseAnsatz::resonant_single_window(tg, 3).field(target, p, Default::default()).unwrap();
        let grid = PropagationGrid::new(tg, 64, Method::CommutatorFree4).unwrap();
        SimResult::from_unitary(&target_unitary(target), &field, target, p, &grid)
    }

    #[test]
    fn perfect_gates_compose_to_unit_fidelity() {
        let p = SystemParams::reference();
        let a = perfect(&TargetRotation::from_names("Y/2", "Y/2").unwrap(), 27.0, &p);
        let b = perfect(&TargetRotation::from_names("X", "X").unwrap(), 31.5, &p);
        assert!(a.gate_error < 1e-12 && b.gate_error < 1e-12);
        let r = compose_sequence(&[a, b]).unwrap();
        assert!(r.composite_error < 1e-12, "{}", r.composite_error);
        let h = hadamard();
        // composite target is H ⊗ H up to phase
        let t = &r.composite_target;
        let c = |i: usize, j: usize| C64::new(t[i][j][0], t[i][j][1]);
        let phase = c(0, 0) / (h[0][0] * h[0][0]);
        for (i, _) in COMPUTATIONAL.iter().enumerate() {
            for (j, _) in COMPUTATIONAL.iter().enumerate() {
                let want = h[i / 2][j / 2] * h[i % 2][j % 2] * phase;
                assert!((c(i, j) - want).norm() < 1e-12);
            }
        }
        assert!(compose_sequence(&[]).is_err());
    }
}
