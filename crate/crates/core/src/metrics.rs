//! Gate fidelities, leakage and Z-phase bookkeeping.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::{pair_index, C64, Mat9, COMPUTATIONAL, ZERO};
use crate::model::{target_unitary, SystemParams, TargetRotation};
use crate::propagator::{propagate_pair, PropagationGrid};
use crate::pulses::ControlField;

/// Overlap fidelity `|Tr_comp(T† U)|² / 16`, insensitive to global phase.
pub fn gate_fidelity(u: &Mat9, target: &Mat9) -> f64 {
    computational_overlap(u, target).norm_sqr() / 16.0
}

fn computational_overlap(u: &Mat9, target: &Mat9) -> C64 {
    let mut tr = ZERO;
    for &a in &COMPUTATIONAL {
        for &b in &COMPUTATIONAL {
            tr += target[(b, a)].conj() * u[(b, a)];
        }
    }
    tr
}

/// Diagonal of `T† U` restricted to the computational states, indexed by `(k1, k2)`.
fn block_traces(u: &Mat9, target: &Mat9) -> [C64; 2] {
    let mut out = [ZERO; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        for k1 in 0..2 {
            let a = pair_index(k1, i);
            for &b in &COMPUTATIONAL {
                *slot += target[(b, a)].conj() * u[(b, a)];
            }
        }
    }
    out
}

/// Reduced fidelities `(Φ_{|*,0>}, Φ_{|*,1>}, Φ_avg)`, blind to relative phases of qubit 2.
pub fn reduced_fidelity(u: &Mat9, target: &Mat9) -> (f64, f64, f64) {
    let [t0, t1] = block_traces(u, target);
    let f0 = t0.norm_sqr() / 4.0;
    let f1 = t1.norm_sqr() / 4.0;
    (f0, f1, 0.5 * (f0 + f1))
}

/// Final population in states with qutrit 2 in level 2, averaged over the four computational inputs.
pub fn leakage_error(u: &Mat9) -> f64 {
    leakage_per_input(u).iter().sum::<f64>() / 4.0
}

/// Worst-case counterpart of [`leakage_error`].
pub fn leakage_worst(u: &Mat9) -> f64 {
    leakage_per_input(u).iter().cloned().fold(0.0, f64::max)
}

fn leakage_per_input(u: &Mat9) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (slot, &input) in out.iter_mut().zip(&COMPUTATIONAL) {
        *slot = (0..3).map(|k1| u[(pair_index(k1, 2), input)].norm_sqr()).sum();
    }
    out
}

/// Population leaving the computational subspace altogether, averaged over inputs.
pub fn total_leakage(u: &Mat9) -> f64 {
    COMPUTATIONAL
        .iter()
        .map(|&input| 1.0 - COMPUTATIONAL.iter().map(|&o| u[(o, input)].norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / 4.0
}

fn wrap_pi(x: f64) -> f64 {
    // into (−π, π]
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Z-error phases `(φ_Z1, φ_Z2)` in `[0, 2π)` acquired when mapping interaction-frame gates to the lab.
pub fn z_error_phases(params: &SystemParams, lambda1: f64, tg: f64) -> (f64, f64) {
    let wd1 = params.omega1() + lambda1;
    let p1 = (wd1 - lambda1) * tg / 2.0;
    let p2 = (wd1 + params.crowding() - params.anharmonicity() - lambda1) * tg / 2.0;
    (p1.rem_euclid(TAU), p2.rem_euclid(TAU))
}

/// Required Z-control areas, reduced into `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZCorrection {
    pub area1: f64,
    pub area2: f64,
}

impl ZCorrection {
    /// `exp(i·area1·Z) ⊗ exp(i·area2·Z)` on the qubit levels, identity on the leakage levels.
    pub fn unitary(&self) -> Mat9 {
        let z = |area: f64| [C64::from_polar(1.0, area), C64::from_polar(1.0, -area), C64::new(1.0, 0.0)];
        let (z1, z2) = (z(self.area1), z(self.area2));
        let mut m = Mat9::zeros();
        for k1 in 0..3 {
            for k2 in 0..3 {
                let i = pair_index(k1, k2);
                m[(i, i)] = z1[k1] * z2[k2];
            }
        }
        m
    }
}

pub fn z_correction(params: &SystemParams, lambda1: f64, tg: f64) -> ZCorrection {
    let (p1, p2) = z_error_phases(params, lambda1, tg);
    ZCorrection { area1: wrap_pi(-p1), area2: wrap_pi(-p2) }
}

/// Best fidelity over virtual Z rotations `diag(1, e^{iα}) ⊗ diag(1, e^{iβ})` applied after `u`.
///
/// Returns `(Φ, α, β)`.
pub fn phase_corrected_fidelity(u: &Mat9, target: &Mat9) -> (f64, f64, f64) {
    // Tr(T† Z U) = Σ_k z_k (U T†)_kk over computational k
    let mut m = [[ZERO; 2]; 2];
    for k1 in 0..2 {
        for k2 in 0..2 {
            let a = pair_index(k1, k2);
            let mut acc = ZERO;
            for &b in &COMPUTATIONAL {
                acc += u[(a, b)] * target[(a, b)].conj();
            }
            m[k1][k2] = acc;
        }
    }
    let value = |alpha: f64, beta: f64| {
        let za = C64::from_polar(1.0, alpha);
        let zb = C64::from_polar(1.0, beta);
        m[0][0] + zb * m[0][1] + za * m[1][0] + za * zb * m[1][1]
    };
    let mut best = (value(0.0, 0.0).norm(), 0.0, 0.0);
    for start in 0..8 {
        let mut alpha = start as f64 * PI / 4.0;
        let mut beta = 0.0;
        for _ in 0..200 {
            // optimal β for fixed α, then optimal α for fixed β
            let p = m[0][0] + C64::from_polar(1.0, alpha) * m[1][0];
            let q = m[0][1] + C64::from_polar(1.0, alpha) * m[1][1];
            let nb = p.arg() - q.arg();
            let r = m[0][0] + C64::from_polar(1.0, nb) * m[0][1];
            let s = m[1][0] + C64::from_polar(1.0, nb) * m[1][1];
            let na = r.arg() - s.arg();
            let done = (wrap_pi(na - alpha)).abs() < 1e-13 && (wrap_pi(nb - beta)).abs() < 1e-13;
            alpha = na;
            beta = nb;
            if done {
                break;
            }
        }
        let v = value(alpha, beta).norm();
        if v > best.0 {
            best = (v, wrap_pi(alpha), wrap_pi(beta));
        }
    }
    (best.0 * best.0 / 16.0, best.1, best.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub schema: u32,
    /// Row-major `[re, im]` entries of the final interaction-frame propagator.
    pub unitary: Vec<Vec<[f64; 2]>>,
    pub fidelity: f64,
    pub gate_error: f64,
    pub leakage: f64,
    pub leakage_worst: f64,
    /// Phase left on the qutrit-2 leakage level relative to `|00>`; reported, never scored.
    pub leakage_phase: f64,
    pub z_phases: (f64, f64),
    pub z_correction: ZCorrection,
    pub target: TargetRotation,
    pub params: SystemParams,
    pub pulse: ControlField,
    pub grid: PropagationGrid,
}

pub const SCHEMA_VERSION: u32 = 1;

impl SimResult {
    pub fn from_unitary(u: &Mat9, field: &ControlField, target: &TargetRotation, params: &SystemParams, grid: &PropagationGrid) -> Self {
        let t = target_unitary(target);
        let fidelity = gate_fidelity(u, &t);
        let unitary = (0..9).map(|i| (0..9).map(|j| [u[(i, j)].re, u[(i, j)].im]).collect()).collect();
        let leak_phase = (u[(pair_index(0, 2), pair_index(0, 2))] * u[(0, 0)].conj()).arg();
        SimResult {
            schema: SCHEMA_VERSION,
            unitary,
            fidelity,
            gate_error: 1.0 - fidelity,
            leakage: leakage_error(u),
            leakage_worst: leakage_worst(u),
            leakage_phase: leak_phase,
            z_phases: z_error_phases(params, field.detunings[0], field.tg),
            z_correction: z_correction(params, field.detunings[0], field.tg),
            target: *target,
            params: *params,
            pulse: field.clone(),
            grid: *grid,
        }
    }

    /// Propagates `field` and scores it against `target`.
    pub fn simulate(field: &ControlField, target: &TargetRotation, params: &SystemParams, grid: &PropagationGrid) -> Self {
        let u = propagate_pair(field, params, grid);
        Self::from_unitary(&u, field, target, params, grid)
    }

    pub fn unitary_matrix(&self) -> Mat9 {
        Mat9::from_fn(|i, j| C64::new(self.unitary[i][j][0], self.unitary[i][j][1]))
    }
}
