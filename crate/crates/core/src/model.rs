//! Two frequency-crowded transmon qutrits: parameters, frames, Hamiltonians and targets.
//!
//! All frequencies are angular (rad/ns) and all times are in ns. Configuration
//! files quote cyclic frequencies; [`SystemParams::from_cyclic`] does the 2π
//! conversion once at the boundary.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, pair_index, C64, Mat3, Mat9, ONE, ZERO};

/// Physical constants of the qutrit pair.
///
/// The crowding frequency is derived from `omega2 + anharmonicity = omega1 + crowding`
/// and is never stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemParams", into = "RawSystemParams")]
pub struct SystemParams {
    omega1: f64,
    omega2: f64,
    anharmonicity: f64,
    /// `lambda[k][j - 1]` is the relative coupling of qutrit `k` on its `j-1 <-> j` transition.
    lambda: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawSystemParams {
    omega1: f64,
    omega2: f64,
    anharmonicity: f64,
    lambda: [[f64; 2]; 2],
}

impl TryFrom<RawSystemParams> for SystemParams {
    type Error = Error;
    fn try_from(r: RawSystemParams) -> Result<Self> {
        SystemParams::new(r.omega1, r.omega2, r.anharmonicity, r.lambda)
    }
}

impl From<SystemParams> for RawSystemParams {
    fn from(p: SystemParams) -> Self {
        RawSystemParams {
            omega1: p.omega1,
            omega2: p.omega2,
            anharmonicity: p.anharmonicity,
            lambda: p.lambda,
        }
    }
}

/// Harmonic-oscillator matrix elements `(1, sqrt 2)` for both qutrits.
pub const HARMONIC_LAMBDA: [[f64; 2]; 2] = [[1.0, std::f64::consts::SQRT_2], [1.0, std::f64::consts::SQRT_2]];

impl SystemParams {
    pub const LEVELS: usize = 3;

    pub fn new(omega1: f64, omega2: f64, anharmonicity: f64, lambda: [[f64; 2]; 2]) -> Result<Self> {
        let p = SystemParams { omega1, omega2, anharmonicity, lambda };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from cyclic qubit frequencies in GHz and anharmonicity in MHz.
    pub fn from_cyclic(f1_ghz: f64, f2_ghz: f64, anharmonicity_mhz: f64, lambda: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(TAU * f1_ghz, TAU * f2_ghz, TAU * anharmonicity_mhz * 1e-3, lambda)
    }

    /// Reference device: 5.508 / 5.903 GHz qubits, -350 MHz anharmonicity, 45 MHz crowding.
    pub fn reference() -> Self {
        Self::from_cyclic(5.508, 5.903, -350.0, HARMONIC_LAMBDA).expect("reference parameters are valid")
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.omega1, self.omega2, self.anharmonicity]
            .iter()
            .chain(self.lambda.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.anharmonicity == 0.0 {
            return Err(Error::InvalidParams("anharmonicity must be nonzero".into()));
        }
        if self.crowding() <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "crowding frequency omega2 + Delta - omega1 = {} rad/ns must be positive",
                self.crowding()
            )));
        }
        if self.lambda.iter().flatten().any(|&l| l <= 0.0) {
            return Err(Error::InvalidParams("relative couplings lambda must be positive".into()));
        }
        Ok(())
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    /// Shared anharmonicity Δ (negative for transmons).
    pub fn anharmonicity(&self) -> f64 {
        self.anharmonicity
    }

    /// Crowding frequency δ = ω₂ + Δ − ω₁.
    pub fn crowding(&self) -> f64 {
        self.omega2 + self.anharmonicity - self.omega1
    }

    /// Relative coupling of `qutrit` (0 or 1) on transition `level-1 <-> level` (1 or 2).
    pub fn lambda(&self, qutrit: usize, level: usize) -> f64 {
        self.lambda[qutrit][level - 1]
    }

    pub fn lambdas(&self) -> [[f64; 2]; 2] {
        self.lambda
    }

    /// Same qubit 1 and anharmonicity, with qubit 2 moved so the crowding equals `crowding`.
    pub fn with_crowding(&self, crowding: f64) -> Result<Self> {
        Self::new(self.omega1, self.omega1 + crowding - self.anharmonicity, self.anharmonicity, self.lambda)
    }

    /// Replaces Δ and δ, keeping ω₁ fixed and moving ω₂ accordingly.
    pub fn with_anharmonicity_and_crowding(&self, anharmonicity: f64, crowding: f64) -> Result<Self> {
        Self::new(self.omega1, self.omega1 + crowding - anharmonicity, anharmonicity, self.lambda)
    }

    /// Applies relative deviations `ΔΔ/Δ` and `Δδ/δ`.
    pub fn with_relative_deviation(&self, anharmonicity_rel: f64, crowding_rel: f64) -> Result<Self> {
        if anharmonicity_rel == 0.0 && crowding_rel == 0.0 {
            return Ok(*self);
        }
        self.with_anharmonicity_and_crowding(
            self.anharmonicity * (1.0 + anharmonicity_rel),
            self.crowding() * (1.0 + crowding_rel),
        )
    }

    pub fn with_lambda(&self, lambda: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(self.omega1, self.omega2, self.anharmonicity, lambda)
    }
}

/// Interaction-frame transition detunings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenFrequencies {
    pub d11: f64,
    pub d21: f64,
    pub d12: f64,
    pub d22: f64,
}

impl EigenFrequencies {
    /// `[k][j - 1]` layout matching [`SystemParams::lambda`].
    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.d11, self.d21], [self.d12, self.d22]]
    }
}

pub fn eigenfrequencies(params: &SystemParams, lambda1: f64) -> EigenFrequencies {
    let delta = params.crowding();
    let anh = params.anharmonicity();
    EigenFrequencies {
        d11: -lambda1,
        d21: anh - lambda1,
        d12: delta - anh - lambda1,
        d22: delta - lambda1,
    }
}

/// Ladder couplings `b[k][j-1]` multiplying `|j><j-1|` in the interaction Hamiltonian of qutrit `k`.
#[inline]
pub fn ladder_couplings(params: &SystemParams, eig: &EigenFrequencies, chi: C64, t: f64) -> [[C64; 2]; 2] {
    let half = 0.5 * chi;
    let d = eig.as_array();
    let mut out = [[ZERO; 2]; 2];
    for k in 0..2 {
        for j in 0..2 {
            out[k][j] = half * params.lambda[k][j] * C64::from_polar(1.0, d[k][j] * t);
        }
    }
    out
}

/// Zero-diagonal Hermitian ladder matrix with `b1` at (1,0) and `b2` at (2,1).
pub fn ladder_matrix(b1: C64, b2: C64) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(1, 0)] = b1;
    h[(0, 1)] = b1.conj();
    h[(2, 1)] = b2;
    h[(1, 2)] = b2.conj();
    h
}

/// Interaction-frame Hamiltonians `(H^(1), H^(2))` for a drive value `chi` at time `t`.
///
/// The pair generator is `H^(1) ⊗ 1 + 1 ⊗ H^(2)`.
pub fn interaction_hamiltonian(params: &SystemParams, lambda1: f64, chi: C64, t: f64) -> (Mat3, Mat3) {
    let eig = eigenfrequencies(params, lambda1);
    let b = ladder_couplings(params, &eig, chi, t);
    (ladder_matrix(b[0][0], b[0][1]), ladder_matrix(b[1][0], b[1][1]))
}

/// Level energies of both qutrits in the frame rotating at the first carrier, after the RWA.
pub fn rotating_drift(params: &SystemParams, lambda1: f64) -> [[f64; 3]; 2] {
    let delta = params.crowding();
    let anh = params.anharmonicity();
    [
        [0.0, -lambda1, anh - 2.0 * lambda1],
        [0.0, delta - anh - lambda1, 2.0 * delta - anh - 2.0 * lambda1],
    ]
}

/// RWA Hamiltonian in the frame rotating at `omega_d1`, on the 9-dimensional pair space.
pub fn rotating_hamiltonian(params: &SystemParams, lambda1: f64, chi: C64, _t: f64) -> Mat9 {
    let drift = rotating_drift(params, lambda1);
    let half = 0.5 * chi;
    let lad = |k: usize| ladder_matrix(half * params.lambda[k][0], half * params.lambda[k][1]);
    let mut h = kron(&lad(0), &Mat3::identity()) + kron(&Mat3::identity(), &lad(1));
    for k1 in 0..3 {
        for k2 in 0..3 {
            let idx = pair_index(k1, k2);
            h[(idx, idx)] += C64::from(drift[0][k1] + drift[1][k2]);
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrameKind {
    /// Both qutrits rotate at `j·omega_d`.
    Rotating(f64),
    /// Lab-frame level energies `j·omega_k + Delta_j`.
    Interaction,
    /// Arbitrary per-level frequencies.
    Custom,
}

/// Diagonal frame `R(t) = ⊗_k Σ_j exp(-i ω_j^(k) t) Π_j^(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub kind: FrameKind,
    pub frequencies: [[f64; 3]; 2],
}

impl FrameSpec {
    pub fn rotating(omega_d: f64) -> Self {
        FrameSpec {
            kind: FrameKind::Rotating(omega_d),
            frequencies: [[0.0, omega_d, 2.0 * omega_d]; 2],
        }
    }

    pub fn interaction(params: &SystemParams) -> Self {
        let (w1, w2, anh) = (params.omega1(), params.omega2(), params.anharmonicity());
        FrameSpec {
            kind: FrameKind::Interaction,
            frequencies: [[0.0, w1, 2.0 * w1 + anh], [0.0, w2, 2.0 * w2 + anh]],
        }
    }

    /// Interaction frame expressed relative to the frame rotating at the first carrier.
    pub fn interaction_in_rotating(params: &SystemParams, lambda1: f64) -> Self {
        Self::custom(rotating_drift(params, lambda1))
    }

    pub fn custom(frequencies: [[f64; 3]; 2]) -> Self {
        FrameSpec { kind: FrameKind::Custom, frequencies }
    }

    /// Diagonal phases of `R(t)`, one per product-basis state.
    pub fn phases(&self, t: f64) -> [C64; 9] {
        let mut out = [ONE; 9];
        for k1 in 0..3 {
            for k2 in 0..3 {
                let w = self.frequencies[0][k1] + self.frequencies[1][k2];
                out[pair_index(k1, k2)] = C64::from_polar(1.0, -w * t);
            }
        }
        out
    }

    pub fn unitary(&self, t: f64) -> Mat9 {
        Mat9::from_diagonal(&nalgebra::SVector::<C64, 9>::from_column_slice(&self.phases(t)))
    }
}

/// Maps a propagator computed inside `frame` to the outer frame: `R(tg) U R†(0)`.
pub fn transform_frame(u: &Mat9, frame: &FrameSpec, tg: f64) -> Mat9 {
    let end = frame.phases(tg);
    let start = frame.phases(0.0);
    let mut out = *u;
    for i in 0..9 {
        for j in 0..9 {
            out[(i, j)] = end[i] * u[(i, j)] * start[j].conj();
        }
    }
    out
}

/// Inverse of [`transform_frame`]: `R†(tg) U R(0)`.
pub fn inverse_transform_frame(u: &Mat9, frame: &FrameSpec, tg: f64) -> Mat9 {
    let end = frame.phases(tg);
    let start = frame.phases(0.0);
    let mut out = *u;
    for i in 0..9 {
        for j in 0..9 {
            out[(i, j)] = end[i].conj() * u[(i, j)] * start[j];
        }
    }
    out
}

/// Complex rotation angles: the real part rotates about X, the imaginary part about Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTarget", into = "RawTarget")]
pub struct TargetRotation {
    theta1: C64,
    theta2: C64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawTarget {
    theta1: [f64; 2],
    theta2: [f64; 2],
}

impl TryFrom<RawTarget> for TargetRotation {
    type Error = Error;
    fn try_from(r: RawTarget) -> Result<Self> {
        TargetRotation::new(C64::new(r.theta1[0], r.theta1[1]), C64::new(r.theta2[0], r.theta2[1]))
    }
}

impl From<TargetRotation> for RawTarget {
    fn from(t: TargetRotation) -> Self {
        RawTarget {
            theta1: [t.theta1.re, t.theta1.im],
            theta2: [t.theta2.re, t.theta2.im],
        }
    }
}

const ANGLE_SLACK: f64 = 1e-12;

impl TargetRotation {
    pub fn new(theta1: C64, theta2: C64) -> Result<Self> {
        for th in [theta1, theta2] {
            if !(th.re.is_finite() && th.im.is_finite()) || th.norm() > TAU + ANGLE_SLACK {
                return Err(Error::AngleTooLarge(th.norm()));
            }
        }
        Ok(TargetRotation { theta1, theta2 })
    }

    pub fn identity() -> Self {
        TargetRotation { theta1: ZERO, theta2: ZERO }
    }

    pub fn theta1(&self) -> C64 {
        self.theta1
    }

    pub fn theta2(&self) -> C64 {
        self.theta2
    }

    pub fn theta(&self, qubit: usize) -> C64 {
        if qubit == 0 {
            self.theta1
        } else {
            self.theta2
        }
    }

    /// Parses a pair of single-qubit gate names such as `("X", "Y/2")`.
    pub fn from_names(q1: &str, q2: &str) -> Result<Self> {
        Self::new(named_angle(q1)?, named_angle(q2)?)
    }

    pub fn swapped(&self) -> Self {
        TargetRotation { theta1: self.theta2, theta2: self.theta1 }
    }
}

/// Rotation angle of a named gate: `I`, `X`, `Y`, `X/2`, `Y/2`, optionally prefixed by `-`.
pub fn named_angle(name: &str) -> Result<C64> {
    let trimmed = name.trim();
    let (sign, body) = match trimmed.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, trimmed),
    };
    let angle = match body.to_ascii_uppercase().as_str() {
        "I" | "ID" | "IDLE" => ZERO,
        "X" | "X180" => C64::new(PI, 0.0),
        "Y" | "Y180" => C64::new(0.0, PI),
        "X/2" | "X90" => C64::new(PI / 2.0, 0.0),
        "Y/2" | "Y90" => C64::new(0.0, PI / 2.0),
        _ => return Err(Error::Config(format!("unknown gate name `{name}`"))),
    };
    Ok(sign * angle)
}

/// Single-qutrit target `exp(-i/2 (Re θ σx + Im θ σy))` on levels {0, 1}; level 2 untouched.
pub fn target_qutrit(theta: C64) -> Mat3 {
    let mag = theta.norm();
    let c = C64::from((0.5 * mag).cos());
    // -i sin(|θ|/2)/|θ|, with the |θ| -> 0 limit 1/2.
    let s = if mag < 1e-300 { 0.5 } else { (0.5 * mag).sin() / mag };
    let ms = C64::new(0.0, -s);
    let mut m = Mat3::zeros();
    m[(0, 0)] = c;
    m[(1, 1)] = c;
    m[(0, 1)] = ms * theta.conj();
    m[(1, 0)] = ms * theta;
    m[(2, 2)] = ONE;
    m
}

pub fn target_unitary(target: &TargetRotation) -> Mat9 {
    kron(&target_qutrit(target.theta1), &target_qutrit(target.theta2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_deviation, unitarity_defect};

    #[test]
    fn crowding_is_derived() {
        let p = SystemParams::reference();
        assert!((p.crowding() - TAU * 0.045).abs() < 1e-12);
        assert!(SystemParams::from_cyclic(5.508, 5.8, -350.0, HARMONIC_LAMBDA).is_err());
        assert!(SystemParams::new(1.0, 2.0, 0.0, HARMONIC_LAMBDA).is_err());
        assert!(SystemParams::reference().with_lambda([[1.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn reference_eigenfrequencies() {
        let e = eigenfrequencies(&SystemParams::reference(), 0.0);
        let expect = [0.0, -0.350, 0.395, 0.045].map(|f| TAU * f);
        for (got, want) in [e.d11, e.d21, e.d12, e.d22].iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn eigenfrequency_shift_and_resonance() {
        let p = SystemParams::reference();
        let e = eigenfrequencies(&p, p.crowding());
        assert_eq!(e.d22, 0.0);
        let shift = TAU * 0.001;
        let a = eigenfrequencies(&p, 0.0).as_array();
        let b = eigenfrequencies(&p, shift).as_array();
        for k in 0..2 {
            for j in 0..2 {
                assert!((b[k][j] - a[k][j] + shift).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interaction_hamiltonian_at_origin() {
        let p = SystemParams::reference();
        let (h1, h2) = interaction_hamiltonian(&p, 0.3, C64::new(0.1, 0.0), 0.0);
        assert!((h1[(1, 0)] - C64::new(0.05, 0.0)).norm() < 1e-15);
        assert!((h1[(2, 1)] - C64::new(0.05 * 2f64.sqrt(), 0.0)).norm() < 1e-15);
        for h in [h1, h2] {
            assert_eq!(hermitian_deviation(&h), 0.0);
            for k in 0..3 {
                assert_eq!(h[(k, k)], ZERO);
            }
        }
        let (z1, z2) = interaction_hamiltonian(&p, 0.3, ZERO, 7.0);
        assert_eq!(z1, Mat3::zeros());
        assert_eq!(z2, Mat3::zeros());
    }

    #[test]
    fn rotating_hamiltonian_drift_diagonal() {
        let p = SystemParams::reference();
        let h = rotating_hamiltonian(&p, 0.0, ZERO, 0.0);
        let q1 = [0.0, 0.0, -0.35];
        let q2 = [0.0, 0.395, 0.44];
        for k1 in 0..3 {
            for k2 in 0..3 {
                let want = TAU * (q1[k1] + q2[k2]);
                assert!((h[(pair_index(k1, k2), pair_index(k1, k2))].re - want).abs() < 1e-12);
            }
        }
        let mut off = h;
        for k in 0..9 {
            off[(k, k)] = ZERO;
        }
        assert_eq!(off, Mat9::zeros());
    }

    #[test]
    fn target_identity_and_x() {
        assert!((target_unitary(&TargetRotation::identity()) - Mat9::identity()).norm() < 1e-15);
        let t = TargetRotation::new(C64::new(PI, 0.0), ZERO).unwrap();
        let u = target_unitary(&t);
        // (-iX) ⊗ 1 on the computational block
        for k2 in 0..2 {
            assert!((u[(pair_index(1, k2), pair_index(0, k2))] - C64::new(0.0, -1.0)).norm() < 1e-15);
            assert!((u[(pair_index(0, k2), pair_index(1, k2))] - C64::new(0.0, -1.0)).norm() < 1e-15);
            assert!(u[(pair_index(0, k2), pair_index(0, k2))].norm() < 1e-15);
        }
        assert!(unitarity_defect(&u) < 1e-13);
    }

    #[test]
    fn target_rejects_oversized_angles() {
        assert!(TargetRotation::new(C64::new(TAU, 0.0), ZERO).is_ok());
        assert!(matches!(TargetRotation::new(C64::new(7.0, 0.0), ZERO), Err(Error::AngleTooLarge(_))));
        assert!(TargetRotation::new(ZERO, C64::new(5.0, 5.0)).is_err());
    }

    #[test]
    fn named_gates() {
        let t = TargetRotation::from_names("X", "-Y/2").unwrap();
        assert_eq!(t.theta1(), C64::new(PI, 0.0));
        assert_eq!(t.theta2(), C64::new(0.0, -PI / 2.0));
        assert!(TargetRotation::from_names("Q", "I").is_err());
    }

    #[test]
    fn frame_round_trip() {
        let p = SystemParams::reference();
        let frame = FrameSpec::interaction(&p);
        let u = target_unitary(&TargetRotation::from_names("X/2", "Y").unwrap());
        let back = inverse_transform_frame(&transform_frame(&u, &frame, 20.0), &frame, 20.0);
        assert!((back - u).norm() < 1e-12);
        assert_eq!(transform_frame(&u, &frame, 0.0), u);
        let r = transform_frame(&Mat9::identity(), &frame, 20.0);
        assert!(unitarity_defect(&r) < 1e-12);
        for k1 in 0..3 {
            for k2 in 0..3 {
                let w = frame.frequencies[0][k1] + frame.frequencies[1][k2];
                let idx = pair_index(k1, k2);
                assert!((r[(idx, idx)] - C64::from_polar(1.0, -w * 20.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn params_serde_validates() {
        let p = SystemParams::reference();
        let s = serde_json::to_string(&p).unwrap();
        let back: SystemParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"omega1":1.0,"omega2":1.0,"anharmonicity":-0.5,"lambda":[[1,1],[1,1]]}"#;
        assert!(serde_json::from_str::<SystemParams>(bad).is_err());
    }
}
