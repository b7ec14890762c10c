//! Pulse ansatzes, the combined drive χ(t), finite Fourier transforms and the
//! lowest-order Magnus amplitude and leakage conditions.
//!
//! A control `j` is written `a_j · Ω̃_j(t)` with a complex amplitude `a_j` and a
//! rescaled envelope `Ω̃_j = ε̃_xj + i ε̃_yj`. The two controls ride on carriers
//! detuned by `Λ_j` from their qubits, and in the frame of the first carrier
//! they combine into `χ(t) = a₁Ω̃₁(t) + a₂ e^{iγt} Ω̃₂(t)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::model::{SystemParams, TargetRotation};
use crate::quadrature;

/// Relative threshold below which a finite Fourier integral counts as vanishing.
pub const DEGENERATE_AREA: f64 = 1e-9;

#[inline]
fn window_integral(w: f64, tg: f64) -> C64 {
    // ∫₀^tg e^{iwt} dt = tg · e^{iw tg/2} · sinc(w tg/2)
    let x = 0.5 * w * tg;
    let sinc = if x.abs() < 1e-6 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    C64::from_polar(tg * sinc, x)
}

/// `∫₀^tg f(t) e^{iρt} dt` by adaptive quadrature.
pub fn finite_fourier<F: Fn(f64) -> C64>(f: F, rho: f64, tg: f64) -> C64 {
    quadrature::integrate(|t| f(t) * C64::from_polar(1.0, rho * t), 0.0, tg, 1e-12 * tg)
}

/// Superposition of Hanning windows `Σ c_n (1 − cos(2πnt/tg))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanningShape {
    pub coeffs: Vec<C64>,
    pub tg: f64,
}

impl HanningShape {
    pub fn new(coeffs: Vec<C64>, tg: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParams("Hanning shape needs at least one window".into()));
        }
        if !(tg > 0.0 && tg.is_finite()) {
            return Err(Error::InvalidParams(format!("gate time {tg} ns must be positive")));
        }
        Ok(HanningShape { coeffs, tg })
    }

    /// Single first-order window, `1 − cos(2πt/tg)`.
    pub fn single(tg: f64) -> Self {
        HanningShape { coeffs: vec![C64::new(1.0, 0.0)], tg }
    }

    #[inline]
    pub fn value(&self, t: f64) -> C64 {
        // cos(n x) by the Chebyshev recurrence, one trig call per sample.
        let c1 = (TAU * t / self.tg).cos();
        let (mut prev, mut cur) = (1.0, c1);
        let mut acc = ZERO;
        for c in &self.coeffs {
            acc += c * (1.0 - cur);
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        acc
    }

    pub fn derivative(&self, t: f64) -> C64 {
        let base = TAU / self.tg;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = base * (i + 1) as f64;
                c * k * (k * t).sin()
            })
            .sum()
    }

    /// Closed-form finite Fourier transform.
    pub fn fourier(&self, rho: f64) -> C64 {
        let base = TAU / self.tg;
        let plain = window_integral(rho, self.tg);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = base * (i + 1) as f64;
                let cos_part = 0.5 * (window_integral(rho + k, self.tg) + window_integral(rho - k, self.tg));
                c * (plain - cos_part)
            })
            .sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        HanningShape { coeffs: self.coeffs.iter().map(|c| c * s).collect(), tg: self.tg }
    }
}

/// Checked Hanning envelope evaluation on `[0, tg]`.
pub fn hanning_envelope(shape: &HanningShape, t: f64) -> Result<C64> {
    if !(0.0..=shape.tg).contains(&t) {
        return Err(Error::OutOfWindow { t, tg: shape.tg });
    }
    Ok(shape.value(t))
}

/// Sideband-modulated Gaussian with DRAG on the second quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WahWahShape {
    /// Peak scale `A_π` (rad/ns).
    pub amplitude: f64,
    /// Sideband frequency ω_x (rad/ns).
    pub omega_x: f64,
    pub tg: f64,
}

impl WahWahShape {
    pub fn sigma(&self) -> f64 {
        self.tg / 6.0
    }

    /// Unit-amplitude in-phase shape and its analytic time derivative.
    fn unit(&self, t: f64) -> (f64, f64) {
        let s = self.sigma();
        let u = t - 0.5 * self.tg;
        let g = (-u * u / (2.0 * s * s)).exp();
        let (sin, cos) = (self.omega_x * u).sin_cos();
        let x = g * (1.0 - cos);
        let dx = g * (-u / (s * s) * (1.0 - cos) + self.omega_x * sin);
        (x, dx)
    }
}

/// `(ε_x, ε_y)` of a WahWah pulse, with `ε_y = −ε̇_x / (2Δ)`.
pub fn wahwah_quadratures(shape: &WahWahShape, anharmonicity: f64, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=shape.tg).contains(&t) {
        return Err(Error::OutOfWindow { t, tg: shape.tg });
    }
    let (x, dx) = shape.unit(t);
    Ok((shape.amplitude * x, -shape.amplitude * dx / (2.0 * anharmonicity)))
}

/// Optimal normalized sideband frequency `ω_x/δ` for normalized gate time `tg·δ/2π`.
pub fn wahwah_sideband_model(tg_bar: f64) -> Result<f64> {
    if !(tg_bar > 0.75) {
        return Err(Error::BelowSpeedLimit(tg_bar));
    }
    if tg_bar <= 1.25 {
        Ok(2.3 * erf(2.13 * (tg_bar - 0.75).sqrt()))
    } else {
        Ok(2.3 * erf(2.13 / 2f64.sqrt()) + 0.41 * (tg_bar - 1.25))
    }
}

/// The linear branch of [`wahwah_sideband_model`] extended over all gate times.
pub fn wahwah_linear_model(tg_bar: f64) -> f64 {
    2.3 * erf(2.13 / 2f64.sqrt()) + 0.41 * (tg_bar - 1.25)
}

/// Gaussian with σ = tg/6, shifted down so it starts and ends at zero.
#[inline]
fn shifted_gaussian(t: f64, tg: f64, sigma: f64) -> (f64, f64) {
    let u = t - 0.5 * tg;
    let g = (-u * u / (2.0 * sigma * sigma)).exp();
    let edge = (-(0.5 * tg).powi(2) / (2.0 * sigma * sigma)).exp();
    (g - edge, -u / (sigma * sigma) * g)
}

/// Rescaled envelope Ω̃_j of one control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Hanning(HanningShape),
    /// Shifted Gaussian.
    Gaussian { tg: f64, sigma: f64 },
    /// Shifted Gaussian with quadrature `i·beta·ġ`.
    GaussianDrag { tg: f64, sigma: f64, beta: f64 },
    /// Unit-amplitude WahWah shape; the second quadrature is `−ṡ/(2Δ)`.
    WahWah { tg: f64, omega_x: f64, anharmonicity: f64 },
    Off { tg: f64 },
}

impl Envelope {
    pub fn gaussian(tg: f64) -> Self {
        Envelope::Gaussian { tg, sigma: tg / 6.0 }
    }

    pub fn gaussian_drag(tg: f64, beta: f64) -> Self {
        Envelope::GaussianDrag { tg, sigma: tg / 6.0, beta }
    }

    pub fn tg(&self) -> f64 {
        match self {
            Envelope::Hanning(h) => h.tg,
            Envelope::Gaussian { tg, .. }
            | Envelope::GaussianDrag { tg, .. }
            | Envelope::WahWah { tg, .. }
            | Envelope::Off { tg } => *tg,
        }
    }

    #[inline]
    pub fn value(&self, t: f64) -> C64 {
        match self {
            Envelope::Hanning(h) => h.value(t),
            Envelope::Gaussian { tg, sigma } => C64::from(shifted_gaussian(t, *tg, *sigma).0),
            Envelope::GaussianDrag { tg, sigma, beta } => {
                let (g, dg) = shifted_gaussian(t, *tg, *sigma);
                C64::new(g, beta * dg)
            }
            Envelope::WahWah { tg, omega_x, anharmonicity } => {
                let (x, dx) = WahWahShape { amplitude: 1.0, omega_x: *omega_x, tg: *tg }.unit(t);
                C64::new(x, -dx / (2.0 * anharmonicity))
            }
            Envelope::Off { .. } => ZERO,
        }
    }

    /// Finite Fourier transform; closed form for Hanning windows, quadrature otherwise.
    pub fn fourier(&self, rho: f64) -> C64 {
        match self {
            Envelope::Hanning(h) => h.fourier(rho),
            Envelope::Off { .. } => ZERO,
            other => finite_fourier(|t| other.value(t), rho, other.tg()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// Each control carries its own rotation area; crosstalk on the other working transition is neglected.
    #[default]
    Approximate,
    /// Coupled solution of both working-transition conditions.
    Exact,
}

/// The four realized quadratures and their carrier bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlField {
    pub envelopes: [Envelope; 2],
    pub amplitudes: [C64; 2],
    /// Carrier detunings `Λ₁, Λ₂` (rad/ns).
    pub detunings: [f64; 2],
    pub tg: f64,
}

impl ControlField {
    /// Solves the amplitudes for `target` and assembles the field.
    pub fn solve(
        envelopes: [Envelope; 2],
        target: &TargetRotation,
        params: &SystemParams,
        detunings: [f64; 2],
        mode: AmplitudeMode,
    ) -> Result<Self> {
        let tg = envelopes[0].tg();
        let amplitudes = match mode {
            AmplitudeMode::Approximate => [
                solve_amplitude_approx(&envelopes[0], target.theta1(), params.lambda(0, 1), detunings[0], tg)?,
                solve_amplitude_approx(&envelopes[1], target.theta2(), params.lambda(1, 1), detunings[1], tg)?,
            ],
            AmplitudeMode::Exact => solve_amplitudes_exact(&envelopes, target, params, detunings)?,
        };
        Ok(ControlField { envelopes, amplitudes, detunings, tg })
    }

    /// Carrier detuning γ = ω_d1 − ω_d2 = Δ − δ + Λ₁ − Λ₂.
    pub fn gamma(&self, params: &SystemParams) -> f64 {
        params.anharmonicity() - params.crowding() + self.detunings[0] - self.detunings[1]
    }

    /// Carrier frequencies `(ω₁ + Λ₁, ω₂ + Λ₂)`.
    pub fn carriers(&self, params: &SystemParams) -> [f64; 2] {
        [params.omega1() + self.detunings[0], params.omega2() + self.detunings[1]]
    }

    /// Envelope-to-carrier phases; irrelevant after the RWA and always zero.
    pub fn carrier_phases(&self) -> [f64; 2] {
        [0.0, 0.0]
    }

    /// `a_j Ω̃_j(t)` for control `j`.
    #[inline]
    pub fn control(&self, j: usize, t: f64) -> C64 {
        if self.amplitudes[j] == ZERO {
            return ZERO;
        }
        self.amplitudes[j] * self.envelopes[j].value(t)
    }

    #[inline]
    pub fn chi(&self, params: &SystemParams, t: f64) -> C64 {
        self.control(0, t) + C64::from_polar(1.0, self.gamma(params) * t) * self.control(1, t)
    }

    /// Finite Fourier transform of χ itself.
    pub fn chi_fourier(&self, params: &SystemParams, rho: f64) -> C64 {
        let gamma = self.gamma(params);
        let mut s = ZERO;
        if self.amplitudes[0] != ZERO {
            s += self.amplitudes[0] * self.envelopes[0].fourier(rho);
        }
        if self.amplitudes[1] != ZERO {
            s += self.amplitudes[1] * self.envelopes[1].fourier(rho + gamma);
        }
        s
    }

    /// `(ε_x1, ε_y1, ε_x2, ε_y2)` at time `t`.
    pub fn quadratures(&self, t: f64) -> [f64; 4] {
        realize_quadratures(self, t)
    }

    pub fn with_amplitude_scales(&self, scales: [f64; 2]) -> Self {
        let mut out = self.clone();
        out.amplitudes[0] *= scales[0];
        out.amplitudes[1] *= scales[1];
        out
    }
}

/// `χ(t) = a₁Ω̃₁(t) + a₂ e^{iγt} Ω̃₂(t)`.
pub fn chi(field: &ControlField, params: &SystemParams, t: f64) -> C64 {
    field.chi(params, t)
}

pub fn realize_quadratures(field: &ControlField, t: f64) -> [f64; 4] {
    let o1 = field.control(0, t);
    let o2 = field.control(1, t);
    [o1.re, o1.im, o2.re, o2.im]
}

/// Single-control area condition `a = (θ/λ₁) / S(Ω̃, −Λ)`.
pub fn solve_amplitude_approx(envelope: &Envelope, theta: C64, lambda1: f64, detuning: f64, tg: f64) -> Result<C64> {
    if theta == ZERO {
        return Ok(ZERO);
    }
    let s = envelope.fourier(-detuning);
    let threshold = DEGENERATE_AREA * tg;
    if s.norm() < threshold {
        return Err(Error::DegenerateShape { value: s.norm(), threshold });
    }
    Ok(theta / lambda1 / s)
}

/// Coupled solution of both working-transition area conditions.
pub fn solve_amplitudes_exact(
    envelopes: &[Envelope; 2],
    target: &TargetRotation,
    params: &SystemParams,
    detunings: [f64; 2],
) -> Result<[C64; 2]> {
    let (l1, l2) = detunings.into();
    let delta = params.crowding();
    let anh = params.anharmonicity();
    let tg = envelopes[0].tg();
    let threshold = DEGENERATE_AREA * tg;

    // λ₁⁽¹⁾ [a₁ A + a₂ B] = θ₁,  λ₁⁽²⁾ [a₁ C + a₂ D] = θ₂
    let a = envelopes[0].fourier(-l1);
    let b = envelopes[1].fourier(anh - delta - l2);
    let c = envelopes[0].fourier(delta - anh - l1);
    let d = envelopes[1].fourier(-l2);
    let r1 = target.theta1() / params.lambda(0, 1);
    let r2 = target.theta2() / params.lambda(1, 1);

    if a.norm() < threshold {
        return Err(Error::DegenerateShape { value: a.norm(), threshold });
    }
    let schur = d - b * c / a;
    if schur.norm() < threshold {
        return Err(Error::DegenerateShape { value: schur.norm(), threshold });
    }
    let a2 = (r2 - r1 * c / a) / schur;
    let a1 = (r1 - a2 * b) / a;
    Ok([a1, a2])
}

/// Residuals of the four lowest-order Magnus conditions (two working, two leakage transitions).
pub fn magnus_condition_residuals(field: &ControlField, target: &TargetRotation, params: &SystemParams) -> [C64; 4] {
    let l1 = field.detunings[0];
    let delta = params.crowding();
    let anh = params.anharmonicity();
    [
        params.lambda(0, 1) * field.chi_fourier(params, -l1) - target.theta1(),
        params.lambda(0, 2) * field.chi_fourier(params, anh - l1),
        params.lambda(1, 1) * field.chi_fourier(params, delta - anh - l1) - target.theta2(),
        params.lambda(1, 2) * field.chi_fourier(params, delta - l1),
    ]
}

/// Decision vector of the Hanning synthesis: window coefficients per control,
/// carrier detunings and gate time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseAnsatz {
    pub coeffs: [Vec<C64>; 2],
    pub detunings: [f64; 2],
    pub tg: f64,
}

impl PulseAnsatz {
    /// Both controls a single resonant first-order window.
    pub fn resonant_single_window(tg: f64, windows: usize) -> Self {
        let mut c = vec![ZERO; windows.max(1)];
        c[0] = C64::new(1.0, 0.0);
        PulseAnsatz { coeffs: [c.clone(), c], detunings: [0.0, 0.0], tg }
    }

    pub fn shapes(&self) -> Result<[Envelope; 2]> {
        Ok([
            Envelope::Hanning(HanningShape::new(self.coeffs[0].clone(), self.tg)?),
            Envelope::Hanning(HanningShape::new(self.coeffs[1].clone(), self.tg)?),
        ])
    }

    pub fn field(&self, target: &TargetRotation, params: &SystemParams, mode: AmplitudeMode) -> Result<ControlField> {
        ControlField::solve(self.shapes()?, target, params, self.detunings, mode)
    }
}

/// Resonant shifted-Gaussian control per qubit, normalized by the area condition.
pub fn gaussian_baseline(tg: f64, target: &TargetRotation, params: &SystemParams, detunings: [f64; 2]) -> Result<ControlField> {
    if !(tg > 0.0) {
        return Err(Error::InvalidParams(format!("gate time {tg} ns must be positive")));
    }
    ControlField::solve(
        [Envelope::gaussian(tg), Envelope::gaussian(tg)],
        target,
        params,
        detunings,
        AmplitudeMode::Approximate,
    )
}

/// Gaussian controls with a derivative quadrature `β·ġ` sharing one coefficient β (ns).
pub fn derivative_baseline(
    tg: f64,
    target: &TargetRotation,
    params: &SystemParams,
    detunings: [f64; 2],
    beta: f64,
) -> Result<ControlField> {
    if !(tg > 0.0) {
        return Err(Error::InvalidParams(format!("gate time {tg} ns must be positive")));
    }
    ControlField::solve(
        [Envelope::gaussian_drag(tg, beta), Envelope::gaussian_drag(tg, beta)],
        target,
        params,
        detunings,
        AmplitudeMode::Approximate,
    )
}

/// Single resonant WahWah control on qubit 1 with sideband `omega_x`, amplitude
/// from the rotation-area condition for `theta`.
pub fn wahwah_field(tg: f64, omega_x: f64, theta: C64, params: &SystemParams) -> Result<ControlField> {
    let envelope = Envelope::WahWah { tg, omega_x, anharmonicity: params.anharmonicity() };
    let a = solve_amplitude_approx(&envelope, theta, params.lambda(0, 1), 0.0, tg)?;
    Ok(ControlField {
        envelopes: [envelope, Envelope::Off { tg }],
        amplitudes: [a, ZERO],
        detunings: [0.0, 0.0],
        tg,
    })
}

/// Writes `t_ns,ex1,ey1,ex2,ey2` samples every `dt` ns, including both endpoints.
pub fn write_waveform_csv<W: Write>(field: &ControlField, dt: f64, mut out: W) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("sample spacing {dt} ns must be positive")));
    }
    writeln!(out, "t_ns,ex1,ey1,ex2,ey2")?;
    let n = (field.tg / dt).round() as usize;
    for k in 0..=n {
        let t = (k as f64 * dt).min(field.tg);
        let q = field.quadratures(t);
        writeln!(out, "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}", t, q[0], q[1], q[2], q[3])?;
    }
    Ok(())
}

/// Rotation area of a π pulse divided by the coupling; convenience for tests and studies.
pub fn pi_area(lambda1: f64) -> f64 {
    PI / lambda1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hanning_values() {
        let tg = 20.0;
        let h = HanningShape::new(vec![c(1.0, 0.0), ZERO, ZERO], tg).unwrap();
        assert!((hanning_envelope(&h, tg / 2.0).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        let h2 = HanningShape::new(vec![ZERO, c(1.0, 0.0), ZERO], tg).unwrap();
        assert!((hanning_envelope(&h2, tg / 4.0).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        let any = HanningShape::new(vec![c(0.3, -2.0), c(1.1, 0.4), c(-0.7, 0.2)], tg).unwrap();
        assert_eq!(hanning_envelope(&any, 0.0).unwrap(), ZERO);
        assert!(hanning_envelope(&any, tg).unwrap().norm() < 1e-14);
        assert!(matches!(hanning_envelope(&any, tg + 0.1), Err(Error::OutOfWindow { .. })));
        assert!(hanning_envelope(&any, -0.1).is_err());
        assert!(HanningShape::new(vec![], tg).is_err());
    }

    #[test]
    fn hanning_fourier_closed_forms() {
        let tg = 25.0;
        let w1 = HanningShape::single(tg);
        assert!((w1.fourier(0.0) - c(tg, 0.0)).norm() < 1e-12);
        for n in 1..=5usize {
            let mut coeffs = vec![ZERO; n];
            coeffs[n - 1] = c(1.0, 0.0);
            let h = HanningShape::new(coeffs, tg).unwrap();
            let k = TAU * n as f64 / tg;
            assert!((h.fourier(k) - c(-tg / 2.0, 0.0)).norm() < 1e-12);
            assert!((h.fourier(-k) - c(-tg / 2.0, 0.0)).norm() < 1e-12);
            for m in [1i32, 2, 3, 4, 7, -3] {
                if m.unsigned_abs() as usize == n {
                    continue;
                }
                let rho = TAU * m as f64 / tg;
                assert!(h.fourier(rho).norm() < 1e-12, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn approx_amplitude_for_single_window() {
        let tg = 25.0;
        let env = Envelope::Hanning(HanningShape::single(tg));
        let a = solve_amplitude_approx(&env, c(PI, 0.0), 1.0, 0.0, tg).unwrap();
        assert!((a - c(PI / 25.0, 0.0)).norm() < 1e-14);
        assert_eq!(solve_amplitude_approx(&env, ZERO, 1.0, 0.0, tg).unwrap(), ZERO);
        let a2 = solve_amplitude_approx(&env, c(2.0 * PI, 0.0), 1.0, 0.0, tg).unwrap();
        assert!((a2 - 2.0 * a).norm() < 1e-15);
        // A single window has no spectral weight at its second harmonic.
        let dark = solve_amplitude_approx(&env, c(PI, 0.0), 1.0, -2.0 * TAU / tg, tg);
        assert!(matches!(dark, Err(Error::DegenerateShape { .. })));
    }

    #[test]
    fn chi_and_gamma() {
        let p = SystemParams::reference();
        let tg = 20.0;
        let t = TargetRotation::from_names("X", "I").unwrap();
        let f = PulseAnsatz::resonant_single_window(tg, 3).field(&t, &p, AmplitudeMode::Approximate).unwrap();
        assert_eq!(f.amplitudes[1], ZERO);
        assert!((f.gamma(&p) + TAU * 0.395).abs() < 1e-12);
        assert_eq!(f.chi(&p, 0.0), ZERO);
        let tm = 7.3;
        assert!((f.chi(&p, tm) - f.amplitudes[0] * f.envelopes[0].value(tm)).norm() < 1e-15);
    }

    #[test]
    fn quadratures_of_imaginary_amplitude() {
        let tg = 20.0;
        let env = Envelope::Hanning(HanningShape::single(tg));
        let f = ControlField {
            envelopes: [env.clone(), env],
            amplitudes: [c(0.0, 0.2), c(0.3, 0.0)],
            detunings: [0.0, 0.0],
            tg,
        };
        let q = f.quadratures(5.0);
        assert!(q[0].abs() < 1e-16);
        assert!((q[1] - 0.2 * (1.0 - (TAU * 5.0 / tg).cos())).abs() < 1e-15);
        assert_eq!(q[3], 0.0);
        for t in [0.0, tg] {
            assert!(f.quadratures(t).iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn wahwah_symmetry_and_center() {
        let shape = WahWahShape { amplitude: 0.3, omega_x: 0.4, tg: 24.0 };
        let anh = -TAU * 0.35;
        let (x, y) = wahwah_quadratures(&shape, anh, 12.0).unwrap();
        assert_eq!(x, 0.0);
        assert!(y.abs() < 1e-16);
        for t in [1.0, 3.3, 7.9] {
            let (a, da) = wahwah_quadratures(&shape, anh, 12.0 - t).unwrap();
            let (b, db) = wahwah_quadratures(&shape, anh, 12.0 + t).unwrap();
            assert!((a - b).abs() < 1e-15);
            assert!((da + db).abs() < 1e-15);
        }
        let flat = WahWahShape { omega_x: 0.0, ..shape };
        assert_eq!(wahwah_quadratures(&flat, anh, 5.0).unwrap(), (0.0, 0.0));
        assert!(wahwah_quadratures(&shape, anh, 25.0).is_err());
    }

    #[test]
    fn wahwah_derivative_matches_finite_differences() {
        let shape = WahWahShape { amplitude: 0.25, omega_x: 0.31, tg: 22.0 };
        let anh = -TAU * 0.35;
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        let mut t = h;
        while t < shape.tg - h {
            let (xp, _) = wahwah_quadratures(&shape, anh, t + h).unwrap();
            let (xm, _) = wahwah_quadratures(&shape, anh, t - h).unwrap();
            let (_, y) = wahwah_quadratures(&shape, anh, t).unwrap();
            let fd = -(xp - xm) / (2.0 * h) / (2.0 * anh);
            worst = worst.max((fd - y).abs());
            peak = peak.max(y.abs());
            t += 0.05;
        }
        assert!(worst < 1e-6 * peak, "worst {worst} peak {peak}");
    }

    #[test]
    fn sideband_model_branches() {
        assert!(wahwah_sideband_model(0.75 + 1e-14).unwrap() < 1e-5);
        let knee = wahwah_sideband_model(1.25).unwrap();
        assert!((knee - 2.224).abs() < 5e-4, "{knee}");
        assert!((knee - wahwah_linear_model(1.25)).abs() < 1e-15);
        assert!(matches!(wahwah_sideband_model(0.75), Err(Error::BelowSpeedLimit(_))));
        assert!(wahwah_sideband_model(0.5).is_err());
        assert!((wahwah_sideband_model(2.25).unwrap() - (knee + 0.41)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_baseline_boundaries() {
        let p = SystemParams::reference();
        let t = TargetRotation::from_names("X", "X").unwrap();
        let f = gaussian_baseline(20.0, &t, &p, [0.0, 0.0]).unwrap();
        for tt in [0.0, 20.0] {
            assert!(f.quadratures(tt).iter().all(|v| v.abs() < 1e-15));
        }
        let d = derivative_baseline(20.0, &t, &p, [0.0, 0.0], 0.7).unwrap();
        let area = finite_fourier(|s| C64::from(d.quadratures(s)[1]), 0.0, 20.0);
        assert!(area.norm() < 1e-12);
        assert!(gaussian_baseline(0.0, &t, &p, [0.0, 0.0]).is_err());
    }

    #[test]
    fn waveform_csv_layout() {
        let p = SystemParams::reference();
        let t = TargetRotation::from_names("X", "Y").unwrap();
        let f = PulseAnsatz::resonant_single_window(10.0, 3).field(&t, &p, AmplitudeMode::Approximate).unwrap();
        let mut buf = Vec::new();
        write_waveform_csv(&f, 0.1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_ns,ex1,ey1,ex2,ey2");
        assert_eq!(lines.len(), 102);
        assert_eq!(lines[1], "0.00000000000e0,0.00000000000e0,0.00000000000e0,0.00000000000e0,0.00000000000e0");
    }
}
