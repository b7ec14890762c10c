//! Gaussian transfer-function model of the waveform hardware and amplitude retuning against it.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::{kron, PhaseRamp, C64, ONE, ZERO};
use crate::metrics::gate_fidelity;
use crate::model::{target_unitary, SystemParams, TargetRotation};
use crate::optimizer::{nelder_mead, NmOptions};
use crate::propagator::{chi_samples, propagate_qutrits_from_chi, PropagationGrid};
use crate::pulses::ControlField;

/// Response `F(ω) = exp(−ω²/ω₀²)` applied without causality constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    /// Response width (rad/ns).
    pub omega0: f64,
    /// Zero padding on each side (ns).
    pub pad_length: f64,
}

impl FilterSpec {
    /// Width `omega0` with the default padding `5/ω₀`.
    pub fn new(omega0: f64) -> Result<Self> {
        let spec = FilterSpec { omega0, pad_length: 5.0 / omega0 };
        spec.validate()?;
        Ok(spec)
    }

    /// ω₀/2π = 425.4 MHz.
    pub fn awg() -> Self {
        FilterSpec { omega0: TAU * 0.4254, pad_length: 5.0 / (TAU * 0.4254) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidParams(format!("filter width {} must be positive", self.omega0)));
        }
        if !(self.pad_length >= 0.0 && self.pad_length.is_finite()) {
            return Err(Error::InvalidParams(format!("padding {} ns", self.pad_length)));
        }
        Ok(())
    }

    pub fn response(&self, omega: f64) -> f64 {
        (-(omega / self.omega0).powi(2)).exp()
    }
}

/// Filters uniformly spaced complex samples; the output has the input's length.
pub fn apply_filter_complex(samples: &[C64], dt: f64, spec: &FilterSpec) -> Vec<C64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let pad = (spec.pad_length / dt).ceil() as usize;
    let n = samples.len() + 2 * pad;
    let mut buf = vec![ZERO; n];
    buf[pad..pad + samples.len()].copy_from_slice(samples);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let dw = TAU / (n as f64 * dt);
    for (k, z) in buf.iter_mut().enumerate() {
        let j = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *z *= spec.response(j * dw) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf[pad..pad + samples.len()].to_vec()
}

/// Filters a real waveform sampled every `dt` ns.
pub fn apply_filter(samples: &[f64], dt: f64, spec: &FilterSpec) -> Vec<f64> {
    let z: Vec<C64> = samples.iter().map(|&v| C64::from(v)).collect();
    apply_filter_complex(&z, dt, spec).into_iter().map(|v| v.re).collect()
}

/// Filtered controls `a_j Ω̃_j` at the nodes of a propagation grid.
///
/// The nodes at a fixed offset inside the steps form a uniform sequence, which is filtered on its own.
#[derive(Debug, Clone)]
pub struct FilteredControls {
    grid: PropagationGrid,
    gamma: f64,
    controls: [Vec<C64>; 2],
}

impl FilteredControls {
    pub fn new(field: &ControlField, params: &SystemParams, grid: &PropagationGrid, spec: &FilterSpec) -> Self {
        let h = grid.dt();
        let nodes = grid.method.nodes();
        let per = nodes.len();
        let mut controls = [vec![ZERO; grid.steps * per], vec![ZERO; grid.steps * per]];
        for (j, out) in controls.iter_mut().enumerate() {
            for (i, c) in nodes.iter().enumerate() {
                let raw: Vec<C64> = (0..grid.steps).map(|m| field.control(j, (m as f64 + c) * h)).collect();
                for (m, v) in apply_filter_complex(&raw, h, spec).into_iter().enumerate() {
                    out[m * per + i] = v;
                }
            }
        }
        FilteredControls { grid: *grid, gamma: field.gamma(params), controls }
    }

    /// χ at the grid nodes with the control amplitudes scaled by `scales`.
    pub fn chi(&self, scales: [f64; 2]) -> Vec<C64> {
        let h = self.grid.dt();
        let nodes = self.grid.method.nodes();
        let per = nodes.len();
        let mut ramps: Vec<PhaseRamp> = nodes.iter().map(|c| PhaseRamp::new(self.gamma, c * h, h)).collect();
        let mut out = Vec::with_capacity(self.controls[0].len());
        for m in 0..self.grid.steps {
            for (i, ramp) in ramps.iter_mut().enumerate() {
                let k = m * per + i;
                let rot = ramp.next().unwrap_or(ONE);
                out.push(scales[0] * self.controls[0][k] + scales[1] * rot * self.controls[1][k]);
            }
        }
        out
    }
}

fn error_from_chi(chi: &[C64], params: &SystemParams, lambda1: f64, grid: &PropagationGrid, target: &crate::linalg::Mat9) -> f64 {
    let [u1, u2] = propagate_qutrits_from_chi(chi, params, lambda1, grid);
    (1.0 - gate_fidelity(&kron(&u1, &u2), target)).max(0.0)
}

/// Gate error of `field` after passing through the filter.
pub fn filtered_gate_error(
    field: &ControlField,
    target: &TargetRotation,
    params: &SystemParams,
    grid: &PropagationGrid,
    spec: &FilterSpec,
) -> f64 {
    let filtered = FilteredControls::new(field, params, grid, spec);
    error_from_chi(&filtered.chi([1.0, 1.0]), params, field.detunings[0], grid, &target_unitary(target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetuneReport {
    /// Factors applied to `|a₁|, |a₂|`.
    pub scales: [f64; 2],
    pub unfiltered_error: f64,
    pub filtered_error: f64,
    pub retuned_error: f64,
    pub iterations: usize,
    /// The pre-filter field with retuned amplitudes.
    pub field: ControlField,
}

/// Rescales the amplitude magnitudes to minimize the post-filter gate error.
pub fn retune_amplitudes(
    field: &ControlField,
    spec: &FilterSpec,
    target: &TargetRotation,
    params: &SystemParams,
    grid: &PropagationGrid,
) -> RetuneReport {
    let t = target_unitary(target);
    let lambda1 = field.detunings[0];
    let unfiltered_error = error_from_chi(&chi_samples(field, params, grid), params, lambda1, grid, &t);
    let filtered = FilteredControls::new(field, params, grid, spec);
    let objective = |s: &[f64]| error_from_chi(&filtered.chi([s[0], s[1]]), params, lambda1, grid, &t);
    let filtered_error = objective(&[1.0, 1.0]);
    let r = nelder_mead(objective, &[1.0, 1.0], &[0.02, 0.02], NmOptions { max_iter: 400, tol: 1e-14 });
    let (scales, retuned_error) = if r.f < filtered_error { ([r.x[0], r.x[1]], r.f) } else { ([1.0, 1.0], filtered_error) };
    RetuneReport {
        scales,
        unfiltered_error,
        filtered_error,
        retuned_error,
        iterations: r.iterations,
        field: field.with_amplitude_scales(scales),
    }
}
