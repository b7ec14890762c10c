//! Time-ordered propagation of the interaction-frame Hamiltonian and numerical Magnus terms.
//!
//! The pair Hamiltonian is a sum of commuting single-qutrit terms, so the pair
//! propagator factorizes as `U⁽¹⁾ ⊗ U⁽²⁾` and each factor is a product of 3×3 steps.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    expm_hermitian3, expm_hermitian9, expm_ladder, hermitian_deviation, kron, C64, Mat3, Mat9, PhaseRamp, COMPUTATIONAL, I, ONE, ZERO,
};
use crate::model::{eigenfrequencies, ladder_matrix, SystemParams};
use crate::pulses::ControlField;

const SQRT3_6: f64 = 0.288_675_134_594_812_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Product of `exp(−i H(t_mid) h)`; second order, exactly unitary.
    #[default]
    PiecewiseExpMidpoint,
    /// Two-exponential commutator-free Magnus step at the Gauss nodes; fourth order, exactly unitary.
    CommutatorFree4,
    /// Classical Runge–Kutta on `U' = −iHU`; fourth order, not norm preserving.
    Rk4,
}

impl Method {
    /// Node positions inside a step, as fractions of the step length.
    pub fn nodes(&self) -> &'static [f64] {
        match self {
            Method::PiecewiseExpMidpoint => &[0.5],
            Method::CommutatorFree4 => &[0.5 - SQRT3_6, 0.5 + SQRT3_6],
            Method::Rk4 => &[0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationGrid {
    pub tg: f64,
    pub steps: usize,
    pub method: Method,
}

impl PropagationGrid {
    pub const MIN_STEPS: usize = 16;

    pub fn new(tg: f64, steps: usize, method: Method) -> Result<Self> {
        if !(tg >= 0.0 && tg.is_finite()) {
            return Err(Error::InvalidGrid(format!("gate time {tg} ns")));
        }
        if steps < Self::MIN_STEPS {
            return Err(Error::InvalidGrid(format!("{steps} steps, need at least {}", Self::MIN_STEPS)));
        }
        Ok(PropagationGrid { tg, steps, method })
    }

    /// Fourth-order grid with `max(2048, tg/0.015 ns)` steps rounded up to a power of two.
    pub fn default_for(tg: f64) -> Self {
        let steps = ((tg / 0.015).ceil() as usize).max(2048).next_power_of_two();
        PropagationGrid { tg, steps, method: Method::CommutatorFree4 }
    }

    pub fn dt(&self) -> f64 {
        self.tg / self.steps as f64
    }

    pub fn refined(&self) -> Self {
        PropagationGrid { steps: 2 * self.steps, ..*self }
    }

    /// All node times, step-major.
    pub fn sample_times(&self) -> Vec<f64> {
        let h = self.dt();
        let nodes = self.method.nodes();
        let mut out = Vec::with_capacity(self.steps * nodes.len());
        for m in 0..self.steps {
            for c in nodes {
                out.push((m as f64 + c) * h);
            }
        }
        out
    }
}

const CF4_EARLY: f64 = 0.25 + SQRT3_6;
const CF4_LATE: f64 = 0.25 - SQRT3_6;

/// One step of the chosen method for a ladder Hamiltonian given its couplings at the step nodes.
#[inline]
fn ladder_step(method: Method, nodes: &[[C64; 2]], h: f64) -> Mat3 {
    match method {
        Method::PiecewiseExpMidpoint => expm_ladder(nodes[0][0], nodes[0][1], h),
        Method::CommutatorFree4 => {
            let (a, b) = (nodes[0], nodes[1]);
            let first = expm_ladder(CF4_EARLY * a[0] + CF4_LATE * b[0], CF4_EARLY * a[1] + CF4_LATE * b[1], h);
            let second = expm_ladder(CF4_LATE * a[0] + CF4_EARLY * b[0], CF4_LATE * a[1] + CF4_EARLY * b[1], h);
            second * first
        }
        Method::Rk4 => {
            let hs: Vec<Mat3> = nodes.iter().map(|n| ladder_matrix(n[0], n[1])).collect();
            rk4_step(&hs[0], &hs[1], &hs[2], h)
        }
    }
}

fn rk4_step<const D: usize>(
    h0: &SMatrix<C64, D, D>,
    hm: &SMatrix<C64, D, D>,
    h1: &SMatrix<C64, D, D>,
    h: f64,
) -> SMatrix<C64, D, D> {
    let id = SMatrix::<C64, D, D>::identity();
    let a0 = h0 * (-I);
    let am = hm * (-I);
    let a1 = h1 * (-I);
    let hc = C64::from(h);
    let k1 = a0;
    let k2 = am * (id + k1 * (0.5 * hc));
    let k3 = am * (id + k2 * (0.5 * hc));
    let k4 = a1 * (id + k3 * hc);
    let two = C64::from(2.0);
    id + (k1 + k2 * two + k3 * two + k4) * (hc / 6.0)
}

/// Step matrices of a general Hermitian sampler.
fn general_step<const D: usize, F>(
    method: Method,
    sample: &F,
    t0: f64,
    h: f64,
    expm: fn(&SMatrix<C64, D, D>, f64) -> SMatrix<C64, D, D>,
) -> Result<SMatrix<C64, D, D>>
where
    F: Fn(f64) -> SMatrix<C64, D, D>,
{
    let mut hs = [SMatrix::<C64, D, D>::zeros(); 3];
    for (slot, c) in hs.iter_mut().zip(method.nodes()) {
        let t = t0 + c * h;
        let m = sample(t);
        let scale = m.norm().max(1.0);
        let dev = hermitian_deviation(&m);
        if dev > 1e-12 * scale {
            return Err(Error::NotHermitian { t, deviation: dev });
        }
        *slot = m;
    }
    Ok(match method {
        Method::PiecewiseExpMidpoint => expm(&hs[0], h),
        Method::CommutatorFree4 => {
            let (e, l) = (C64::from(CF4_EARLY), C64::from(CF4_LATE));
            let first = hs[0] * e + hs[1] * l;
            let second = hs[0] * l + hs[1] * e;
            expm(&second, h) * expm(&first, h)
        }
        Method::Rk4 => rk4_step(&hs[0], &hs[1], &hs[2], h),
    })
}

/// Propagator of a time-dependent single-qutrit Hamiltonian over `[0, tg]`.
pub fn propagate_qutrit<F: Fn(f64) -> Mat3>(hamiltonian: F, grid: &PropagationGrid) -> Result<Mat3> {
    let h = grid.dt();
    let mut u = Mat3::identity();
    for m in 0..grid.steps {
        u = general_step(grid.method, &hamiltonian, m as f64 * h, h, expm_hermitian3)? * u;
    }
    Ok(u)
}

/// Propagator of a time-dependent 9×9 Hamiltonian over `[0, tg]`, without using the tensor structure.
pub fn propagate_full<F: Fn(f64) -> Mat9>(hamiltonian: F, grid: &PropagationGrid) -> Result<Mat9> {
    let h = grid.dt();
    let mut u = Mat9::identity();
    for m in 0..grid.steps {
        u = general_step(grid.method, &hamiltonian, m as f64 * h, h, expm_hermitian9)? * u;
    }
    Ok(u)
}

/// χ at every node of `grid`, step-major.
pub fn chi_samples(field: &ControlField, params: &SystemParams, grid: &PropagationGrid) -> Vec<C64> {
    let h = grid.dt();
    let nodes = grid.method.nodes();
    let gamma = field.gamma(params);
    let mut ramps: Vec<PhaseRamp> = nodes.iter().map(|c| PhaseRamp::new(gamma, c * h, h)).collect();
    let mut out = Vec::with_capacity(grid.steps * nodes.len());
    for m in 0..grid.steps {
        for (c, ramp) in nodes.iter().zip(ramps.iter_mut()) {
            let t = (m as f64 + c) * h;
            let rot = ramp.next().unwrap_or(ONE);
            out.push(field.control(0, t) + rot * field.control(1, t));
        }
    }
    out
}

/// Single-qutrit propagators from χ sampled at the grid nodes.
pub fn propagate_qutrits_from_chi(chi: &[C64], params: &SystemParams, lambda1: f64, grid: &PropagationGrid) -> [Mat3; 2] {
    let mut u = [Mat3::identity(); 2];
    for_each_step(chi, params, lambda1, grid, |_, steps| {
        u[0] = steps[0] * u[0];
        u[1] = steps[1] * u[1];
    });
    u
}

/// Calls `visit(step_index, [E⁽¹⁾, E⁽²⁾])` for every time step in order.
fn for_each_step<V: FnMut(usize, [Mat3; 2])>(chi: &[C64], params: &SystemParams, lambda1: f64, grid: &PropagationGrid, mut visit: V) {
    let d = eigenfrequencies(params, lambda1).as_array();
    let h = grid.dt();
    let nodes = grid.method.nodes();
    let per = nodes.len();
    assert_eq!(chi.len(), grid.steps * per, "chi samples do not match the grid");
    // ramps[node][qutrit][transition]
    let mut ramps: Vec<[[PhaseRamp; 2]; 2]> = nodes
        .iter()
        .map(|c| [0, 1].map(|k| [0, 1].map(|j| PhaseRamp::new(d[k][j], c * h, h))))
        .collect();
    let lam = params.lambdas();
    let weights = [0, 1].map(|k| [0, 1].map(|j| 0.5 * lam[k][j]));
    let mut q = [[[ZERO; 2]; 3]; 2];
    for m in 0..grid.steps {
        for (i, node) in ramps.iter_mut().enumerate() {
            let x = chi[m * per + i];
            for k in 0..2 {
                for j in 0..2 {
                    let phase = node[k][j].next().unwrap_or(ONE);
                    q[k][i][j] = x * weights[k][j] * phase;
                }
            }
        }
        visit(m, [ladder_step(grid.method, &q[0][..per], h), ladder_step(grid.method, &q[1][..per], h)]);
    }
}

/// Pair propagator `U⁽¹⁾ ⊗ U⁽²⁾` for a control field.
pub fn propagate_pair(field: &ControlField, params: &SystemParams, grid: &PropagationGrid) -> Mat9 {
    let chi = chi_samples(field, params, grid);
    let [u1, u2] = propagate_qutrits_from_chi(&chi, params, field.detunings[0], grid);
    kron(&u1, &u2)
}

/// First two Magnus terms and the sufficient-convergence diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnusTerms<const D: usize> {
    pub theta0: SMatrix<C64, D, D>,
    pub theta1: SMatrix<C64, D, D>,
    /// `∫ ‖H‖_F dt`; the Frobenius norm bounds the operator norm.
    pub norm_integral: f64,
    /// `norm_integral < π`, a sufficient condition for convergence of the series.
    pub converges: bool,
}

impl<const D: usize> MagnusTerms<D> {
    /// `exp(−i(Θ₀ + Θ₁))`.
    pub fn unitary(&self) -> SMatrix<C64, D, D> {
        let gen = self.theta0 + self.theta1;
        let h = (gen + gen.adjoint()) * C64::from(0.5);
        let dyn_h = nalgebra::DMatrix::from_iterator(D, D, h.iter().cloned());
        let eig = nalgebra::SymmetricEigen::new(dyn_h);
        let v = eig.eigenvectors;
        let mut scaled = v.clone();
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let p = C64::from_polar(1.0, -lam);
            for i in 0..D {
                scaled[(i, j)] *= p;
            }
        }
        let full = scaled * v.adjoint();
        SMatrix::<C64, D, D>::from_iterator(full.iter().cloned())
    }
}

/// Θ₀ = ∫H dt and Θ₁ = −(i/2)∫dt₂∫^{t₂}dt₁ [H(t₂), H(t₁)], sampled at step midpoints.
pub fn magnus_terms<const D: usize, F>(hamiltonian: F, grid: &PropagationGrid) -> MagnusTerms<D>
where
    F: Fn(f64) -> SMatrix<C64, D, D>,
{
    let h = grid.dt();
    let mut running = SMatrix::<C64, D, D>::zeros();
    let mut theta1 = SMatrix::<C64, D, D>::zeros();
    let mut norm_integral = 0.0;
    for m in 0..grid.steps {
        let hm = hamiltonian((m as f64 + 0.5) * h);
        // [H_m, A_m + H_m h/2] = [H_m, A_m]
        theta1 += (hm * running - running * hm) * C64::from(h);
        running += hm * C64::from(h);
        norm_integral += hm.norm() * h;
    }
    theta1 *= C64::new(0.0, -0.5);
    MagnusTerms {
        theta0: running,
        theta1,
        norm_integral,
        converges: norm_integral < std::f64::consts::PI,
    }
}

/// One exported point of a state trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: [C64; 9],
    /// Population in `{|00>, |01>, |10>, |11>}`.
    pub p_comp: f64,
    /// Population with qutrit 2 in level 2.
    pub p_leak2: f64,
}

fn point(t: f64, psi: &SVector<C64, 9>) -> TrajectoryPoint {
    let mut state = [ZERO; 9];
    state.copy_from_slice(psi.as_slice());
    let p_comp = COMPUTATIONAL.iter().map(|&k| psi[k].norm_sqr()).sum();
    let p_leak2 = [2, 5, 8].iter().map(|&k| psi[k].norm_sqr()).sum();
    TrajectoryPoint { t, state, p_comp, p_leak2 }
}

/// State evolution sampled every `every` steps (and at the final time).
pub fn state_trajectory(
    field: &ControlField,
    params: &SystemParams,
    grid: &PropagationGrid,
    initial: &SVector<C64, 9>,
    every: usize,
) -> Vec<TrajectoryPoint> {
    let every = every.max(1);
    let chi = chi_samples(field, params, grid);
    let h = grid.dt();
    let mut psi = *initial;
    let mut out = vec![point(0.0, &psi)];
    for_each_step(&chi, params, field.detunings[0], grid, |m, [e1, e2]| {
        // (E1 ⊗ E2) ψ with ψ reshaped as Ψ[k1][k2]: E1 Ψ E2ᵀ
        let mat = SMatrix::<C64, 3, 3>::from_fn(|i, j| psi[3 * i + j]);
        let next = e1 * mat * e2.transpose();
        psi = SVector::<C64, 9>::from_fn(|k, _| next[(k / 3, k % 3)]);
        if (m + 1) % every == 0 || m + 1 == grid.steps {
            out.push(point((m + 1) as f64 * h, &psi));
        }
    });
    out
}

/// Writes `t_ns`, real/imaginary parts of the nine amplitudes and `p_comp`.
pub fn write_trajectory_csv<W: std::io::Write>(points: &[TrajectoryPoint], mut out: W) -> Result<()> {
    let mut header = String::from("t_ns");
    for k in 0..9 {
        header.push_str(&format!(",re{k},im{k}"));
    }
    header.push_str(",p_comp");
    writeln!(out, "{header}")?;
    for p in points {
        let mut line = format!("{:.11e}", p.t);
        for z in &p.state {
            line.push_str(&format!(",{:.11e},{:.11e}", z.re, z.im));
        }
        line.push_str(&format!(",{:.11e}", p.p_comp));
        writeln!(out, "{line}")?;
    }
    Ok(())
}
