//! Small dense complex matrices for one qutrit (3×3) and the qutrit pair (9×9).

use nalgebra::SMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat3 = SMatrix<C64, 3, 3>;
pub type Mat9 = SMatrix<C64, 9, 9>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Index of `|k1, k2>` in the 9-dimensional product basis.
#[inline]
pub const fn pair_index(k1: usize, k2: usize) -> usize {
    3 * k1 + k2
}

/// Computational subspace `{|00>, |01>, |10>, |11>}` in product-basis indices.
pub const COMPUTATIONAL: [usize; 4] = [0, 1, 3, 4];

pub fn kron(a: &Mat3, b: &Mat3) -> Mat9 {
    let mut out = Mat9::zeros();
    for i1 in 0..3 {
        for j1 in 0..3 {
            let aij = a[(i1, j1)];
            if aij == ZERO {
                continue;
            }
            for i2 in 0..3 {
                for j2 in 0..3 {
                    out[(pair_index(i1, i2), pair_index(j1, j2))] = aij * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Embeds single-qutrit operators as `a ⊗ 1 + 1 ⊗ b`.
pub fn kron_sum(a: &Mat3, b: &Mat3) -> Mat9 {
    kron(a, &Mat3::identity()) + kron(&Mat3::identity(), b)
}

/// Largest entry of `|m - m†|`.
pub fn hermitian_deviation<const D: usize>(m: &SMatrix<C64, D, D>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..D {
        for j in i..D {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Frobenius norm of `u† u - 1`.
pub fn unitarity_defect<const D: usize>(u: &SMatrix<C64, D, D>) -> f64 {
    (u.adjoint() * u - SMatrix::<C64, D, D>::identity()).norm()
}

macro_rules! expm_hermitian_impl {
    ($name:ident, $ty:ty) => {
        /// `exp(-i·tau·h)` for Hermitian `h`, by Padé scaling and squaring.
        ///
        /// The complex Hermitian eigensolver loses accuracy on nearly degenerate
        /// spectra, so it is not used here.
        pub fn $name(h: &$ty, tau: f64) -> $ty {
            (h * C64::new(0.0, -tau)).exp()
        }
    };
}

expm_hermitian_impl!(expm_hermitian3, Mat3);
expm_hermitian_impl!(expm_hermitian9, Mat9);

/// Exact `exp(-i·tau·H)` for a ladder Hamiltonian with zero diagonal,
/// `H = b1|1><0| + b2|2><1| + h.c.`.
///
/// Such an `H` satisfies `H^3 = r^2 H` with `r^2 = |b1|^2 + |b2|^2`, so the
/// exponential is `1 - i·sin(r tau)/r·H + (cos(r tau) - 1)/r^2·H^2`.
#[inline]
pub fn expm_ladder(b1: C64, b2: C64, tau: f64) -> Mat3 {
    let n1 = b1.norm_sqr();
    let n2 = b2.norm_sqr();
    let r2 = n1 + n2;
    let r = r2.sqrt();
    let x = 0.5 * r * tau;
    // sin(r tau)/r = tau·sinc(x)·cos(x), (cos(r tau) − 1)/r² = −tau²/2·sinc(x)²
    let (sin, cos) = x.sin_cos();
    let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { sin / x };
    let s = tau * sinc * cos;
    let c = -0.5 * tau * tau * sinc * sinc;

    let ms = C64::new(0.0, -s);
    let b1c = b1.conj();
    let b2c = b2.conj();
    Mat3::new(
        ONE + c * n1,
        ms * b1c,
        c * b1c * b2c,
        ms * b1,
        ONE + c * r2,
        ms * b2c,
        c * b2 * b1,
        ms * b2,
        ONE + c * n2,
    )
}

/// `exp(i·omega·(t0 + m·h))` for `m = 0, 1, 2, …`, by complex multiplication with
/// periodic exact re-evaluation to keep rounding drift below 1e-14.
#[derive(Debug, Clone, Copy)]
pub struct PhaseRamp {
    omega: f64,
    t0: f64,
    h: f64,
    m: usize,
    cur: C64,
    step: C64,
}

impl PhaseRamp {
    const ANCHOR: usize = 128;

    pub fn new(omega: f64, t0: f64, h: f64) -> Self {
        PhaseRamp { omega, t0, h, m: 0, cur: C64::from_polar(1.0, omega * t0), step: C64::from_polar(1.0, omega * h) }
    }
}

impl Iterator for PhaseRamp {
    type Item = C64;

    #[inline]
    fn next(&mut self) -> Option<C64> {
        let out = self.cur;
        self.m += 1;
        self.cur = if self.m % Self::ANCHOR == 0 {
            C64::from_polar(1.0, self.omega * (self.t0 + self.m as f64 * self.h))
        } else {
            self.cur * self.step
        };
        Some(out)
    }
}

/// Diagonal unitary `diag(exp(-i·phase_k))`.
pub fn diag_phases9(phases: &[f64; 9]) -> Mat9 {
    let mut m = Mat9::zeros();
    for (k, p) in phases.iter().enumerate() {
        m[(k, k)] = C64::from_polar(1.0, -p);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_expm3(h: &Mat3, tau: f64) -> Mat3 {
        let a = h * C64::new(0.0, -tau);
        let mut term = Mat3::identity();
        let mut acc = Mat3::identity();
        for k in 1..80 {
            term = term * a / C64::from(k as f64);
            acc += term;
        }
        acc
    }

    #[test]
    fn ladder_exponential_matches_series() {
        let b1 = C64::new(0.3, -0.7);
        let b2 = C64::new(-0.2, 0.45);
        let mut h = Mat3::zeros();
        h[(1, 0)] = b1;
        h[(0, 1)] = b1.conj();
        h[(2, 1)] = b2;
        h[(1, 2)] = b2.conj();
        for tau in [0.0, 1e-7, 0.01, 0.8, 3.7] {
            let fast = expm_ladder(b1, b2, tau);
            let pade = expm_hermitian3(&h, tau);
            let series = series_expm3(&h, tau);
            assert!((fast - series).norm() < 1e-13, "tau = {tau}");
            assert!((pade - series).norm() < 1e-12, "tau = {tau}");
        }
    }

    #[test]
    fn degenerate_pair_exponential_factorizes() {
        // identical qutrits give a highly degenerate 9×9 spectrum
        let mut h = Mat3::zeros();
        h[(1, 0)] = C64::new(0.004, 0.011);
        h[(0, 1)] = h[(1, 0)].conj();
        h[(2, 1)] = h[(1, 0)] * 2f64.sqrt();
        h[(1, 2)] = h[(2, 1)].conj();
        let tau = 0.047;
        let full = expm_hermitian9(&kron_sum(&h, &h), tau);
        let e = expm_hermitian3(&h, tau);
        assert!((full - kron(&e, &e)).norm() < 1e-14);
        assert!(unitarity_defect(&full) < 1e-14);
    }

    #[test]
    fn ladder_exponential_at_zero_coupling_is_identity() {
        let u = expm_ladder(ZERO, ZERO, 2.5);
        assert!((u - Mat3::identity()).norm() < 1e-15);
    }

    #[test]
    fn phase_ramp_tracks_exact_phase() {
        let (w, t0, h) = (37.1, 0.013, 0.0071);
        for (m, z) in PhaseRamp::new(w, t0, h).take(5000).enumerate() {
            let want = C64::from_polar(1.0, w * (t0 + m as f64 * h));
            // the oracle's own argument carries ~1e-16 relative rounding of w·t ≈ 1300 rad
            assert!((z - want).norm() < 1e-12, "m = {m}: {}", (z - want).norm());
        }
    }

    #[test]
    fn kron_of_identities() {
        let k = kron(&Mat3::identity(), &Mat3::identity());
        assert_eq!(k, Mat9::identity());
    }

    #[test]
    fn kron_index_layout() {
        let mut a = Mat3::zeros();
        a[(1, 0)] = ONE;
        let k = kron(&a, &Mat3::identity());
        assert_eq!(k[(pair_index(1, 2), pair_index(0, 2))], ONE);
        assert_eq!(k.iter().filter(|z| **z != ZERO).count(), 3);
    }
}
