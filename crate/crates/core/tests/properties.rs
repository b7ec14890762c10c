use crowdgate::hardware::{apply_filter, FilterSpec};
use crowdgate::linalg::{expm_hermitian3, hermitian_deviation, kron, kron_sum, unitarity_defect, Mat3, C64};
use crowdgate::metrics::{gate_fidelity, reduced_fidelity};
use crowdgate::model::{
    interaction_hamiltonian, inverse_transform_frame, rotating_hamiltonian, target_qutrit, target_unitary, transform_frame, FrameSpec,
    SystemParams, TargetRotation,
};
use crowdgate::propagator::{propagate_full, propagate_pair, Method, PropagationGrid};
use crowdgate::pulses::{finite_fourier, ControlField, HanningShape, PulseAnsatz};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn field_strategy() -> impl Strategy<Value = (ControlField, SystemParams)> {
    (
        prop::collection::vec(-2.0f64..2.0, 8),
        -0.03f64..0.03,
        -0.03f64..0.03,
        12.0f64..36.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
    )
        .prop_map(|(v, l1, l2, tg, a, b)| {
            let p = SystemParams::reference();
            let target = TargetRotation::new(c(3.0 * a, 0.5), c(0.2, 3.0 * b)).unwrap();
            let ansatz = PulseAnsatz {
                coeffs: [vec![c(1.0, 0.0), c(v[0], v[1]), c(v[2], v[3])], vec![c(1.0, 0.0), c(v[4], v[5]), c(v[6], v[7])]],
                detunings: [l1, l2],
                tg,
            };
            (ansatz.field(&target, &p, Default::default()).unwrap(), p)
        })
}

/// Haar-random 3×3 unitary from the QR decomposition of a complex Gaussian matrix.
fn haar3(seed: &[f64]) -> Mat3 {
    // Box–Muller on pairs of uniforms in (0, 1)
    let g: Vec<f64> = seed
        .chunks(2)
        .flat_map(|u| {
            let r = (-2.0 * u[0].ln()).sqrt();
            let t = std::f64::consts::TAU * u[1];
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let z = Mat3::from_fn(|i, j| c(g[2 * (3 * i + j)], g[2 * (3 * i + j) + 1]));
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut d = Mat3::zeros();
    for k in 0..3 {
        d[(k, k)] = r[(k, k)] / r[(k, k)].norm();
    }
    q * d
}

fn haar_strategy() -> impl Strategy<Value = Mat3> {
    prop::collection::vec(1e-9f64..1.0, 36).prop_map(|v| haar3(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonians_hermitian_and_propagators_unitary((field, p) in field_strategy(), s in 0.0f64..1.0) {
        let t = s * field.tg;
        let (h1, h2) = interaction_hamiltonian(&p, field.detunings[0], field.chi(&p, t), t);
        prop_assert_eq!(hermitian_deviation(&h1), 0.0);
        prop_assert_eq!(hermitian_deviation(&h2), 0.0);
        let grid = PropagationGrid::new(field.tg, 512, Method::CommutatorFree4).unwrap();
        prop_assert!(unitarity_defect(&propagate_pair(&field, &p, &grid)) < 1e-10);
    }

    #[test]
    fn tensor_product_matches_full_space((field, p) in field_strategy()) {
        for method in [Method::PiecewiseExpMidpoint, Method::CommutatorFree4] {
            let grid = PropagationGrid::new(field.tg, 256, method).unwrap();
            let full = propagate_full(
                |t| {
                    let (h1, h2) = interaction_hamiltonian(&p, field.detunings[0], field.chi(&p, t), t);
                    kron_sum(&h1, &h2)
                },
                &grid,
            )
            .unwrap();
            let pair = propagate_pair(&field, &p, &grid);
            prop_assert!((full - pair).norm() < 1e-10, "{:?}: {}", method, (full - pair).norm());
        }
    }

    #[test]
    fn hanning_transform_closed_form_matches_quadrature(v in prop::collection::vec(-2.0f64..2.0, 6), rho in -3.0f64..3.0, tg in 5.0f64..60.0) {
        let shape = HanningShape::new(vec![c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5])], tg).unwrap();
        let numeric = finite_fourier(|t| shape.value(t), rho, tg);
        prop_assert!((shape.fourier(rho) - numeric).norm() < 1e-10 * tg.max(1.0));
    }

    #[test]
    fn fidelity_bounds_and_invariances(u1 in haar_strategy(), u2 in haar_strategy(), phi in -3.0f64..3.0, chi in -3.0f64..3.0, a in -4.0f64..4.0) {
        let t = target_unitary(&TargetRotation::new(c(a, 0.3), c(-0.7, a / 2.0)).unwrap());
        let u = kron(&u1, &u2);
        let f = gate_fidelity(&u, &t);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!((gate_fidelity(&(u * C64::from_polar(1.0, phi)), &t) - f).abs() < 1e-14);
        prop_assert!((gate_fidelity(&t, &t) - 1.0).abs() < 1e-14);
        // a phase on a qubit-2 input level only rephases its partial trace
        let mut ph = Mat3::identity();
        ph[(1, 1)] = C64::from_polar(1.0, chi);
        let shifted = u * kron(&Mat3::identity(), &ph);
        prop_assert!((reduced_fidelity(&shifted, &t).2 - reduced_fidelity(&u, &t).2).abs() < 1e-14);
    }

    #[test]
    fn frame_maps_are_inverse(u1 in haar_strategy(), u2 in haar_strategy(), tg in 1.0f64..80.0) {
        let u = kron(&u1, &u2);
        let frame = FrameSpec::interaction(&SystemParams::reference());
        let back = inverse_transform_frame(&transform_frame(&u, &frame, tg), &frame, tg);
        prop_assert!((back - u).norm() < 1e-12);
    }

    #[test]
    fn target_matches_generator_exponential(re in -6.0f64..6.0, im in -6.0f64..6.0) {
        let theta = c(re, im);
        prop_assume!(theta.norm() <= std::f64::consts::TAU);
        let mut h = Mat3::zeros();
        h[(1, 0)] = theta * 0.5;
        h[(0, 1)] = theta.conj() * 0.5;
        prop_assert!((target_qutrit(theta) - expm_hermitian3(&h, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn filter_is_linear(x in prop::collection::vec(-1.0f64..1.0, 64), y in prop::collection::vec(-1.0f64..1.0, 64), a in -2.0f64..2.0) {
        let spec = FilterSpec::awg();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let (fx, fy, fm) = (apply_filter(&x, 0.1, &spec), apply_filter(&y, 0.1, &spec), apply_filter(&mix, 0.1, &spec));
        for k in 0..64 {
            prop_assert!((fm[k] - (a * fx[k] + fy[k])).abs() < 1e-12);
        }
    }
}

#[test]
fn rotating_frame_propagation_agrees_with_interaction_frame() {
    let p = SystemParams::reference();
    let target = TargetRotation::from_names("X", "Y/2").unwrap();
    let ansatz = PulseAnsatz {
        coeffs: [vec![c(1.0, 0.0), c(0.3, -0.2), c(0.1, 0.4)], vec![c(1.0, 0.0), c(-0.5, 0.1), c(0.2, 0.0)]],
        detunings: [0.004, -0.011],
        tg: 18.0,
    };
    let field = ansatz.field(&target, &p, Default::default()).unwrap();
    let grid = PropagationGrid::new(18.0, 16384, Method::CommutatorFree4).unwrap();
    let l1 = field.detunings[0];
    let rot = propagate_full(|t| rotating_hamiltonian(&p, l1, field.chi(&p, t), t), &grid).unwrap();
    let back = inverse_transform_frame(&rot, &FrameSpec::interaction_in_rotating(&p, l1), 18.0);
    let direct = propagate_pair(&field, &p, &grid);
    assert!((back - direct).norm() < 1e-9, "{}", (back - direct).norm());
}
