use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use sqcoupler::circuit::{compile_two_qubit, CircuitParams, FluxBias};
use sqcoupler::dynamics::{choi_to_kraus, virtual_z_optimize};
use sqcoupler::linalg::{dagger, hermiticity_defect, identity, propagator, propagator_taylor, unitarity_defect};
use sqcoupler::noise::{echo_dephasing, FluxNoiseModel};
use sqcoupler::operators::assemble_hamiltonian;
use sqcoupler::pulse::{envelope, kaiser_window, Pchip, Waveform, Window};

fn hermitian(n: usize) -> impl Strategy<Value = Array2<C64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |v| {
        let a = Array2::from_shape_fn((n, n), |(i, j)| C64::new(v[2 * (i * n + j)], v[2 * (i * n + j) + 1]));
        (&a + &dagger(&a)).mapv(|z| z * 0.5)
    })
}

fn diag_unitary(p: &[f64]) -> Array2<C64> {
    Array2::from_shape_fn((4, 4), |(i, j)| if i == j { C64::from_polar(1.0, p[i]) } else { C64::new(0.0, 0.0) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_hermitian(
        phi in -1.0f64..1.0,
        d in -0.9f64..0.9,
        ej2 in 20.0f64..60.0,
    ) {
        let p = CircuitParams { ej2, ..CircuitParams::nominal() }.with_coupler_asymmetry(d).unwrap();
        let spec = compile_two_qubit(&p, &FluxBias::operating(phi)).unwrap();
        let h = assemble_hamiltonian(&spec, 3).unwrap();
        prop_assert!(hermiticity_defect(&h) < 1e-12);
    }

    #[test]
    fn asymmetry_keeps_the_sum(d in -1.0f64..1.0) {
        let base = CircuitParams::nominal();
        let p = base.with_coupler_asymmetry(d).unwrap();
        prop_assert!((p.sum_ejc() - base.sum_ejc()).abs() < 1e-12);
        prop_assert!((p.delta_ejc() / p.sum_ejc() - d).abs() < 1e-12);
    }

    #[test]
    fn step_propagator_is_unitary_and_exact(h in hermitian(6), t in 0.0f64..2.0) {
        let u = propagator_taylor(&h, t);
        prop_assert!(unitarity_defect(&u) < 1e-12);
        let exact = propagator(&h, t).unwrap();
        let diff = (&u - &exact).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-11, "{}", diff);
    }

    #[test]
    fn kaiser_window_is_a_symmetric_partition(n in 3usize..300, shape in 0.0f64..12.0) {
        let w = kaiser_window(n, shape);
        prop_assert_eq!(w.len(), n);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert!(w[i] >= 0.0);
            prop_assert!((w[i] - w[n - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn envelope_is_bounded_and_symmetric(n in 20usize..400, pad in 0usize..8, beta in 0.0f64..1.0) {
        let e = envelope(n, pad, beta, Window::Kaiser(6.0)).unwrap();
        let peak = e.iter().cloned().fold(0.0, f64::max);
        prop_assert!((peak - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&e[i]));
            prop_assert!((e[i] - e[n - 1 - i]).abs() < 1e-12);
        }
        prop_assert!(e[..pad].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pchip_preserves_monotonicity(steps in prop::collection::vec(0.0f64..1.0, 3..20), t in 0.0f64..1.0) {
        let x: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
        let y: Vec<f64> = steps.iter().scan(0.0, |acc, s| { *acc += s; Some(*acc) }).collect();
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        let span = x[x.len() - 1];
        let (a, b) = (p.eval(t * span).unwrap(), p.eval((t * span + 0.37).min(span)).unwrap());
        prop_assert!(b >= a - 1e-12);
        prop_assert!(a >= y[0] - 1e-12 && a <= y[y.len() - 1] + 1e-12);
        for (xi, yi) in x.iter().zip(&y) {
            prop_assert!((p.eval(*xi).unwrap() - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn virtual_z_absorbs_local_phases(a in -3.0f64..3.0, b in -3.0f64..3.0, g in -3.0f64..3.0, eps in -0.5f64..0.5) {
        let base = [g, g + a, g + b, g + a + b + std::f64::consts::PI + eps];
        let vz = virtual_z_optimize(&diag_unitary(&base));
        let expect = 0.8 * (eps / 4.0).sin().powi(2);
        prop_assert!((vz.error - expect).abs() < 1e-12, "{} vs {}", vz.error, expect);
        prop_assert!((0.0..=1.0).contains(&vz.error));
    }

    #[test]
    fn unitary_channel_gives_one_trace_preserving_kraus(p in prop::collection::vec(-3.0f64..3.0, 4)) {
        let u = diag_unitary(&p);
        let mut choi = Array2::<C64>::zeros((16, 16));
        for i in 0..4 {
            for j in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        choi[[i * 4 + a, j * 4 + b]] = u[[a, i]] * u[[b, j]].conj();
                    }
                }
            }
        }
        let k = choi_to_kraus(&choi).unwrap();
        prop_assert_eq!(k.len(), 1);
        let sum = k.iter().fold(Array2::<C64>::zeros((4, 4)), |acc, m| acc + dagger(m).dot(m));
        let dev = (&sum - &identity(4)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12);
    }

    #[test]
    fn echo_time_scales_inversely_with_noise(s in 0.1f64..10.0, d in prop::array::uniform3(-1.0f64..1.0)) {
        let m = FluxNoiseModel::default();
        let scaled = FluxNoiseModel { a_inner: s * m.a_inner, a_outer: s * m.a_outer, a_outer_prime: s * m.a_outer_prime, ..m };
        let (t0, t1) = (echo_dephasing(d, &m).unwrap(), echo_dephasing(d, &scaled).unwrap());
        prop_assert!(t0 > 0.0);
        if t0.is_finite() {
            prop_assert!((t0 / t1 - s).abs() < 1e-9 * s);
        }
    }

    #[test]
    fn waveform_csv_round_trip(v in prop::collection::vec(-1.0f64..1.0, 1..50), dt in 0.001f64..1.0) {
        let wf = Waveform { dt, samples: v };
        let mut buf = Vec::new();
        wf.write_csv(&mut buf).unwrap();
        let back = Waveform::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples, wf.samples);
        prop_assert!((back.dt - dt).abs() < 1e-12 * dt);
    }
}
