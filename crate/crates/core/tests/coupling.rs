use ndarray::Array1;
use num_complex::Complex64 as C64;

use sqcoupler::circuit::{CircuitParams, FluxBias};
use sqcoupler::perturbation::{g_eff, pair_perts};
use sqcoupler::spectrum::TwoQubitSystem;

/// `|⟨10|H|01⟩|` between bare product states of the full charge-basis
/// Hamiltonian. Local terms are diagonal in this basis, so only the
/// interaction contributes.
fn numeric_exchange(sys: &TwoQubitSystem, phi: f64) -> f64 {
    let bias = FluxBias::operating(phi);
    let bare = sys.bare_basis(&bias).unwrap();
    let h = sys.hamiltonian(&bias).unwrap();
    let prod = |a: usize, b: usize| {
        let (va, vb) = (bare.vectors[0].column(a), bare.vectors[1].column(b));
        Array1::from_iter(va.iter().flat_map(|x| vb.iter().map(move |y| x * y)))
    };
    let (s10, s01) = (prod(1, 0), prod(0, 1));
    let el: C64 = s10.iter().zip(h.dot(&s01).iter()).map(|(a, b)| a.conj() * b).sum();
    el.norm()
}

#[test]
fn effective_exchange_matches_matrix_element() {
    let params = CircuitParams::nominal();
    let sys = TwoQubitSystem::with_defaults(&params).unwrap();
    let (p1, p2) = pair_perts(&params).unwrap();
    for phi in [0.0, 0.2, 1.0] {
        let pert = g_eff(&params, &p1, &p2, phi).unwrap().abs();
        let num = numeric_exchange(&sys, phi);
        let rel = (pert - num).abs() / num;
        assert!(rel < 0.05, "Φ = {phi}: g_eff {pert} vs {num} ({rel:.3})");
    }
    // Near the cancellation the error is measured against the junction term.
    let scale = g_eff(&params, &p1, &p2, 0.0).unwrap().abs();
    for phi in [0.35, 0.8] {
        let pert = g_eff(&params, &p1, &p2, phi).unwrap().abs();
        let num = numeric_exchange(&sys, phi);
        assert!((pert - num).abs() < 0.05 * scale, "Φ = {phi}: {pert} vs {num}");
    }
}

#[test]
fn charge_coupling_alone_survives_without_junctions() {
    let params = CircuitParams { ejc1: 0.0, ejc2: 0.0, ..CircuitParams::nominal() };
    let sys = TwoQubitSystem::with_defaults(&params).unwrap();
    let (p1, p2) = pair_perts(&params).unwrap();
    let pert = g_eff(&params, &p1, &p2, 0.3).unwrap();
    assert!(pert > 0.0);
    let a = numeric_exchange(&sys, 0.0);
    let b = numeric_exchange(&sys, 0.3);
    assert!((a - b).abs() < 1e-9 * a, "flux must not matter without coupler junctions");
    assert!((pert - a).abs() / a < 0.05);
}
