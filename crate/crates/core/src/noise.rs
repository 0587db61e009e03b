//! Flux-noise sensitivity: eigenfrequency derivatives with respect to the
//! gradiometric loop fluxes, 1/f echo dephasing and the related sweeps.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circuit::{gradiometric_to_bias, CircuitParams, GradiometricBias};
use crate::error::{param_err, Error, Result};
use crate::spectrum::{find_phi_off_with, zz_rate, Spectrum, TwoQubitSystem};

/// Index of the first coupler branch in the compiled two-qubit circuit; its
/// operator is `e^{i(φ̂₂−φ̂₁)}`.
const COUPLER_BRANCH: usize = 2;
pub const FD_STEP: f64 = 1e-5;
/// Relative disagreement between the two derivative methods that is flagged.
pub const AGREEMENT_TOL: f64 = 0.02;

/// 1/f flux-noise amplitudes (Φ₀) with `S_Φ(f) = A²/|f|`, f in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxNoiseModel {
    pub a_inner: f64,
    pub a_outer: f64,
    pub a_outer_prime: f64,
    /// Correlation of the two outer-loop noises; −1 is the worst case.
    pub correlation: f64,
}

impl FluxNoiseModel {
    pub fn new(a_inner: f64, a_outer: f64, a_outer_prime: f64, correlation: f64) -> Result<Self> {
        let m = FluxNoiseModel { a_inner, a_outer, a_outer_prime, correlation };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.a_inner, self.a_outer, self.a_outer_prime].iter().any(|a| !(*a >= 0.0)) {
            return param_err("noise amplitudes must be non-negative");
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return param_err("correlation must lie in [-1, 1]");
        }
        Ok(())
    }
}

impl Default for FluxNoiseModel {
    fn default() -> Self {
        FluxNoiseModel { a_inner: 1e-6, a_outer: 5e-6, a_outer_prime: 5e-6, correlation: -1.0 }
    }
}

/// `∂ω/∂(Φ_ei, Φ_eo, Φ_eo')` in GHz/Φ₀ by two methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxDerivatives {
    pub finite_difference: [f64; 3],
    pub hellmann_feynman: [f64; 3],
    /// Largest relative disagreement over the non-zero components.
    pub rel_diff: f64,
    pub agree: bool,
}

fn spectrum_at(sys: &TwoQubitSystem, g: &GradiometricBias) -> Result<Spectrum> {
    sys.spectrum(&gradiometric_to_bias(g)?)
}

fn frequency(sys: &TwoQubitSystem, g: &GradiometricBias, state: &[usize]) -> Result<f64> {
    let sp = spectrum_at(sys, g)?;
    Ok(sp.energy(state)? - sp.energy(&[0, 0])?)
}

/// `⟨cos(φ̂₂−φ̂₁)⟩` in `state` minus the ground-state value.
pub fn relative_cos_expectation(sys: &TwoQubitSystem, g: &GradiometricBias, state: &[usize]) -> Result<f64> {
    let sp = spectrum_at(sys, g)?;
    let op = &sys.system.terms.branches[COUPLER_BRANCH].op;
    let expect = |k: usize| -> f64 {
        let v = sp.eigenvectors.column(k);
        v.iter().zip(op.dot(&v).iter()).map(|(a, b)| (a.conj() * b).re).sum()
    };
    Ok(expect(sp.index(state)?) - expect(sp.index(&[0, 0])?))
}

/// Closed-form derivatives (GHz/Φ₀), `⟨sin(φ̂₂−φ̂₁)⟩` terms dropped.
pub fn derivatives_closed_form(params: &CircuitParams, phi_e1: f64, rel_cos: f64) -> [f64; 3] {
    let s = (0.5 * TAU * phi_e1).sin();
    let inner = TAU * 0.5 * params.sum_ejc() * s * rel_cos;
    let outer = TAU * 0.5 * params.delta_ejc() * s * rel_cos;
    [inner, outer, -outer]
}

fn central(sys: &TwoQubitSystem, g: &GradiometricBias, state: &[usize], axis: usize, h: f64) -> Result<f64> {
    let shift = |d: f64| {
        let mut x = *g;
        match axis {
            0 => x.phi_ei += d,
            1 => x.phi_eo += d,
            _ => x.phi_eo_prime += d,
        }
        x
    };
    Ok((frequency(sys, &shift(h), state)? - frequency(sys, &shift(-h), state)?) / (2.0 * h))
}

/// Central finite differences with step `h` along each gradiometric flux.
pub fn derivatives_finite_difference(
    sys: &TwoQubitSystem,
    g: &GradiometricBias,
    state: &[usize],
    h: f64,
) -> Result<[f64; 3]> {
    Ok([central(sys, g, state, 0, h)?, central(sys, g, state, 1, h)?, central(sys, g, state, 2, h)?])
}

pub fn flux_derivatives(sys: &TwoQubitSystem, g: &GradiometricBias, state: &[usize]) -> Result<FluxDerivatives> {
    if g.delta_outer() != 0.0 {
        return param_err("derivatives are taken at ΔΦ_eo = 0");
    }
    let fd = derivatives_finite_difference(sys, g, state, FD_STEP)?;
    let rel = relative_cos_expectation(sys, g, state)?;
    let hf = derivatives_closed_form(&sys.params, g.phi_ei, rel);
    let scale = fd.iter().chain(&hf).fold(0.0f64, |m, v| m.max(v.abs()));
    let rel_diff = fd
        .iter()
        .zip(&hf)
        .filter(|(a, b)| a.abs().max(b.abs()) > 1e-6 * scale)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    Ok(FluxDerivatives { finite_difference: fd, hellmann_feynman: hf, rel_diff, agree: rel_diff <= AGREEMENT_TOL })
}

/// Echo dephasing time (µs) from derivatives in GHz/Φ₀; `INFINITY` when
/// every contribution vanishes.
pub fn echo_dephasing(derivs: [f64; 3], noise: &FluxNoiseModel) -> Result<f64> {
    noise.validate()?;
    let [di, d_o, d_op] = derivs.map(|d| TAU * d);
    let outer = (noise.a_outer * d_o).powi(2)
        + (noise.a_outer_prime * d_op).powi(2)
        + 2.0 * noise.correlation * noise.a_outer * noise.a_outer_prime * d_o * d_op;
    let rate = 2f64.ln().sqrt() * ((noise.a_inner * di).powi(2) + outer.max(0.0)).sqrt();
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1e-3 / rate)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DephasingRow {
    pub asymmetry: f64,
    pub delta_ejc: f64,
    pub phi_off: f64,
    pub t_echo_10: f64,
    pub t_echo_01: f64,
    pub derivs_10: FluxDerivatives,
    pub derivs_01: FluxDerivatives,
}

fn dephasing_at(sys: &TwoQubitSystem, phi_off: f64, noise: &FluxNoiseModel) -> Result<(FluxDerivatives, FluxDerivatives, f64, f64)> {
    let g = GradiometricBias::symmetric(phi_off, 0.0);
    let d10 = flux_derivatives(sys, &g, &[1, 0])?;
    let d01 = flux_derivatives(sys, &g, &[0, 1])?;
    let t10 = echo_dephasing(d10.hellmann_feynman, noise)?;
    let t01 = echo_dephasing(d01.hellmann_feynman, noise)?;
    Ok((d10, d01, t10, t01))
}

/// Echo dephasing of |10⟩ and |01⟩ at each asymmetry `ΔE/ΣE`, with
/// `ΣE_{J,C}` held fixed and the idle point re-solved per point.
pub fn asymmetry_dephasing_sweep(
    base: &CircuitParams,
    asymmetries: &[f64],
    noise: &FluxNoiseModel,
    bracket: (f64, f64),
) -> Result<Vec<DephasingRow>> {
    asymmetries
        .iter()
        .map(|&d| {
            let p = base.with_coupler_asymmetry(d)?;
            let sys = TwoQubitSystem::with_defaults(&p)?;
            let phi_off = find_phi_off_with(&sys, bracket)?;
            let (d10, d01, t10, t01) = dephasing_at(&sys, phi_off, noise)?;
            Ok(DephasingRow {
                asymmetry: d,
                delta_ejc: p.delta_ejc(),
                phi_off,
                t_echo_10: t10,
                t_echo_01: t01,
                derivs_10: d10,
                derivs_01: d01,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub sum_ejc: f64,
    /// `None` when the coupler is absent.
    pub phi_off: Option<f64>,
    /// ζ at zero flux (GHz).
    pub zeta_on: f64,
    /// `π/|2πζ_on|` (ns).
    pub min_gate_time: f64,
    pub t_echo_10: f64,
    pub t_echo_01: f64,
}

/// Dephasing against the shortest CZ time as `ΣE_{J,C}` varies, symmetric
/// coupler, coupler capacitance scaled with the junction energy.
pub fn coupler_energy_tradeoff(
    base: &CircuitParams,
    sums: &[f64],
    noise: &FluxNoiseModel,
    bracket: (f64, f64),
) -> Result<Vec<TradeoffRow>> {
    let sym = base.with_coupler_asymmetry(0.0)?;
    sums.iter()
        .map(|&s| {
            let p = if s == 0.0 {
                CircuitParams { ejc1: 0.0, ejc2: 0.0, ..sym }
            } else {
                sym.with_coupler_sum(s)?
            };
            let sys = TwoQubitSystem::with_defaults(&p)?;
            let zeta_on = zz_rate(&sys.spectrum(&gradiometric_to_bias(&GradiometricBias::symmetric(0.0, 0.0))?)?, 2, (0, 1))?;
            let min_gate_time = if zeta_on == 0.0 { f64::INFINITY } else { 0.5 / zeta_on.abs() };
            if s == 0.0 {
                return Ok(TradeoffRow {
                    sum_ejc: s,
                    phi_off: None,
                    zeta_on,
                    min_gate_time,
                    t_echo_10: f64::INFINITY,
                    t_echo_01: f64::INFINITY,
                });
            }
            let phi_off = find_phi_off_with(&sys, bracket)?;
            let (_, _, t10, t01) = dephasing_at(&sys, phi_off, noise)?;
            Ok(TradeoffRow { sum_ejc: s, phi_off: Some(phi_off), zeta_on, min_gate_time, t_echo_10: t10, t_echo_01: t01 })
        })
        .collect()
}

/// RMS of 1/f flux noise band-limited to `[1/t_total, 1/t_min]` with a
/// two-sided spectrum: `A·√(2·ln(t_total/t_min))`.
pub fn rms_drift(a: f64, t_total: f64, t_min: f64) -> Result<f64> {
    if !(a >= 0.0) || !(t_min > 0.0) || t_total < t_min {
        return Err(Error::Parameter("rms_drift needs A ≥ 0 and t_total ≥ t_min > 0".into()));
    }
    Ok(a * (2.0 * (t_total / t_min).ln()).sqrt())
}
