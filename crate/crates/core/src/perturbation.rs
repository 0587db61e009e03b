//! Closed-form perturbative estimates: zero-point fluctuations, effective
//! coupling, the ZZ contributions of the even and odd coupler terms, chain and
//! spectator crosstalk, and the driven two-photon rate.
//!
//! Transmon frequencies and anharmonicities entering these formulas come from
//! exact diagonalization of the bare transmons, not from the harmonic
//! approximation.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::circuit::{compile_chain, derive_energies, ChainParams, CircuitParams, FluxBias, SpectatorParams};
use crate::error::{param_err, Error, Result};
use crate::linalg::eigh_real;
use crate::operators::DEFAULT_NCUT;
use crate::spectrum::{brent, first_sign_change, BRACKET_SCAN, FLUX_TOL, ZETA_TOL};

/// Bare levels stored per transmon; `ζ_odd` needs up to the third.
const STORED_LEVELS: usize = 5;

/// A denominator smaller than this multiple of the coupling it divides is
/// treated as a resonance.
const RESONANCE_GUARD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonPert {
    pub ej: f64,
    pub ec: f64,
    pub phi_zpf: f64,
    pub n_zpf: f64,
    /// 0–1 transition frequency (GHz).
    pub omega: f64,
    /// `E₂ − 2E₁ + E₀` (GHz).
    pub eta: f64,
    /// Bare energies relative to the ground state, `levels[0] = 0`.
    pub levels: Vec<f64>,
}

impl TransmonPert {
    /// Coefficient of `a†a` after normal ordering at second order.
    pub fn harmonic_frequency(&self) -> f64 {
        8.0 * self.ec * self.n_zpf.powi(2) + self.ej * (-self.phi_zpf.powi(2) / 2.0).exp() * self.phi_zpf.powi(2)
    }

    /// Twice the coefficient of `a² + a†²`; zero when the zpf equation holds.
    pub fn squeezing_residual(&self) -> f64 {
        8.0 * self.ec * self.n_zpf.powi(2) - self.ej * (-self.phi_zpf.powi(2) / 2.0).exp() * self.phi_zpf.powi(2)
    }

    /// Normal-ordering factor `e^{−φ²/2}`.
    pub fn dressing(&self) -> f64 {
        (-self.phi_zpf.powi(2) / 2.0).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonDrive {
    /// Flux modulation amplitude (rad).
    pub eps_d: f64,
    /// Drive frequency (GHz).
    pub omega_d: f64,
}

fn zpf_lhs(phi: f64) -> f64 {
    phi.powi(4) * (-phi * phi / 2.0).exp()
}

fn bare_transmon(ej: f64, ec: f64, ncut: usize) -> Result<(ndarray::Array1<f64>, Array2<f64>)> {
    let d = 2 * ncut + 1;
    let mut h = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let n = i as f64 - ncut as f64;
        h[[i, i]] = 4.0 * ec * n * n;
        if i + 1 < d {
            h[[i, i + 1]] = -ej / 2.0;
            h[[i + 1, i]] = -ej / 2.0;
        }
    }
    eigh_real(&h)
}

/// Bare energies `4EC·n² − EJ·cos φ` in the charge basis, shifted so the
/// ground state is zero.
pub fn bare_transmon_levels(ej: f64, ec: f64, ncut: usize, k: usize) -> Result<Vec<f64>> {
    let (w, _) = bare_transmon(ej, ec, ncut)?;
    Ok(w.iter().take(k).map(|e| e - w[0]).collect())
}

/// `⟨1|cos φ̂|1⟩ − ⟨0|cos φ̂|0⟩` for the exact bare transmon.
pub fn cos_shift(ej: f64, ec: f64) -> Result<f64> {
    let (_, v) = bare_transmon(ej, ec, DEFAULT_NCUT)?;
    let diag = |k: usize| -> f64 { (0..v.nrows() - 1).map(|i| v[[i, k]] * v[[i + 1, k]]).sum() };
    Ok(diag(1) - diag(0))
}

/// Solve `φ⁴·e^{−φ²/2} = 2EC/EJ` on the small-φ branch and attach the exact
/// bare transmon frequency and anharmonicity.
pub fn solve_zpf(ej: f64, ec: f64) -> Result<TransmonPert> {
    if !(ej > 0.0 && ec > 0.0 && ej.is_finite() && ec.is_finite()) {
        return param_err("transmon energies must be positive");
    }
    let rhs = 2.0 * ec / ej;
    // The left side rises monotonically on (0, 2] to 16/e².
    if ej / ec <= 1.0 || rhs >= zpf_lhs(2.0) {
        return Err(Error::Regime(format!("EJ/EC = {} admits no zero-point solution", ej / ec)));
    }
    let phi = brent(|x| Ok(zpf_lhs(x) - rhs), 0.0, 2.0, 1e-15, 0.0, 200)?;
    let levels = bare_transmon_levels(ej, ec, DEFAULT_NCUT, STORED_LEVELS)?;
    Ok(TransmonPert {
        ej,
        ec,
        phi_zpf: phi,
        n_zpf: 0.5 / phi,
        omega: levels[1],
        eta: levels[2] - 2.0 * levels[1],
        levels,
    })
}

/// Zero-point data of both transmons of a pair circuit, using the loaded
/// charging energies.
pub fn pair_perts(params: &CircuitParams) -> Result<(TransmonPert, TransmonPert)> {
    let en = derive_energies(params)?;
    Ok((solve_zpf(params.ej1, en.ec1)?, solve_zpf(params.ej2, en.ec2)?))
}

/// `cos(φ_e/2)` for a flux in Φ₀, exactly zero at half-integer fluxes.
fn cos_half(phi_e: f64) -> f64 {
    let r = phi_e.rem_euclid(2.0);
    if r == 0.5 || r == 1.5 {
        0.0
    } else {
        (PI * r).cos()
    }
}

/// `sin(φ_e/2)` for a flux in Φ₀, exactly zero at integer fluxes.
fn sin_half(phi_e: f64) -> f64 {
    let r = phi_e.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        0.0
    } else {
        (PI * r).sin()
    }
}

/// `ΣE'_{J,C}`: coupler energy sum with the normal-ordering factors of both
/// modes.
pub fn sum_ejc_primed(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert) -> f64 {
    params.sum_ejc() * p1.dressing() * p2.dressing()
}

pub fn g_eff(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> Result<f64> {
    let g = derive_energies(params)?.g;
    Ok(-sum_ejc_primed(params, p1, p2) * cos_half(phi_e1) * p1.phi_zpf * p2.phi_zpf
        + g * p1.n_zpf * p2.n_zpf)
}

pub fn zeta1(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> f64 {
    -sum_ejc_primed(params, p1, p2) * cos_half(phi_e1) * p1.phi_zpf.powi(2) * p2.phi_zpf.powi(2)
}

/// First-order ZZ of the even coupler term evaluated with exact bare
/// matrix elements of `cos φ̂` instead of the zero-point expansion.
pub fn zeta1_matrix_elements(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> Result<f64> {
    let c1 = cos_shift(p1.ej, p1.ec)?;
    let c2 = cos_shift(p2.ej, p2.ec)?;
    Ok(-params.sum_ejc() * cos_half(phi_e1) * c1 * c2)
}

/// `4g²η/(Δ² − η²)` with `η` the mean anharmonicity.
pub fn zeta2_conserving(g_eff: f64, p1: &TransmonPert, p2: &TransmonPert) -> Result<f64> {
    let delta = p1.omega - p2.omega;
    let eta = 0.5 * (p1.eta + p2.eta);
    if (delta.abs() - eta.abs()).abs() <= RESONANCE_GUARD * g_eff.abs() {
        return Err(Error::Resonance(format!("|Δ| = {} GHz too close to |η| = {} GHz", delta.abs(), eta.abs())));
    }
    Ok(4.0 * g_eff * g_eff * eta / (delta * delta - eta * eta))
}

/// Odd-parity coupler matrix elements `g_ijkl = ⟨ij|H_int|kl⟩` at leading
/// order in the zero-point fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddElements {
    pub e_sin: f64,
    pub g0100: f64,
    pub g1000: f64,
    pub g0201: f64,
    pub g2010: f64,
    pub g1110: f64,
    pub g1101: f64,
    pub g1211: f64,
    pub g2111: f64,
    pub g2001: f64,
    pub g0210: f64,
    pub g3011: f64,
    pub g0311: f64,
}

pub fn odd_elements(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> OddElements {
    let (f1, f2) = (p1.phi_zpf, p2.phi_zpf);
    let e = params.delta_ejc() * p1.dressing() * p2.dressing() * sin_half(phi_e1);
    let r2 = 2f64.sqrt();
    let r6 = 6f64.sqrt();
    OddElements {
        e_sin: e,
        g0100: e * f2,
        g1000: -e * f1,
        g0201: r2 * e * (f2 - f2.powi(3) / 2.0),
        g2010: -r2 * e * (f1 - f1.powi(3) / 2.0),
        g1110: e * f2 * (1.0 - f1 * f1),
        g1101: -e * f1 * (1.0 - f2 * f2),
        g1211: r2 * e * (1.0 - f1 * f1) * (f2 - f2.powi(3) / 2.0),
        g2111: -r2 * e * (1.0 - f2 * f2) * (f1 - f1.powi(3) / 2.0),
        g2001: e * f2 * (-r2 / 2.0 * f1 * f1),
        g0210: -e * f1 * (-r2 / 2.0 * f2 * f2),
        g3011: e * f2 * (-r6 / 2.0 * f1 * f1 + r6 / 6.0 * f1.powi(4)),
        g0311: -e * f1 * (-r6 / 2.0 * f2 * f2 + r6 / 6.0 * f2.powi(4)),
    }
}

/// Second-order ZZ from single-excitation-changing odd-parity elements, the
/// full twelve-term signed sum.
pub fn zeta2_odd(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> Result<f64> {
    let g = odd_elements(params, p1, p2, phi_e1);
    let w = |i: usize, j: usize| p1.levels[i] + p2.levels[j];
    // (weight, element, upper state, lower state)
    let terms = [
        (1.0, g.g3011, (1, 1), (3, 0)),
        (1.0, g.g0311, (1, 1), (0, 3)),
        (-1.0, g.g0210, (1, 0), (0, 2)),
        (-1.0, g.g2001, (0, 1), (2, 0)),
        (1.0, g.g2111, (1, 1), (2, 1)),
        (1.0, g.g1211, (1, 1), (1, 2)),
        (2.0, g.g1110, (1, 1), (1, 0)),
        (2.0, g.g1101, (1, 1), (0, 1)),
        (-1.0, g.g2010, (1, 0), (2, 0)),
        (-1.0, g.g0201, (0, 1), (0, 2)),
        (-2.0, g.g1000, (1, 0), (0, 0)),
        (-2.0, g.g0100, (0, 1), (0, 0)),
    ];
    let mut acc = 0.0;
    for (c, gij, a, b) in terms {
        if gij == 0.0 {
            continue;
        }
        let den = w(a.0, a.1) - w(b.0, b.1);
        if den.abs() <= RESONANCE_GUARD * gij.abs() {
            return Err(Error::Resonance(format!("ω{}{} − ω{}{} = {den} GHz", a.0, a.1, b.0, b.1)));
        }
        acc += c * gij * gij / den;
    }
    Ok(acc)
}

/// The simplified closed form valid for small zero-point fluctuations and
/// weak anharmonicity; reported alongside the full sum for comparison.
pub fn zeta2_odd_collapsed(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, phi_e1: f64) -> f64 {
    let e = odd_elements(params, p1, p2, phi_e1).e_sin;
    let (f1, f2) = (p1.phi_zpf.powi(2), p2.phi_zpf.powi(2));
    let (w1, w2) = (p1.omega, p2.omega);
    -(e * p1.phi_zpf * p2.phi_zpf).powi(2)
        * (f1 / (2.0 * w1 - w2)
            + f2 / (2.0 * w2 - w1)
            + 4.0 * f1 / w1
            + 4.0 * f2 / w2
            + 4.0 * p1.eta / (w1 * w1)
            + 4.0 * p2.eta / (w2 * w2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaPert {
    pub zeta1: f64,
    pub zeta2_c: f64,
    pub zeta2_odd: f64,
    pub zeta2_odd_collapsed: f64,
    pub g_eff: f64,
    /// ζ⁽¹⁾ from exact bare matrix elements, for comparison.
    pub zeta1_matrix: f64,
}

impl ZetaPert {
    pub fn total(&self) -> f64 {
        self.zeta1 + self.zeta2_c + self.zeta2_odd
    }
}

pub fn zeta_pert_parts(params: &CircuitParams, phi_e1: f64) -> Result<ZetaPert> {
    let (p1, p2) = pair_perts(params)?;
    zeta_pert_parts_with(params, &p1, &p2, phi_e1)
}

pub fn zeta_pert_parts_with(
    params: &CircuitParams,
    p1: &TransmonPert,
    p2: &TransmonPert,
    phi_e1: f64,
) -> Result<ZetaPert> {
    let ge = g_eff(params, p1, p2, phi_e1)?;
    Ok(ZetaPert {
        zeta1: zeta1(params, p1, p2, phi_e1),
        zeta2_c: zeta2_conserving(ge, p1, p2)?,
        zeta2_odd: zeta2_odd(params, p1, p2, phi_e1)?,
        zeta2_odd_collapsed: zeta2_odd_collapsed(params, p1, p2, phi_e1),
        g_eff: ge,
        zeta1_matrix: zeta1_matrix_elements(params, p1, p2, phi_e1)?,
    })
}

/// `ζ⁽¹⁾ + ζ⁽²⁾_c + ζ⁽²⁾_odd` (GHz).
pub fn zeta_pert(params: &CircuitParams, phi_e1: f64) -> Result<f64> {
    Ok(zeta_pert_parts(params, phi_e1)?.total())
}

/// Idle flux predicted by the perturbative ζ, same bracketing policy and
/// tolerances as the numeric search.
pub fn predict_phi_off_pert(params: &CircuitParams, bracket: (f64, f64)) -> Result<f64> {
    let (p1, p2) = pair_perts(params)?;
    let mut f = |x: f64| Ok(zeta_pert_parts_with(params, &p1, &p2, x)?.total());
    let (lo, hi) = bracket;
    let (a, b) = if f(lo)?.signum() != f(hi)?.signum() {
        (lo, hi)
    } else {
        first_sign_change(&mut f, lo, hi, BRACKET_SCAN)?
            .ok_or_else(|| Error::NoIdlePoint(format!("perturbative ζ keeps its sign on {bracket:?}")))?
    };
    brent(f, a, b, 1e-3 * FLUX_TOL, 1e-3 * ZETA_TOL, 100)
}

/// Longitudinal couplings of a chain, `(J₁₂, J₂₃)` in GHz.
pub fn chain_longitudinal(chain: &ChainParams, phi12: f64, phi23: f64) -> Result<(f64, f64, TransmonPert)> {
    let spec = compile_chain(chain)?;
    let p: Vec<TransmonPert> = (0..3)
        .map(|k| solve_zpf(chain.transmons[k].ej, spec.ec[k]))
        .collect::<Result<_>>()?;
    let d12 = chain.couplers[0].delta() * p[0].dressing() * p[1].dressing();
    let d23 = chain.couplers[1].delta() * p[1].dressing() * p[2].dressing();
    let j12 = d12 * p[0].phi_zpf.powi(2) * p[1].phi_zpf * sin_half(phi12);
    let j23 = -d23 * p[2].phi_zpf.powi(2) * p[1].phi_zpf * sin_half(phi23);
    Ok((j12, j23, p[1].clone()))
}

/// `−2·J₁₂·J₂₃/ω₂`.
pub fn zeta13_from_couplings(j12: f64, j23: f64, omega2: f64) -> f64 {
    -2.0 * j12 * j23 / omega2
}

/// Next-nearest-neighbour ZZ of a chain at the given coupler fluxes.
pub fn zeta13_pert(chain: &ChainParams, phi12: f64, phi23: f64) -> Result<f64> {
    let (j12, j23, p2) = chain_longitudinal(chain, phi12, phi23)?;
    Ok(zeta13_from_couplings(j12, j23, p2.omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectatorPert {
    pub zeta1s: f64,
    pub gamma: f64,
    pub g_para: f64,
    pub omega_s: f64,
    pub omega2: f64,
}

/// ZZ between transmon 1 and a spectator that hybridizes with transmon 2
/// through a parasitic capacitance.
pub fn zeta_spectator(sp: &SpectatorParams, phi_e1: f64) -> Result<SpectatorPert> {
    let spec = crate::circuit::compile_spectator(sp, &FluxBias::operating(phi_e1))?;
    let q2 = solve_zpf(sp.circuit.ej2, spec.ec[1])?;
    let qs = solve_zpf(sp.ej_s, spec.ec[2])?;
    let g_para = spec.g[[1, 2]] * q2.n_zpf * qs.n_zpf;
    let det = q2.omega - qs.omega;
    if det.abs() <= g_para.abs() {
        return Err(Error::Resonance(format!(
            "spectator detuning {det} GHz inside hybridization window {g_para} GHz"
        )));
    }
    let gamma = g_para / det;
    let (p1, p2) = pair_perts(&sp.circuit)?;
    Ok(SpectatorPert {
        zeta1s: zeta1(&sp.circuit, &p1, &p2, phi_e1) * gamma * gamma,
        gamma,
        g_para,
        omega_s: qs.omega,
        omega2: q2.omega,
    })
}

/// `g₂ = ε_d·ΣE'·φ₁²·φ₂/8`.
pub fn two_photon_g2(params: &CircuitParams, p1: &TransmonPert, p2: &TransmonPert, drive: &TwoPhotonDrive) -> Result<f64> {
    if !(drive.eps_d >= 0.0) {
        return param_err("drive amplitude must be non-negative");
    }
    Ok(drive.eps_d / 8.0 * sum_ejc_primed(params, p1, p2) * p1.phi_zpf.powi(2) * p2.phi_zpf)
}

/// Normal-ordered expansion coefficients: entry `[m][k]` multiplies
/// `(a†)^k·a^{m−k}`. Even `m` belong to `cos φ̂`, odd `m` to `sin φ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalOrdered {
    pub coeffs: Vec<Vec<f64>>,
}

impl NormalOrdered {
    pub fn cos(&self, m: usize, k: usize) -> f64 {
        if m % 2 == 0 {
            self.coeffs[m][k]
        } else {
            0.0
        }
    }

    pub fn sin(&self, m: usize, k: usize) -> f64 {
        if m % 2 == 1 {
            self.coeffs[m][k]
        } else {
            0.0
        }
    }
}

pub const MAX_NORMAL_ORDER: usize = 8;

pub fn normal_ordered_coeffs(phi_zpf: f64, max_order: usize) -> Result<NormalOrdered> {
    if max_order > MAX_NORMAL_ORDER {
        return param_err(format!("max_order {max_order} exceeds {MAX_NORMAL_ORDER}"));
    }
    let fact: Vec<f64> = (0..=max_order).scan(1.0, |a, k| {
        if k > 0 {
            *a *= k as f64;
        }
        Some(*a)
    }).collect();
    let pre = (-phi_zpf * phi_zpf / 2.0).exp();
    let coeffs = (0..=max_order)
        .map(|m| {
            let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
            (0..=m).map(|k| pre * sign * phi_zpf.powi(m as i32) / (fact[k] * fact[m - k])).collect()
        })
        .collect();
    Ok(NormalOrdered { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_asymptote() {
        let (ej, ec) = (1e9, 0.2);
        let p = solve_zpf(ej, ec).unwrap();
        assert_relative_eq!(p.phi_zpf, (2.0 * ec / ej).powf(0.25), max_relative = 1e-5);
        assert_relative_eq!(p.phi_zpf * p.n_zpf, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zpf_residual_and_squeezing() {
        let p = solve_zpf(11.5, 0.25).unwrap();
        assert!((zpf_lhs(p.phi_zpf) - 0.5 / 11.5).abs() < 1e-12);
        assert!(p.squeezing_residual().abs() < 1e-10);
        assert!(p.eta < 0.0);
    }

    #[test]
    fn zpf_regime_error() {
        assert!(matches!(solve_zpf(1.0, 2.0), Err(Error::Regime(_))));
    }

    #[test]
    fn zpf_matches_dense_scan() {
        let (ej, ec) = (50.0, 1.0);
        let rhs = 2.0 * ec / ej;
        let p = solve_zpf(ej, ec).unwrap();
        let n = 1_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..n {
            let x = 2.0 * i as f64 / n as f64;
            let r = (zpf_lhs(x) - rhs).abs();
            if r < best.0 {
                best = (r, x);
            }
        }
        assert!((best.1 - p.phi_zpf).abs() < 4e-6);
    }

    #[test]
    fn first_order_structure() {
        let params = CircuitParams::nominal();
        let (p1, p2) = pair_perts(&params).unwrap();
        assert_eq!(zeta1(&params, &p1, &p2, 0.5), 0.0);
        assert!(zeta1(&params, &p1, &p2, 0.0) < 0.0);
        assert!(zeta1(&params, &p1, &p2, 1.3) > 0.0);
        let g = derive_energies(&params).unwrap().g;
        assert_relative_eq!(g_eff(&params, &p1, &p2, 0.5).unwrap(), g * p1.n_zpf * p2.n_zpf, max_relative = 1e-12);
    }

    #[test]
    fn odd_vanishes_exactly() {
        let params = CircuitParams::nominal();
        let (p1, p2) = pair_perts(&params).unwrap();
        assert_eq!(zeta2_odd(&params, &p1, &p2, 0.5).unwrap(), 0.0);
        let asym = params.with_coupler_asymmetry(0.3).unwrap();
        assert_eq!(zeta2_odd(&asym, &p1, &p2, 0.0).unwrap(), 0.0);
        let z = zeta2_odd(&asym, &p1, &p2, 0.5).unwrap();
        let z2 = zeta2_odd(&params.with_coupler_asymmetry(0.6).unwrap(), &p1, &p2, 0.5).unwrap();
        assert_relative_eq!(z2 / z, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn conserving_signs() {
        let params = CircuitParams::nominal();
        let (p1, p2) = pair_perts(&params).unwrap();
        assert_eq!(zeta2_conserving(0.0, &p1, &p2).unwrap(), 0.0);
        assert!(zeta2_conserving(0.01, &p1, &p2).unwrap() < 0.0);
        let (s1, s2) = pair_perts(&CircuitParams::straddling()).unwrap();
        assert!((s1.omega - s2.omega).abs() < s1.eta.abs());
        assert!(zeta2_conserving(0.002, &s1, &s2).unwrap() > 0.0);
    }

    #[test]
    fn zeta13_bilinear_and_symmetric() {
        assert_eq!(zeta13_from_couplings(0.01, 0.02, 5.0), zeta13_from_couplings(0.02, 0.01, 5.0));
        let c = ChainParams::nominal(0.8, 0.1);
        let z1 = zeta13_pert(&c, 0.5, 0.5).unwrap();
        let z2 = zeta13_pert(&ChainParams::nominal(0.8, 0.2), 0.5, 0.5).unwrap();
        assert_relative_eq!(z2 / z1, 4.0, max_relative = 1e-9);
        assert_eq!(zeta13_pert(&ChainParams::nominal(0.8, 0.0), 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn g2_linear() {
        let params = CircuitParams::nominal();
        let (p1, p2) = pair_perts(&params).unwrap();
        let d = |e| TwoPhotonDrive { eps_d: e, omega_d: 2.0 * p1.omega - p2.omega };
        assert_eq!(two_photon_g2(&params, &p1, &p2, &d(0.0)).unwrap(), 0.0);
        let a = two_photon_g2(&params, &p1, &p2, &d(0.1)).unwrap();
        assert_relative_eq!(two_photon_g2(&params, &p1, &p2, &d(0.2)).unwrap(), 2.0 * a, max_relative = 1e-15);
    }

    #[test]
    fn g2_from_expansion_coefficients() {
        // Drive-induced sin(φ̂₂ − φ̂₁) term, amplitude ε/2 · ΣE, rotating half ε/4:
        // the a₁†²·a₂ piece of cos φ̂₁·sin φ̂₂.
        let params = CircuitParams::nominal();
        let (p1, p2) = pair_perts(&params).unwrap();
        let eps = 0.1;
        let c1 = normal_ordered_coeffs(p1.phi_zpf, 2).unwrap();
        let c2 = normal_ordered_coeffs(p2.phi_zpf, 1).unwrap();
        let oracle = eps / 4.0 * params.sum_ejc() * c1.cos(2, 2).abs() * c2.sin(1, 0);
        let g2 = two_photon_g2(&params, &p1, &p2, &TwoPhotonDrive { eps_d: eps, omega_d: 0.0 }).unwrap();
        assert_relative_eq!(g2, oracle, max_relative = 1e-14);
    }

    #[test]
    fn coefficient_table() {
        let phi = 0.37;
        let t = normal_ordered_coeffs(phi, 8).unwrap();
        let e = (-phi * phi / 2.0).exp();
        assert_eq!(t.cos(0, 0), e);
        assert_relative_eq!(t.sin(1, 0), e * phi);
        assert_relative_eq!(t.sin(1, 1), e * phi);
        assert_relative_eq!(t.cos(2, 1), -e * phi * phi);
        assert!(normal_ordered_coeffs(phi, 9).is_err());
    }

    #[test]
    fn vacuum_cosine_matches_fock_oracle() {
        let phi = 0.45;
        let d = 60;
        let mut x = Array2::<f64>::zeros((d, d));
        for n in 0..d - 1 {
            let a = phi * ((n + 1) as f64).sqrt();
            x[[n, n + 1]] = a;
            x[[n + 1, n]] = a;
        }
        let (w, v) = eigh_real(&x).unwrap();
        let vac: f64 = (0..d).map(|k| v[[0, k]] * v[[0, k]] * w[k].cos()).sum();
        let t = normal_ordered_coeffs(phi, 2).unwrap();
        assert!((vac - t.cos(0, 0)).abs() < 1e-10);
    }
}
