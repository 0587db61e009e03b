//! Physical circuit descriptions and their compilation into mode-level
//! Hamiltonian specifications.
//!
//! Energies are cyclic frequencies `E/h` in GHz, capacitances in fF (the
//! parasitic capacitance of the spectator circuit is given in aF), external
//! fluxes in units of the flux quantum. Fluxes are converted to radians only
//! when they become branch offsets.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::linalg::{spd_inverse, wrap_angle};

/// `e²/h` expressed in GHz·fF (exact SI 2019 values of `e` and `h`).
pub const E2_OVER_H: f64 = 38.740_458_649_318_25;

/// Capacitance matrices with a larger 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Two transmons joined by a two-junction SQUID coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Josephson energy of transmon 1 (GHz).
    pub ej1: f64,
    /// Josephson energy of transmon 2 (GHz).
    pub ej2: f64,
    /// Shunt capacitance of transmon 1 (fF).
    pub c1: f64,
    /// Shunt capacitance of transmon 2 (fF).
    pub c2: f64,
    /// Josephson energy of the top coupler junction (GHz).
    pub ejc1: f64,
    /// Josephson energy of the bottom coupler junction (GHz).
    pub ejc2: f64,
    /// Capacitance of the top coupler junction (fF).
    pub cc1: f64,
    /// Capacitance of the bottom coupler junction (fF).
    pub cc2: f64,
}

impl CircuitParams {
    /// The nominal far-detuned device: 4.49 GHz and 6.33 GHz transmons with a
    /// symmetric 2×0.40 GHz coupler.
    pub fn nominal() -> Self {
        CircuitParams {
            ej1: 11.5,
            ej2: 20.0,
            c1: 77.5,
            c2: 69.2,
            ejc1: 0.40,
            ejc2: 0.40,
            cc1: 0.78,
            cc2: 0.78,
        }
    }

    /// Near-resonant pair in the straddling regime (`|Δ| < |η|`), ω₂ ≈ 4.67
    /// GHz, with a 2×0.275 GHz coupler whose capacitance minimises the
    /// hybridization at zero flux.
    pub fn straddling() -> Self {
        CircuitParams {
            ej2: 11.0,
            ejc1: 0.275,
            ejc2: 0.275,
            cc1: 1.57,
            cc2: 1.57,
            ..Self::nominal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ej1", self.ej1), ("ej2", self.ej2), ("c1", self.c1), ("c2", self.c2)] {
            if !(v.is_finite() && v > 0.0) {
                return param_err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("ejc1", self.ejc1), ("ejc2", self.ejc2), ("cc1", self.cc1), ("cc2", self.cc2)] {
            if !(v.is_finite() && v >= 0.0) {
                return param_err(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Total coupler junction capacitance `C_C`.
    pub fn cc(&self) -> f64 {
        self.cc1 + self.cc2
    }

    /// `C² = C1·C2 + C_C·(C1 + C2)`.
    pub fn c_squared(&self) -> f64 {
        self.c1 * self.c2 + self.cc() * (self.c1 + self.c2)
    }

    /// Junction capacitance asymmetry `d_C`; zero for a coupler without
    /// capacitance.
    pub fn capacitance_asymmetry(&self) -> f64 {
        let cc = self.cc();
        if cc == 0.0 {
            0.0
        } else {
            (self.cc1 - self.cc2) / cc
        }
    }

    pub fn sum_ejc(&self) -> f64 {
        self.ejc1 + self.ejc2
    }

    pub fn delta_ejc(&self) -> f64 {
        self.ejc1 - self.ejc2
    }

    /// Redistribute the coupler junctions for a fractional asymmetry `d`
    /// (`ΔE/ΣE`), applying the same asymmetry to the junction capacitances
    /// while holding `ΣE_{J,C}` and `C_C` fixed. `d = ±1` leaves a single
    /// junction.
    pub fn with_coupler_asymmetry(&self, d: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&d) {
            return param_err(format!("asymmetry must lie in [-1, 1], got {d}"));
        }
        let sum = self.sum_ejc();
        let cc = self.cc();
        Ok(CircuitParams {
            ejc1: 0.5 * sum * (1.0 + d),
            ejc2: 0.5 * sum * (1.0 - d),
            cc1: 0.5 * cc * (1.0 + d),
            cc2: 0.5 * cc * (1.0 - d),
            ..*self
        })
    }

    /// Scale both coupler junctions (energy and capacitance together, i.e. at
    /// fixed plasma frequency) so that `ΣE_{J,C}` equals `sum`.
    pub fn with_coupler_sum(&self, sum: f64) -> Result<Self> {
        if !(sum >= 0.0) {
            return param_err(format!("coupler energy must be non-negative, got {sum}"));
        }
        let old = self.sum_ejc();
        if old == 0.0 {
            return param_err("cannot rescale a coupler with zero junction energy");
        }
        let s = sum / old;
        Ok(CircuitParams {
            ejc1: self.ejc1 * s,
            ejc2: self.ejc2 * s,
            cc1: self.cc1 * s,
            cc2: self.cc2 * s,
            ..*self
        })
    }
}

/// External fluxes through the inner (`phi_e1`) and outer (`phi_e2`) loops, in
/// flux quanta.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluxBias {
    pub phi_e1: f64,
    pub phi_e2: f64,
}

impl FluxBias {
    pub fn new(phi_e1: f64, phi_e2: f64) -> Self {
        FluxBias { phi_e1, phi_e2 }
    }

    /// Bias on the operating condition `φ_e1 + 2φ_e2 = 0`.
    pub fn operating(phi_e1: f64) -> Self {
        FluxBias { phi_e1, phi_e2: -0.5 * phi_e1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi_e1.is_finite() && self.phi_e2.is_finite()) {
            return param_err("flux bias must be finite");
        }
        Ok(())
    }
}

/// Flux parameterisation of the coupler with a grounded inductive network: an
/// inner loop and two outer loops closed through inductors of energies `el`
/// and `el_prime`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradiometricBias {
    pub phi_ei: f64,
    pub phi_eo: f64,
    pub phi_eo_prime: f64,
    pub el: f64,
    pub el_prime: f64,
}

impl GradiometricBias {
    /// Symmetric inductors with a differential outer flux `delta_o`
    /// (`Φ_eo − Φ_eo'`), split evenly between the two outer loops.
    pub fn symmetric(phi_ei: f64, delta_o: f64) -> Self {
        GradiometricBias {
            phi_ei,
            phi_eo: 0.5 * delta_o,
            phi_eo_prime: -0.5 * delta_o,
            el: 1.0,
            el_prime: 1.0,
        }
    }

    pub fn delta_outer(&self) -> f64 {
        self.phi_eo - self.phi_eo_prime
    }
}

/// Charging energies and charge coupling of the two-transmon circuit (GHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargingEnergies {
    pub ec1: f64,
    pub ec2: f64,
    pub g: f64,
    pub d_c: f64,
}

/// External flux drops (radians) across the coupler junctions and the two
/// transmon junctions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxDrops {
    pub top: f64,
    pub bot: f64,
    pub j1: f64,
    pub j2: f64,
}

/// One Josephson branch: contributes `−EJ·cos(Σ signs_i·φ_i + flux_offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub ej: f64,
    pub signs: Vec<i8>,
    pub flux_offset: f64,
}

impl Branch {
    fn new(ej: f64, signs: Vec<i8>, offset: f64) -> Self {
        Branch { ej, signs, flux_offset: wrap_angle(offset) }
    }

    /// Indices of modes the branch acts on.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.signs.iter().enumerate().filter(|(_, s)| **s != 0).map(|(i, _)| i)
    }
}

/// Mode-level Hamiltonian: charging energies, pairwise charge couplings and
/// Josephson branches.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub n_modes: usize,
    pub ec: Vec<f64>,
    pub g: Array2<f64>,
    pub branches: Vec<Branch>,
}

impl HamiltonianSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_modes;
        if self.ec.len() != n || self.g.dim() != (n, n) {
            return param_err("HamiltonianSpec dimensions disagree with n_modes");
        }
        if self.ec.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return param_err("charging energies must be positive");
        }
        for i in 0..n {
            if self.g[[i, i]] != 0.0 {
                return param_err("charge coupling matrix must have zero diagonal");
            }
            for j in 0..i {
                if (self.g[[i, j]] - self.g[[j, i]]).abs() > 1e-15 * self.g[[i, j]].abs().max(1.0) {
                    return param_err("charge coupling matrix must be symmetric");
                }
            }
        }
        for b in &self.branches {
            if b.signs.len() != n || b.signs.iter().any(|s| s.abs() > 1) {
                return param_err("branch signs must be in {-1, 0, 1} for every mode");
            }
            if !(b.flux_offset > -PI - 1e-15 && b.flux_offset <= PI + 1e-15) {
                return param_err("branch flux offset must be reduced to (-π, π]");
            }
        }
        for m in 0..n {
            if !self.branches.iter().any(|b| b.signs[m] != 0) {
                return param_err(format!("mode {m} appears in no Josephson branch"));
            }
        }
        Ok(())
    }

    /// Single-mode part of mode `m`: its charging energy plus every branch
    /// acting on `m` alone.
    pub fn local_branches(&self, m: usize) -> impl Iterator<Item = &Branch> {
        self.branches
            .iter()
            .filter(move |b| b.signs[m] != 0 && b.support().count() == 1)
    }
}

pub fn derive_energies(params: &CircuitParams) -> Result<ChargingEnergies> {
    params.validate()?;
    let cc = params.cc();
    let c2 = params.c_squared();
    Ok(ChargingEnergies {
        ec1: E2_OVER_H * (params.c2 + cc) / (2.0 * c2),
        ec2: E2_OVER_H * (params.c1 + cc) / (2.0 * c2),
        g: 4.0 * E2_OVER_H * cc / c2,
        d_c: params.capacitance_asymmetry(),
    })
}

/// Distribute the loop fluxes over the junctions with the capacitive voltage
/// divider that removes all `Q·dΦ/dt` terms.
pub fn flux_drops(params: &CircuitParams, bias: &FluxBias) -> Result<FluxDrops> {
    params.validate()?;
    bias.validate()?;
    let cc = params.cc();
    let c2 = params.c_squared();
    let d = params.capacitance_asymmetry();
    let (f1, f2) = (bias.phi_e1, bias.phi_e2);
    let x = (d + 1.0) * f1 + 2.0 * f2;
    let r = params.c1 * params.c2 / c2;
    let bot = (r - 1.0) * 0.5 * (d + 1.0) * f1 + r * f2;
    let top = bot + f1;
    let j1 = params.c2 * cc / (2.0 * c2) * x;
    let j2 = params.c1 * cc / (2.0 * c2) * x;
    Ok(FluxDrops { top: TAU * top, bot: TAU * bot, j1: TAU * j1, j2: TAU * j2 })
}

pub fn gradiometric_to_bias(grad: &GradiometricBias) -> Result<FluxBias> {
    if !(grad.el > 0.0 && grad.el_prime > 0.0) {
        return param_err("inductive energies must be positive");
    }
    let total = grad.phi_ei + grad.phi_eo + grad.phi_eo_prime;
    let share = grad.el_prime / (grad.el + grad.el_prime);
    Ok(FluxBias { phi_e1: grad.phi_ei, phi_e2: grad.phi_eo - share * total })
}

pub fn compile_two_qubit(params: &CircuitParams, bias: &FluxBias) -> Result<HamiltonianSpec> {
    let en = derive_energies(params)?;
    let drops = flux_drops(params, bias)?;
    let mut g = Array2::zeros((2, 2));
    g[[0, 1]] = en.g;
    g[[1, 0]] = en.g;
    let branches = vec![
        Branch::new(params.ej1, vec![1, 0], drops.j1),
        // −EJ2·cos(−φ2 + Φ_J2)
        Branch::new(params.ej2, vec![0, -1], drops.j2),
        Branch::new(params.ejc1, vec![-1, 1], drops.top),
        Branch::new(params.ejc2, vec![-1, 1], drops.bot),
    ];
    let spec = HamiltonianSpec { n_modes: 2, ec: vec![en.ec1, en.ec2], g, branches };
    spec.validate()?;
    Ok(spec)
}

/// Charging energies and couplings from a Maxwell capacitance matrix (fF).
fn charge_terms(cmat: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let (inv, cond) = spd_inverse(cmat)?;
    if cond > MAX_CONDITION {
        return Err(Error::Parameter(format!(
            "capacitance matrix condition number {cond:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    let n = cmat.nrows();
    let ec = (0..n).map(|i| 0.5 * E2_OVER_H * inv[[i, i]]).collect();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                g[[i, j]] = 4.0 * E2_OVER_H * 0.5 * (inv[[i, j]] + inv[[j, i]]);
            }
        }
    }
    Ok((ec, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmon {
    pub ej: f64,
    pub c: f64,
}

/// The two junctions of one SQUID coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerJunctions {
    pub ej_top: f64,
    pub ej_bot: f64,
    pub c_top: f64,
    pub c_bot: f64,
}

impl CouplerJunctions {
    /// Junction pair with total energy `sum`, total capacitance `c_total` and
    /// a shared energy/capacitance asymmetry `d`.
    pub fn with_asymmetry(sum: f64, c_total: f64, d: f64) -> Self {
        CouplerJunctions {
            ej_top: 0.5 * sum * (1.0 + d),
            ej_bot: 0.5 * sum * (1.0 - d),
            c_top: 0.5 * c_total * (1.0 + d),
            c_bot: 0.5 * c_total * (1.0 - d),
        }
    }

    pub fn sum(&self) -> f64 {
        self.ej_top + self.ej_bot
    }

    pub fn delta(&self) -> f64 {
        self.ej_top - self.ej_bot
    }

    pub fn capacitance(&self) -> f64 {
        self.c_top + self.c_bot
    }
}

/// Three transmons in a line, nearest neighbours joined by SQUID couplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub transmons: [Transmon; 3],
    /// Couplers between transmons (1,2) and (2,3).
    pub couplers: [CouplerJunctions; 2],
    pub biases: [FluxBias; 2],
}

impl ChainParams {
    /// Nominal pair extended by a third transmon at ~9.65 GHz, with identical
    /// couplers of total energy `sum` and asymmetry `d`. Coupler capacitance
    /// scales with `sum` so the junction plasma frequency stays fixed.
    pub fn nominal(sum: f64, d: f64) -> Self {
        let p = CircuitParams::nominal();
        let cpl = CouplerJunctions::with_asymmetry(sum, p.cc() * sum / p.sum_ejc(), d);
        ChainParams {
            transmons: [
                Transmon { ej: p.ej1, c: p.c1 },
                Transmon { ej: p.ej2, c: p.c2 },
                Transmon { ej: 50.0, c: p.c1 },
            ],
            couplers: [cpl, cpl],
            biases: [FluxBias::operating(0.5), FluxBias::operating(0.5)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.transmons {
            if !(t.ej > 0.0 && t.c > 0.0 && t.ej.is_finite() && t.c.is_finite()) {
                return param_err("chain transmon energies and capacitances must be positive");
            }
        }
        for c in &self.couplers {
            if [c.ej_top, c.ej_bot, c.c_top, c.c_bot].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return param_err("chain coupler junction values must be non-negative");
            }
        }
        for b in &self.biases {
            b.validate()?;
        }
        Ok(())
    }

    /// The pair `(i, i+1)` seen as an isolated two-transmon circuit.
    pub fn pair(&self, coupler: usize) -> CircuitParams {
        let (a, b) = (self.transmons[coupler], self.transmons[coupler + 1]);
        let c = self.couplers[coupler];
        CircuitParams {
            ej1: a.ej,
            ej2: b.ej,
            c1: a.c,
            c2: b.c,
            ejc1: c.ej_top,
            ejc2: c.ej_bot,
            cc1: c.c_top,
            cc2: c.c_bot,
        }
    }
}

/// The chain's coupler branches carry the loop fluxes directly (top junction
/// `φ_e1 + φ_e2`, bottom junction `φ_e2`); transmon junctions carry none.
pub fn compile_chain(chain: &ChainParams) -> Result<HamiltonianSpec> {
    chain.validate()?;
    let t = &chain.transmons;
    let (c12, c23) = (chain.couplers[0].capacitance(), chain.couplers[1].capacitance());
    let mut cmat = Array2::zeros((3, 3));
    cmat[[0, 0]] = t[0].c + c12;
    cmat[[1, 1]] = t[1].c + c12 + c23;
    cmat[[2, 2]] = t[2].c + c23;
    cmat[[0, 1]] = -c12;
    cmat[[1, 0]] = -c12;
    cmat[[1, 2]] = -c23;
    cmat[[2, 1]] = -c23;
    let (ec, g) = charge_terms(&cmat)?;
    let mut branches = vec![
        Branch::new(t[0].ej, vec![1, 0, 0], 0.0),
        Branch::new(t[1].ej, vec![0, 1, 0], 0.0),
        Branch::new(t[2].ej, vec![0, 0, 1], 0.0),
    ];
    for (k, (cpl, bias)) in chain.couplers.iter().zip(chain.biases.iter()).enumerate() {
        let mut signs = vec![0i8; 3];
        signs[k] = -1;
        signs[k + 1] = 1;
        let top = TAU * (bias.phi_e1 + bias.phi_e2);
        let bot = TAU * bias.phi_e2;
        branches.push(Branch::new(cpl.ej_top, signs.clone(), top));
        branches.push(Branch::new(cpl.ej_bot, signs, bot));
    }
    let spec = HamiltonianSpec { n_modes: 3, ec, g, branches };
    spec.validate()?;
    Ok(spec)
}

/// A coupled pair plus a spectator transmon capacitively attached to
/// transmon 2 through a parasitic capacitance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectatorParams {
    pub circuit: CircuitParams,
    pub ej_s: f64,
    pub c_s: f64,
    /// Parasitic capacitance between transmon 2 and the spectator (aF).
    pub c_para: f64,
}

impl SpectatorParams {
    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        if !(self.ej_s > 0.0 && self.c_s > 0.0) {
            return param_err("spectator energy and capacitance must be positive");
        }
        if !(self.c_para >= 0.0 && self.c_para.is_finite()) {
            return param_err("parasitic capacitance must be non-negative");
        }
        Ok(())
    }

    pub fn capacitance_matrix(&self) -> Array2<f64> {
        let p = &self.circuit;
        let cp = self.c_para * 1e-3;
        let cc = p.cc();
        let mut m = Array2::zeros((3, 3));
        m[[0, 0]] = p.c1 + cc;
        m[[1, 1]] = p.c2 + cc + cp;
        m[[2, 2]] = self.c_s + cp;
        m[[0, 1]] = -cc;
        m[[1, 0]] = -cc;
        m[[1, 2]] = -cp;
        m[[2, 1]] = -cp;
        m
    }
}

pub fn compile_spectator(sp: &SpectatorParams, bias: &FluxBias) -> Result<HamiltonianSpec> {
    sp.validate()?;
    let (ec, g) = charge_terms(&sp.capacitance_matrix())?;
    let pair = compile_two_qubit(&sp.circuit, bias)?;
    let mut branches: Vec<Branch> = pair
        .branches
        .into_iter()
        .map(|mut b| {
            b.signs.push(0);
            b
        })
        .collect();
    branches.push(Branch::new(sp.ej_s, vec![0, 0, 1], 0.0));
    let spec = HamiltonianSpec { n_modes: 3, ec, g, branches };
    spec.validate()?;
    Ok(spec)
}
