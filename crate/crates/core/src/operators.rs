//! Charge-basis operators and dense Hamiltonian assembly on truncated product
//! spaces.
//!
//! Convention: `e^{iφ̂}|n⟩ = |n−1⟩`, so that `[n̂, e^{iφ̂}] = −e^{iφ̂}`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::circuit::HamiltonianSpec;
use crate::error::{param_err, Error, Result};
use crate::linalg::{dagger, eigh, identity, kron, project, ONE};

pub const DEFAULT_NCUT: usize = 10;

/// Largest product-space dimension assembled densely. A dense complex matrix
/// of this size already takes ~400 MB.
pub const DEFAULT_DIM_CAP: usize = 5_000;

/// Single-mode charge-basis matrices on `n ∈ [−ncut, ncut]`.
#[derive(Debug, Clone)]
pub struct ChargeBasisOps {
    pub ncut: usize,
    pub n: Array2<C64>,
    pub exp_iphi: Array2<C64>,
    pub cos_phi: Array2<C64>,
    pub sin_phi: Array2<C64>,
}

impl ChargeBasisOps {
    pub fn dim(&self) -> usize {
        2 * self.ncut + 1
    }
}

pub fn charge_ops(ncut: usize) -> Result<ChargeBasisOps> {
    if ncut == 0 {
        return param_err("ncut must be at least 1");
    }
    let d = 2 * ncut + 1;
    let n = Array2::from_diag(&Array1::from_iter((0..d).map(|k| C64::new(k as f64 - ncut as f64, 0.0))));
    let mut e = Array2::zeros((d, d));
    for k in 1..d {
        e[[k - 1, k]] = ONE;
    }
    let ed = dagger(&e);
    let cos_phi = (&e + &ed).mapv(|z| z * 0.5);
    let sin_phi = (&e - &ed).mapv(|z| z * C64::new(0.0, -0.5));
    Ok(ChargeBasisOps { ncut, n, exp_iphi: e, cos_phi, sin_phi })
}

/// Operators of one mode expressed in some local basis: the charge operator,
/// `e^{iφ̂}`, and the mode's own Hamiltonian `h0`.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub n: Array2<C64>,
    pub exp_iphi: Array2<C64>,
    pub h0: Array2<C64>,
}

impl ModeOperators {
    pub fn dim(&self) -> usize {
        self.n.nrows()
    }

    /// `e^{i·s·φ̂}` for `s ∈ {−1, 0, 1}`.
    fn shift(&self, s: i8) -> Array2<C64> {
        match s {
            1 => self.exp_iphi.clone(),
            -1 => dagger(&self.exp_iphi),
            _ => identity(self.dim()),
        }
    }
}

/// `−EJ/2·(e^{iθ}·S + e^{−iθ}·S†)`.
fn cosine_term(ej: f64, theta: f64, s: &Array2<C64>) -> Array2<C64> {
    let ph = C64::from_polar(1.0, theta);
    let mut out = s.mapv(|z| z * ph);
    let sd = dagger(s);
    out.zip_mut_with(&sd, |a, b| *a = (*a + b * ph.conj()) * (-0.5 * ej));
    out
}

/// Local Hamiltonian of mode `m` in the charge basis: `4EC·n̂²` plus every
/// branch acting on `m` alone.
pub fn local_charge_hamiltonian(spec: &HamiltonianSpec, m: usize, ops: &ChargeBasisOps) -> Array2<C64> {
    let mut h = ops.n.dot(&ops.n).mapv(|z| z * 4.0 * spec.ec[m]);
    for b in spec.local_branches(m) {
        let s = if b.signs[m] > 0 { ops.exp_iphi.clone() } else { dagger(&ops.exp_iphi) };
        h = h + cosine_term(b.ej, b.flux_offset, &s);
    }
    h
}

/// Mode `m` in the plain charge basis; `h0` holds only the charging term.
pub fn charge_mode(spec: &HamiltonianSpec, m: usize, ncut: usize) -> Result<ModeOperators> {
    let ops = charge_ops(ncut)?;
    let h0 = ops.n.dot(&ops.n).mapv(|z| z * 4.0 * spec.ec[m]);
    Ok(ModeOperators { n: ops.n, exp_iphi: ops.exp_iphi, h0 })
}

/// Mode `m` in the basis of its lowest `levels` local eigenstates; `h0` is the
/// diagonal of local eigenvalues and already contains the mode's own
/// Josephson branches.
pub fn truncated_mode(spec: &HamiltonianSpec, m: usize, ncut: usize, levels: usize) -> Result<ModeOperators> {
    let ops = charge_ops(ncut)?;
    if levels == 0 || levels > ops.dim() {
        return param_err(format!("cannot keep {levels} levels of a {}-state charge basis", ops.dim()));
    }
    let (w, v) = eigh(&local_charge_hamiltonian(spec, m, &ops))?;
    let v = v.slice(ndarray::s![.., ..levels]).to_owned();
    let h0 = Array2::from_diag(&w.slice(ndarray::s![..levels]).mapv(|x| C64::new(x, 0.0)));
    Ok(ModeOperators { n: project(&ops.n, &v), exp_iphi: project(&ops.exp_iphi, &v), h0 })
}

/// Kronecker product over modes of the supplied factors (identity where
/// `None`).
pub fn embed(factors: &[Option<Array2<C64>>], dims: &[usize]) -> Array2<C64> {
    let mut out: Option<Array2<C64>> = None;
    for (f, &d) in factors.iter().zip(dims) {
        let f = f.clone().unwrap_or_else(|| identity(d));
        out = Some(match out {
            None => f,
            Some(acc) => kron(&acc, &f),
        });
    }
    out.unwrap_or_else(|| identity(1))
}

/// One flux-dependent Josephson term: `−EJ·cos(θ + …)` represented by the
/// fixed operator product `S = ∏ e^{i·sᵢ·φ̂ᵢ}`.
#[derive(Debug, Clone)]
pub struct BranchTerm {
    pub branch: usize,
    pub ej: f64,
    pub op: Array2<C64>,
}

/// A Hamiltonian split into a flux-independent part and branch terms whose
/// offsets can be supplied per evaluation.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub dims: Vec<usize>,
    pub constant: Array2<C64>,
    pub branches: Vec<BranchTerm>,
}

impl HamiltonianTerms {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// `offsets` is indexed by branch position in the originating spec.
    pub fn evaluate(&self, offsets: &[f64]) -> Array2<C64> {
        let mut h = self.constant.clone();
        let n = h.nrows();
        for t in &self.branches {
            let ph = C64::from_polar(-0.5 * t.ej, offsets[t.branch]);
            for i in 0..n {
                for j in 0..n {
                    h[[i, j]] += ph * t.op[[i, j]] + (ph * t.op[[j, i]]).conj();
                }
            }
        }
        h
    }

    /// Express every term in the basis given by the columns of `v`.
    pub fn project(&self, v: &Array2<C64>) -> HamiltonianTerms {
        HamiltonianTerms {
            dims: vec![v.ncols()],
            constant: project(&self.constant, v),
            branches: self
                .branches
                .iter()
                .map(|t| BranchTerm { branch: t.branch, ej: t.ej, op: project(&t.op, v) })
                .collect(),
        }
    }
}

/// Assemble the terms of `spec` on the product of the given mode bases. With
/// `folded = true` single-mode branches are assumed to be contained in each
/// mode's `h0` and are skipped.
pub fn assemble_terms(
    spec: &HamiltonianSpec,
    modes: &[ModeOperators],
    folded: bool,
    cap: usize,
) -> Result<HamiltonianTerms> {
    spec.validate()?;
    if modes.len() != spec.n_modes {
        return param_err("one mode basis per mode required");
    }
    let dims: Vec<usize> = modes.iter().map(|m| m.dim()).collect();
    let dim = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let nm = spec.n_modes;
    let single = |k: usize, a: &Array2<C64>| {
        let mut f = vec![None; nm];
        f[k] = Some(a.clone());
        embed(&f, &dims)
    };
    let mut constant = Array2::<C64>::zeros((dim, dim));
    for (k, m) in modes.iter().enumerate() {
        constant = constant + single(k, &m.h0);
    }
    for i in 0..nm {
        for j in i + 1..nm {
            let g = spec.g[[i, j]];
            if g != 0.0 {
                let mut f = vec![None; nm];
                f[i] = Some(modes[i].n.clone());
                f[j] = Some(modes[j].n.clone());
                constant = constant + embed(&f, &dims).mapv(|z| z * g);
            }
        }
    }
    let mut branches = Vec::new();
    for (bi, b) in spec.branches.iter().enumerate() {
        if folded && b.support().count() == 1 {
            continue;
        }
        let f: Vec<Option<Array2<C64>>> = b
            .signs
            .iter()
            .zip(modes)
            .map(|(&s, m)| if s == 0 { None } else { Some(m.shift(s)) })
            .collect();
        branches.push(BranchTerm { branch: bi, ej: b.ej, op: embed(&f, &dims) });
    }
    Ok(HamiltonianTerms { dims, constant, branches })
}

pub fn branch_offsets(spec: &HamiltonianSpec) -> Vec<f64> {
    spec.branches.iter().map(|b| b.flux_offset).collect()
}

pub fn assemble_hamiltonian_capped(spec: &HamiltonianSpec, ncut: usize, cap: usize) -> Result<Array2<C64>> {
    let modes = (0..spec.n_modes).map(|m| charge_mode(spec, m, ncut)).collect::<Result<Vec<_>>>()?;
    let terms = assemble_terms(spec, &modes, false, cap)?;
    Ok(terms.evaluate(&branch_offsets(spec)))
}

/// Full charge-basis Hamiltonian of `spec` (GHz).
pub fn assemble_hamiltonian(spec: &HamiltonianSpec, ncut: usize) -> Result<Array2<C64>> {
    assemble_hamiltonian_capped(spec, ncut, DEFAULT_DIM_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{compile_two_qubit, Branch, CircuitParams, FluxBias};
    use crate::linalg::{eigh, hermiticity_defect};

    #[test]
    fn ncut_one() {
        let ops = charge_ops(1).unwrap();
        let diag: Vec<f64> = ops.n.diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![-1.0, 0.0, 1.0]);
        assert!(charge_ops(0).is_err());
    }

    #[test]
    fn shift_commutator() {
        let ops = charge_ops(4).unwrap();
        let c = ops.n.dot(&ops.exp_iphi) - ops.exp_iphi.dot(&ops.n);
        let want = ops.exp_iphi.mapv(|z| -z);
        assert!((c - want).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn trig_hermitian() {
        let ops = charge_ops(3).unwrap();
        assert!(hermiticity_defect(&ops.cos_phi) < 1e-15);
        assert!(hermiticity_defect(&ops.sin_phi) < 1e-15);
        let p = ops.exp_iphi.dot(&dagger(&ops.exp_iphi));
        // identity except the truncation corner
        for k in 0..ops.dim() - 1 {
            assert!((p[[k, k]] - ONE).norm() < 1e-15);
        }
    }

    fn single_transmon(ej: f64, ec: f64) -> HamiltonianSpec {
        HamiltonianSpec {
            n_modes: 1,
            ec: vec![ec],
            g: Array2::zeros((1, 1)),
            branches: vec![Branch { ej, signs: vec![1], flux_offset: 0.0 }],
        }
    }

    #[test]
    fn transmon_converged_at_ncut_10() {
        let spec = single_transmon(46.0 * 0.25, 0.25);
        let gap = |nc| {
            let (w, _) = eigh(&assemble_hamiltonian(&spec, nc).unwrap()).unwrap();
            w[1] - w[0]
        };
        assert!((gap(10) - gap(30)).abs() < 1e-9);
    }

    #[test]
    fn diagonal_case() {
        let mut spec = compile_two_qubit(&CircuitParams::nominal(), &FluxBias::default()).unwrap();
        for b in spec.branches.iter_mut() {
            b.ej = 0.0;
        }
        let nc = 3;
        let h = assemble_hamiltonian(&spec, nc).unwrap();
        let g = spec.g[[0, 1]];
        let mut k = 0;
        for m1 in -(nc as i64)..=nc as i64 {
            for m2 in -(nc as i64)..=nc as i64 {
                let want = 4.0 * (spec.ec[0] * (m1 * m1) as f64 + spec.ec[1] * (m2 * m2) as f64) + g * (m1 * m2) as f64;
                assert!((h[[k, k]].re - want).abs() < 1e-12);
                k += 1;
            }
        }
        assert!(h.iter().enumerate().all(|(i, z)| i % (h.nrows() + 1) == 0 || z.norm() == 0.0));
    }

    #[test]
    fn dimension_guard() {
        let spec = compile_two_qubit(&CircuitParams::nominal(), &FluxBias::default()).unwrap();
        let r = assemble_hamiltonian_capped(&spec, 10, 400);
        assert!(matches!(r, Err(Error::DimensionOverflow { dim: 441, cap: 400 })));
    }
}
