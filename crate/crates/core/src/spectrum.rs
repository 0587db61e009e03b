//! Diagonalization, dressed-state labeling, ZZ rates, idle-point search and
//! flux sweeps.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{s, Array1, Array2, Array3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{compile_chain, compile_two_qubit, ChainParams, CircuitParams, FluxBias, HamiltonianSpec};
use crate::error::{param_err, Error, Result};
use crate::linalg::{dagger, eigh, eigh_lowest};
use crate::operators::{
    assemble_terms, charge_mode, charge_ops, local_charge_hamiltonian, truncated_mode, HamiltonianTerms,
    ModeOperators, DEFAULT_DIM_CAP, DEFAULT_NCUT,
};

pub const DEFAULT_LEVELS_TWO_MODE: usize = 40;
pub const DEFAULT_LEVELS_THREE_MODE: usize = 60;
/// Local levels kept per mode when three-mode circuits are assembled in the
/// product of truncated single-mode eigenbases.
pub const DEFAULT_MODE_LEVELS: usize = 8;
pub const ZETA_TOL: f64 = 1e-7;
pub const FLUX_TOL: f64 = 1e-6;

/// Per-mode bare eigenbases, columns expressed in the working basis of each
/// mode.
#[derive(Debug, Clone)]
pub struct BareBasis {
    pub energies: Vec<Array1<f64>>,
    pub vectors: Vec<Array2<C64>>,
}

impl BareBasis {
    pub fn n_modes(&self) -> usize {
        self.vectors.len()
    }

    /// Bare product-state energy `Σ Eᵢ(mᵢ)`.
    pub fn tuple_energy(&self, t: &[usize]) -> f64 {
        t.iter().zip(&self.energies).map(|(&m, e)| e[m]).sum()
    }

    /// Transition frequency `E(m) − E(0)` of mode `i`.
    pub fn frequency(&self, i: usize, m: usize) -> f64 {
        self.energies[i][m] - self.energies[i][0]
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<C64>,
    pub labels: BTreeMap<Vec<usize>, usize>,
    pub overlaps: BTreeMap<Vec<usize>, f64>,
}

impl Spectrum {
    pub fn index(&self, t: &[usize]) -> Result<usize> {
        self.labels.get(t).copied().ok_or_else(|| Error::MissingLabel(t.to_vec()))
    }

    pub fn energy(&self, t: &[usize]) -> Result<f64> {
        Ok(self.eigenvalues[self.index(t)?])
    }

    pub fn overlap(&self, t: &[usize]) -> Result<f64> {
        self.overlaps.get(t).copied().ok_or_else(|| Error::MissingLabel(t.to_vec()))
    }

    /// Lowest `k` excitation energies `E_i − E_0`, `i = 1..=k`.
    pub fn excitations(&self, k: usize) -> Vec<f64> {
        let e0 = self.eigenvalues[0];
        self.eigenvalues.iter().skip(1).take(k).map(|e| e - e0).collect()
    }
}

/// Every tuple in `{0,1}^n`, in lexicographic order.
pub fn computational_tuples(n: usize) -> Vec<Vec<usize>> {
    (0..1usize << n)
        .map(|b| (0..n).map(|k| (b >> (n - 1 - k)) & 1).collect())
        .collect()
}

pub fn diagonalize(h: &Array2<C64>, n_levels: usize) -> Result<Spectrum> {
    let dim = h.nrows();
    if n_levels == 0 || n_levels > dim {
        return param_err(format!("n_levels {n_levels} not in 1..={dim}"));
    }
    let (w, v) = eigh_lowest(h, n_levels)?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(Spectrum {
        eigenvalues: w,
        eigenvectors: v,
        labels: BTreeMap::new(),
        overlaps: BTreeMap::new(),
    })
}

/// Which bare product states compete for dressed labels.
#[derive(Debug, Clone, Copy)]
pub struct LabelOptions {
    pub per_mode: usize,
    pub max_excitation: usize,
    pub min_overlap: f64,
    /// Bare states closer than this (GHz) to a computational state count as
    /// degenerate.
    pub degeneracy_tol: f64,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions { per_mode: 6, max_excitation: 6, min_overlap: 0.5, degeneracy_tol: 1e-6 }
    }
}

fn bare_tuples(n_modes: usize, opts: &LabelOptions) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n_modes {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..opts.per_mode).map(move |m| {
                    let mut u = t.clone();
                    u.push(m);
                    u
                })
            })
            .collect();
    }
    out.retain(|t| t.iter().sum::<usize>() <= opts.max_excitation);
    out
}

/// Amplitudes `⟨m₁m₂…|ψ⟩` of one dressed vector on every bare product state,
/// flattened row-major over `(m₁, m₂, …)`.
pub fn bare_amplitudes(psi: ndarray::ArrayView1<C64>, bare: &BareBasis) -> Array1<C64> {
    let mut data = psi.to_owned();
    let mut shape: Vec<usize> = bare.vectors.iter().map(|v| v.nrows()).collect();
    for (m, v) in bare.vectors.iter().enumerate() {
        let pre: usize = shape[..m].iter().product();
        let post: usize = shape[m + 1..].iter().product();
        let d = shape[m];
        let vd = dagger(v);
        let t = Array3::from_shape_vec((pre, d, post), data.to_vec()).expect("shape");
        let mut out = Array3::<C64>::zeros((pre, v.ncols(), post));
        for p in 0..pre {
            let r = vd.dot(&t.slice(s![p, .., ..]));
            out.slice_mut(s![p, .., ..]).assign(&r);
        }
        shape[m] = v.ncols();
        data = Array1::from_iter(out.into_iter());
    }
    data
}

fn flat_index(t: &[usize], widths: &[usize]) -> usize {
    t.iter().zip(widths).fold(0, |acc, (&m, &w)| acc * w + m)
}

/// Assign bare labels to dressed states by descending overlap, each dressed
/// state and each bare tuple used at most once.
pub fn label_dressed(mut spec: Spectrum, bare: &BareBasis, opts: &LabelOptions) -> Result<Spectrum> {
    let n = bare.n_modes();
    let dims: Vec<usize> = bare.vectors.iter().map(|v| v.nrows()).collect();
    if dims.iter().product::<usize>() != spec.eigenvectors.nrows() {
        return param_err("bare basis dimensions do not match the dressed eigenvectors");
    }
    let per_mode = bare.vectors.iter().map(|v| v.ncols()).min().unwrap_or(0).min(opts.per_mode);
    let opts = LabelOptions { per_mode, ..*opts };
    let tuples = bare_tuples(n, &opts);
    let comp = computational_tuples(n);
    if per_mode < 2 {
        return param_err("at least two bare levels per mode are needed for labeling");
    }
    for c in &comp {
        let ec = bare.tuple_energy(c);
        if let Some(t) = tuples.iter().find(|t| *t != c && (bare.tuple_energy(t) - ec).abs() < opts.degeneracy_tol) {
            return Err(Error::AmbiguousLabel(format!(
                "bare states {c:?} and {t:?} are degenerate"
            )));
        }
    }
    let widths: Vec<usize> = bare.vectors.iter().map(|v| v.ncols()).collect();
    let mut cand = Vec::with_capacity(spec.eigenvalues.len() * tuples.len());
    for k in 0..spec.eigenvalues.len() {
        let amp = bare_amplitudes(spec.eigenvectors.column(k), bare);
        for (ti, t) in tuples.iter().enumerate() {
            cand.push((amp[flat_index(t, &widths)].norm_sqr(), k, ti));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_k = vec![false; spec.eigenvalues.len()];
    let mut used_t = vec![false; tuples.len()];
    spec.labels.clear();
    spec.overlaps.clear();
    for (p, k, ti) in cand {
        if used_k[k] || used_t[ti] || p <= 0.0 {
            continue;
        }
        used_k[k] = true;
        used_t[ti] = true;
        spec.labels.insert(tuples[ti].clone(), k);
        spec.overlaps.insert(tuples[ti].clone(), p);
    }
    for c in &comp {
        let p = spec.overlap(c)?;
        if p < opts.min_overlap {
            return Err(Error::AmbiguousLabel(format!(
                "computational state {c:?} has maximal overlap {p:.4}"
            )));
        }
    }
    Ok(spec)
}

fn pair_tuple(n: usize, pair: (usize, usize), a: usize, b: usize) -> Vec<usize> {
    let mut t = vec![0; n];
    t[pair.0] = a;
    t[pair.1] = b;
    t
}

/// `ζ = E₀₀ − E₀₁ − E₁₀ + E₁₁` for modes `pair`, all others in the ground
/// state.
pub fn zz_rate(spec: &Spectrum, n_modes: usize, pair: (usize, usize)) -> Result<f64> {
    let e = |a, b| spec.energy(&pair_tuple(n_modes, pair, a, b));
    Ok(e(0, 0)? - e(0, 1)? - e(1, 0)? + e(1, 1)?)
}

/// `Σ (1 − P) / 2ⁿ` over the computational states.
pub fn avg_hybridization(spec: &Spectrum, n_modes: usize) -> Result<f64> {
    let comp = computational_tuples(n_modes);
    let mut acc = 0.0;
    for c in &comp {
        acc += 1.0 - spec.overlap(c)?;
    }
    Ok(acc / comp.len() as f64)
}

/// Working basis used to assemble a circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    /// Full product charge basis.
    Charge,
    /// Product of the lowest `k` local eigenstates of every mode; the
    /// single-mode branches are folded in at construction time.
    Truncated(usize),
}

/// A compiled circuit whose branch offsets may be varied without
/// reassembling operators.
#[derive(Debug, Clone)]
pub struct System {
    pub spec: HamiltonianSpec,
    pub ncut: usize,
    pub basis: Basis,
    pub terms: HamiltonianTerms,
    modes: Vec<ModeOperators>,
}

impl System {
    pub fn new(spec: HamiltonianSpec, ncut: usize, basis: Basis) -> Result<Self> {
        Self::with_cap(spec, ncut, basis, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(spec: HamiltonianSpec, ncut: usize, basis: Basis, cap: usize) -> Result<Self> {
        let modes = (0..spec.n_modes)
            .map(|m| match basis {
                Basis::Charge => charge_mode(&spec, m, ncut),
                Basis::Truncated(k) => truncated_mode(&spec, m, ncut, k),
            })
            .collect::<Result<Vec<_>>>()?;
        let terms = assemble_terms(&spec, &modes, matches!(basis, Basis::Truncated(_)), cap)?;
        Ok(System { spec, ncut, basis, terms, modes })
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    pub fn default_offsets(&self) -> Vec<f64> {
        self.spec.branches.iter().map(|b| b.flux_offset).collect()
    }

    /// Hamiltonian for the given branch offsets (radians, one per branch of
    /// `spec`). In a truncated basis the offsets of single-mode branches are
    /// fixed at construction and ignored here.
    pub fn hamiltonian(&self, offsets: &[f64]) -> Array2<C64> {
        self.terms.evaluate(offsets)
    }

    pub fn bare_basis(&self, offsets: &[f64], per_mode: usize) -> Result<BareBasis> {
        let mut energies = Vec::new();
        let mut vectors = Vec::new();
        match self.basis {
            Basis::Charge => {
                let mut spec = self.spec.clone();
                for (b, &o) in spec.branches.iter_mut().zip(offsets) {
                    b.flux_offset = o;
                }
                let ops = charge_ops(self.ncut)?;
                for m in 0..spec.n_modes {
                    let (w, v) = eigh(&local_charge_hamiltonian(&spec, m, &ops))?;
                    let k = per_mode.min(w.len());
                    energies.push(w.slice(s![..k]).to_owned());
                    vectors.push(v.slice(s![.., ..k]).to_owned());
                }
            }
            Basis::Truncated(_) => {
                for m in &self.modes {
                    let d = m.dim();
                    let k = per_mode.min(d);
                    energies.push(Array1::from_iter(m.h0.diag().iter().take(k).map(|z| z.re)));
                    let mut v = Array2::zeros((d, k));
                    for i in 0..k {
                        v[[i, i]] = C64::new(1.0, 0.0);
                    }
                    vectors.push(v);
                }
            }
        }
        Ok(BareBasis { energies, vectors })
    }

    pub fn spectrum(&self, offsets: &[f64], n_levels: usize, opts: &LabelOptions) -> Result<Spectrum> {
        let h = self.hamiltonian(offsets);
        let sp = diagonalize(&h, n_levels.min(self.dim()))?;
        label_dressed(sp, &self.bare_basis(offsets, opts.per_mode)?, opts)
    }
}

/// Two-transmon circuit with its operators cached across flux biases.
#[derive(Debug, Clone)]
pub struct TwoQubitSystem {
    pub params: CircuitParams,
    pub n_levels: usize,
    pub label_opts: LabelOptions,
    pub system: System,
}

impl TwoQubitSystem {
    pub fn new(params: &CircuitParams, ncut: usize, n_levels: usize) -> Result<Self> {
        let spec = compile_two_qubit(params, &FluxBias::default())?;
        Ok(TwoQubitSystem {
            params: *params,
            n_levels,
            label_opts: LabelOptions::default(),
            system: System::new(spec, ncut, Basis::Charge)?,
        })
    }

    pub fn with_defaults(params: &CircuitParams) -> Result<Self> {
        Self::new(params, DEFAULT_NCUT, DEFAULT_LEVELS_TWO_MODE)
    }

    pub fn offsets(&self, bias: &FluxBias) -> Result<Vec<f64>> {
        Ok(compile_two_qubit(&self.params, bias)?.branches.iter().map(|b| b.flux_offset).collect())
    }

    pub fn hamiltonian(&self, bias: &FluxBias) -> Result<Array2<C64>> {
        Ok(self.system.hamiltonian(&self.offsets(bias)?))
    }

    pub fn bare_basis(&self, bias: &FluxBias) -> Result<BareBasis> {
        self.system.bare_basis(&self.offsets(bias)?, self.label_opts.per_mode)
    }

    pub fn spectrum(&self, bias: &FluxBias) -> Result<Spectrum> {
        self.system.spectrum(&self.offsets(bias)?, self.n_levels, &self.label_opts)
    }

    /// ζ on the operating condition `φ_e2 = −φ_e1/2`.
    pub fn zeta(&self, phi_e1: f64) -> Result<f64> {
        zz_rate(&self.spectrum(&FluxBias::operating(phi_e1))?, 2, (0, 1))
    }
}

/// Brent's method on a bracketing interval; stops when the bracket is
/// narrower than `xtol` or `|f| < ftol`.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, ftol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoIdlePoint(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() < ftol {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b)?;
    }
    Err(Error::NonConvergence(format!("Brent iteration limit {max_iter} reached")))
}

/// Scan `[lo, hi]` in `n` equal steps and return the first sub-interval on
/// which `f` changes sign, with the endpoint values.
pub fn first_sign_change<F>(f: &mut F, lo: f64, hi: f64, n: usize) -> Result<Option<(f64, f64)>>
where
    F: FnMut(f64) -> Result<f64> + ?Sized,
{
    let mut x0 = lo;
    let mut f0 = f(lo)?;
    for k in 1..=n {
        let x1 = lo + (hi - lo) * k as f64 / n as f64;
        let f1 = f(x1)?;
        if f0 == 0.0 || f0.signum() != f1.signum() {
            return Ok(Some((x0, x1)));
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(None)
}

/// Subdivisions used when the supplied bracket does not itself change sign.
pub const BRACKET_SCAN: usize = 20;

/// Root of ζ(φ_e1) on the operating condition inside `bracket`. If the
/// endpoints do not bracket a sign change the interval is scanned in
/// `BRACKET_SCAN` equal steps and the first crossing is refined.
pub fn find_phi_off_with(sys: &TwoQubitSystem, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return param_err("flux bracket must satisfy lo < hi");
    }
    let mut f = |x: f64| sys.zeta(x);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    let (a, b) = if flo.signum() != fhi.signum() {
        (lo, hi)
    } else {
        match first_sign_change(&mut f, lo, hi, BRACKET_SCAN)? {
            Some(ab) => ab,
            None => {
                return Err(Error::NoIdlePoint(format!(
                    "ζ keeps its sign on [{lo}, {hi}] (ζ(lo) = {flo:e} GHz)"
                )))
            }
        }
    };
    let x = brent(f, a, b, 1e-3 * FLUX_TOL, 1e-3 * ZETA_TOL, 100)?;
    let z = sys.zeta(x)?;
    if z.abs() >= ZETA_TOL {
        return Err(Error::NonConvergence(format!("|ζ(Φ_off)| = {z:e} GHz after root search")));
    }
    Ok(x)
}

pub fn find_phi_off(params: &CircuitParams, bracket: (f64, f64)) -> Result<f64> {
    find_phi_off_with(&TwoQubitSystem::with_defaults(params)?, bracket)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub flux: f64,
    pub zeta: Option<f64>,
    pub hybridization: Option<f64>,
    /// Labeled qubit frequencies `E₁₀ − E₀₀`, `E₀₁ − E₀₀`.
    pub qubit_freqs: Option<(f64, f64)>,
    pub eigs: Vec<f64>,
    pub error: Option<String>,
}

/// ζ, hybridization and the lowest `k` excitation energies at every grid
/// point; labeling failures are recorded per point.
pub fn sweep_flux(sys: &TwoQubitSystem, grid: &[f64], k: usize) -> Result<Vec<SweepRow>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return param_err("flux grid must be strictly increasing");
    }
    grid.iter()
        .map(|&x| {
            let bias = FluxBias::operating(x);
            let h = sys.hamiltonian(&bias)?;
            let raw = diagonalize(&h, sys.n_levels.min(h.nrows()))?;
            let eigs = raw.excitations(k);
            let labeled = sys.bare_basis(&bias).and_then(|b| label_dressed(raw, &b, &sys.label_opts));
            Ok(match labeled {
                Ok(sp) => {
                    let e00 = sp.energy(&[0, 0])?;
                    SweepRow {
                        flux: x,
                        zeta: Some(zz_rate(&sp, 2, (0, 1))?),
                        hybridization: Some(avg_hybridization(&sp, 2)?),
                        qubit_freqs: Some((sp.energy(&[1, 0])? - e00, sp.energy(&[0, 1])? - e00)),
                        eigs,
                        error: None,
                    }
                }
                Err(e) if e.is_physics() => SweepRow {
                    flux: x,
                    zeta: None,
                    hybridization: None,
                    qubit_freqs: None,
                    eigs,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Largest change of either labeled qubit frequency over the rows with
/// `lo ≤ flux ≤ hi`.
pub fn frequency_excursion(rows: &[SweepRow], lo: f64, hi: f64) -> f64 {
    let sel: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.flux >= lo - 1e-12 && r.flux <= hi + 1e-12)
        .filter_map(|r| r.qubit_freqs)
        .collect();
    let span = |v: Vec<f64>| {
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    if sel.is_empty() {
        return 0.0;
    }
    span(sel.iter().map(|p| p.0).collect()).max(span(sel.iter().map(|p| p.1).collect()))
}

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_else(|| "nan".into())
}

/// CSV with header `flux,zeta_GHz,hybridization,eig_0..eig_{k-1}`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    let k = rows.iter().map(|r| r.eigs.len()).max().unwrap_or(0);
    let mut header = vec!["flux".to_string(), "zeta_GHz".into(), "hybridization".into()];
    header.extend((0..k).map(|i| format!("eig_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cols = vec![fmt17(r.flux), opt17(r.zeta), opt17(r.hybridization)];
        cols.extend((0..k).map(|i| opt17(r.eigs.get(i).copied())));
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Three-transmon chain assembled in a truncated product basis.
#[derive(Debug, Clone)]
pub struct ChainSystem {
    pub chain: ChainParams,
    pub n_levels: usize,
    pub label_opts: LabelOptions,
    pub system: System,
}

impl ChainSystem {
    pub fn new(chain: &ChainParams, ncut: usize, mode_levels: usize, n_levels: usize) -> Result<Self> {
        let spec = compile_chain(chain)?;
        Ok(ChainSystem {
            chain: *chain,
            n_levels,
            label_opts: LabelOptions { per_mode: 4, max_excitation: 3, ..LabelOptions::default() },
            system: System::new(spec, ncut, Basis::Truncated(mode_levels))?,
        })
    }

    pub fn with_defaults(chain: &ChainParams) -> Result<Self> {
        Self::new(chain, DEFAULT_NCUT, DEFAULT_MODE_LEVELS, DEFAULT_LEVELS_THREE_MODE)
    }

    /// Branch offsets for coupler biases; transmon branches carry none.
    pub fn offsets(&self, biases: &[FluxBias; 2]) -> Result<Vec<f64>> {
        let mut c = self.chain;
        c.biases = *biases;
        Ok(compile_chain(&c)?.branches.iter().map(|b| b.flux_offset).collect())
    }

    pub fn spectrum(&self, biases: &[FluxBias; 2]) -> Result<Spectrum> {
        self.system.spectrum(&self.offsets(biases)?, self.n_levels, &self.label_opts)
    }

    /// `(ζ₁₂, ζ₂₃, ζ₁₃)` with both couplers on the operating condition.
    pub fn zetas(&self, phi12: f64, phi23: f64) -> Result<(f64, f64, f64)> {
        let sp = self.spectrum(&[FluxBias::operating(phi12), FluxBias::operating(phi23)])?;
        Ok((zz_rate(&sp, 3, (0, 1))?, zz_rate(&sp, 3, (1, 2))?, zz_rate(&sp, 3, (0, 2))?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainIdle {
    pub phi12: f64,
    pub phi23: f64,
    pub zeta12: f64,
    pub zeta23: f64,
    pub zeta13: f64,
}

/// Solve `ζ₁₂ = ζ₂₃ = 0` by alternating one-dimensional root searches in
/// `bracket`, starting from the bracket midpoint.
pub fn idle_chain_biases_with(sys: &ChainSystem, bracket: (f64, f64), max_rounds: usize) -> Result<ChainIdle> {
    let mid = 0.5 * (bracket.0 + bracket.1);
    let (mut p12, mut p23) = (mid, mid);
    let solve = |f: &mut dyn FnMut(f64) -> Result<f64>, x0: f64| -> Result<f64> {
        if f(x0)?.abs() < ZETA_TOL {
            return Ok(x0);
        }
        let (a, b) = match first_sign_change(f, bracket.0, bracket.1, BRACKET_SCAN)? {
            Some(ab) => ab,
            None => return Err(Error::NoIdlePoint(format!("no chain idle flux on {bracket:?}"))),
        };
        brent(f, a, b, 1e-3 * FLUX_TOL, 1e-3 * ZETA_TOL, 100)
    };
    for _ in 0..max_rounds {
        let (z12, z23, z13) = sys.zetas(p12, p23)?;
        if z12.abs() < ZETA_TOL && z23.abs() < ZETA_TOL {
            return Ok(ChainIdle { phi12: p12, phi23: p23, zeta12: z12, zeta23: z23, zeta13: z13 });
        }
        let q23 = p23;
        p12 = solve(&mut |x| Ok(sys.zetas(x, q23)?.0), p12)?;
        let q12 = p12;
        p23 = solve(&mut |x| Ok(sys.zetas(q12, x)?.1), p23)?;
    }
    Err(Error::NonConvergence(format!("chain idle biases not converged in {max_rounds} rounds")))
}

pub fn idle_chain_biases(chain: &ChainParams) -> Result<ChainIdle> {
    idle_chain_biases_with(&ChainSystem::with_defaults(chain)?, (0.0, 1.0), 8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use ndarray::array;

    #[test]
    fn diagonal_matrix_identity_vectors() {
        let h = array![[C64::new(2.0, 0.0), ZERO], [ZERO, C64::new(-1.0, 0.0)]];
        let sp = diagonalize(&h, 2).unwrap();
        assert_eq!(sp.eigenvalues.to_vec(), vec![-1.0, 2.0]);
        assert!((sp.eigenvectors[[1, 0]].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let h = array![[ZERO, ONE], [ONE, ZERO]];
        let sp = diagonalize(&h, 2).unwrap();
        assert!((sp.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!(diagonalize(&h, 3).is_err());
    }

    #[test]
    fn tuples() {
        assert_eq!(computational_tuples(2), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let t = bare_tuples(3, &LabelOptions { per_mode: 4, max_excitation: 3, ..Default::default() });
        assert_eq!(t.len(), 20);
    }

    #[test]
    fn brent_cubic() {
        let r = brent(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 0.0, 100).unwrap();
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 0.0, 100).is_err());
    }

    #[test]
    fn two_level_hybridization() {
        // Two bare levels per mode, single excitation manifold mixed by θ.
        let th: f64 = 0.1;
        let (c, s) = (th.cos(), th.sin());
        let mut v = Array2::<C64>::zeros((4, 4));
        v[[0, 0]] = ONE;
        v[[1, 1]] = C64::new(c, 0.0);
        v[[2, 1]] = C64::new(s, 0.0);
        v[[1, 2]] = C64::new(-s, 0.0);
        v[[2, 2]] = C64::new(c, 0.0);
        v[[3, 3]] = ONE;
        let sp = Spectrum {
            eigenvalues: array![0.0, 1.0, 2.0, 3.0],
            eigenvectors: v,
            labels: BTreeMap::new(),
            overlaps: BTreeMap::new(),
        };
        let eye = Array2::from_diag_elem(2, ONE);
        let bare = BareBasis { energies: vec![array![0.0, 2.0], array![0.0, 1.0]], vectors: vec![eye.clone(), eye] };
        let sp = label_dressed(sp, &bare, &LabelOptions::default()).unwrap();
        let h = avg_hybridization(&sp, 2).unwrap();
        assert!((h - 2.0 * (1.0 - c * c) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_bare_states_rejected() {
        let eye = Array2::from_diag_elem(2, ONE);
        let bare = BareBasis { energies: vec![array![0.0, 1.0], array![0.0, 1.0]], vectors: vec![eye.clone(), eye] };
        let sp = diagonalize(&Array2::from_diag(&array![C64::new(0.0, 0.0), ONE, ONE, C64::new(2.0, 0.0)]), 4).unwrap();
        assert!(matches!(label_dressed(sp, &bare, &LabelOptions::default()), Err(Error::AmbiguousLabel(_))));
    }

    #[test]
    fn sweep_csv_header() {
        let rows = vec![SweepRow {
            flux: 0.0,
            zeta: Some(-0.0269),
            hybridization: None,
            qubit_freqs: None,
            eigs: vec![4.5, 6.3],
            error: None,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "flux,zeta_GHz,hybridization,eig_0,eig_1");
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,-2.6900000000000000e-2,nan,"));
    }
}
