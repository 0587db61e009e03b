//! Time-domain gate simulation: unitary and Lindblad propagation in the
//! truncated idle eigenbasis, virtual-Z optimised fidelities and T1 sweeps.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{gradiometric_to_bias, FluxBias, GradiometricBias};
use crate::error::{param_err, Error, Result};
use crate::linalg::{dagger, eigh, identity, propagator_taylor, unitarity_defect, wrap_angle, ONE, ZERO};
use crate::operators::{embed, HamiltonianTerms};
use crate::pulse::{
    calibrate_beta, mixing_angle_table, table_grid, PulseConfig, ThetaTable, Waveform, Window, DEFAULT_BETA_BRACKET,
    DEFAULT_SIGMA, DEFAULT_SYNTH_DT, DEFAULT_TABLE_POINTS,
};
use crate::spectrum::{find_phi_off_with, zz_rate, Spectrum, TwoQubitSystem};

pub const DEFAULT_GATE_LEVELS: usize = 40;
pub const DEFAULT_LINDBLAD_LEVELS: usize = 28;
pub const DEFAULT_DT_PROP: f64 = 0.002;
/// Bare transmon levels kept when building ladder operators.
pub const JUMP_LEVELS: usize = 8;
/// Fine steps per dissipator application.
pub const LINDBLAD_SUBSTEPS: usize = 10;
pub const CHOI_CLIP: f64 = 1e-10;
const UNITARITY_TOL: f64 = 1e-9;

const Z1: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
const Z2: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
const CZ: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// Cached propagation frame: the lowest `n_levels` eigenstates of `H(Φ_off)`
/// and every Hamiltonian term expressed in them.
#[derive(Debug, Clone)]
pub struct GateFrame {
    pub sys: TwoQubitSystem,
    pub phi_off: f64,
    pub n_levels: usize,
    pub energies: Array1<f64>,
    /// Charge-basis eigenvectors (columns).
    pub basis: Array2<C64>,
    /// Frame indices of |00⟩, |01⟩, |10⟩, |11⟩.
    pub comp: [usize; 4],
    terms: HamiltonianTerms,
    adjoints: Vec<Array2<C64>>,
    spectrum: Spectrum,
}

impl GateFrame {
    pub fn new(sys: &TwoQubitSystem, phi_off: f64, n_levels: usize) -> Result<Self> {
        let dim = sys.system.dim();
        if n_levels < 4 || n_levels > dim {
            return param_err(format!("n_levels {n_levels} not in 4..={dim}"));
        }
        let offsets = sys.offsets(&FluxBias::operating(phi_off))?;
        let spectrum = sys.system.spectrum(&offsets, n_levels, &sys.label_opts)?;
        let mut comp = [0; 4];
        for (k, t) in [[0, 0], [0, 1], [1, 0], [1, 1]].iter().enumerate() {
            comp[k] = spectrum.index(t)?;
        }
        let basis = spectrum.eigenvectors.clone();
        let terms = sys.system.terms.project(&basis);
        let adjoints = terms.branches.iter().map(|b| dagger(&b.op)).collect();
        Ok(GateFrame {
            sys: sys.clone(),
            phi_off,
            n_levels,
            energies: spectrum.eigenvalues.clone(),
            basis,
            comp,
            terms,
            adjoints,
            spectrum,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// ζ (GHz) on the operating condition at `phi_e1`, from the full spectrum.
    pub fn zeta_at(&self, phi_e1: f64) -> Result<f64> {
        zz_rate(&self.sys.spectrum(&FluxBias::operating(phi_e1))?, 2, (0, 1))
    }

    /// Hamiltonian in the frame for branch offsets `offsets`.
    pub fn hamiltonian(&self, offsets: &[f64]) -> Array2<C64> {
        let mut h = self.terms.constant.clone();
        for (t, sd) in self.terms.branches.iter().zip(&self.adjoints) {
            let ph = C64::from_polar(-0.5 * t.ej, offsets[t.branch]);
            let phc = ph.conj();
            ndarray::Zip::from(&mut h).and(&t.op).and(sd).for_each(|h, &a, &b| *h += ph * a + phc * b);
        }
        h
    }

    fn step(&self, bias: &FluxBias, dt: f64) -> Result<Array2<C64>> {
        Ok(propagator_taylor(&self.hamiltonian(&self.sys.offsets(bias)?), dt))
    }

    /// Step count and step length covering the waveform.
    fn steps(wf: &Waveform, dt_prop: f64) -> Result<(usize, f64)> {
        if !(dt_prop > 0.0) {
            return param_err("dt_prop must be positive");
        }
        if wf.samples.is_empty() || wf.samples.iter().any(|v| !v.is_finite()) {
            return param_err("waveform samples must be finite and non-empty");
        }
        let t = wf.duration();
        let n = (t / dt_prop).round().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
        Ok((n, if n > 0 { t / n as f64 } else { 0.0 }))
    }

    /// Time-ordered midpoint-rule propagator on the operating condition.
    pub fn propagate(&self, wf: &Waveform, dt_prop: f64) -> Result<Array2<C64>> {
        self.propagate_with(wf, dt_prop, FluxBias::operating)
    }

    /// As `propagate`, with the waveform value mapped to a bias by `bias`.
    pub fn propagate_with<F>(&self, wf: &Waveform, dt_prop: f64, bias: F) -> Result<Array2<C64>>
    where
        F: Fn(f64) -> FluxBias,
    {
        let (n, dt) = Self::steps(wf, dt_prop)?;
        let mut u = identity(self.n_levels);
        for k in 0..n {
            let phi = wf.at((k as f64 + 0.5) * dt);
            u = self.step(&bias(phi), dt)?.dot(&u);
        }
        let defect = unitarity_defect(&u);
        if defect > UNITARITY_TOL {
            return Err(Error::Integration(format!("propagator unitarity defect {defect:e}")));
        }
        Ok(u)
    }

    /// 4×4 block of `u` on the computational states.
    pub fn project(&self, u: &Array2<C64>) -> Array2<C64> {
        Array2::from_shape_fn((4, 4), |(a, b)| u[[self.comp[a], self.comp[b]]])
    }

    /// `arg U₁₁ − arg U₁₀ − arg U₀₁ + arg U₀₀` wrapped to (−π, π].
    pub fn entangling_phase(&self, u: &Array2<C64>) -> f64 {
        entangling_phase(&self.project(u))
    }

    pub fn coherent_error(&self, u: &Array2<C64>) -> GateResult {
        coherent_error(&self.project(u))
    }
}

pub fn entangling_phase(m: &Array2<C64>) -> f64 {
    let d: Vec<f64> = (0..4).map(|k| m[[k, k]].arg()).collect();
    wrap_angle(d[3] - d[2] - d[1] + d[0])
}

/// Virtual-Z optimised gate quality of a projected propagator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateResult {
    /// Row-major 4×4 projected propagator as `[re, im]` pairs.
    pub projected: Vec<[f64; 2]>,
    pub phases: [f64; 2],
    pub coherent_error: f64,
    pub leakage: f64,
    pub entangling_phase: f64,
}

impl GateResult {
    pub fn projected_matrix(&self) -> Array2<C64> {
        Array2::from_shape_fn((4, 4), |(a, b)| {
            let [re, im] = self.projected[4 * a + b];
            C64::new(re, im)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualZ {
    pub phases: [f64; 2],
    /// `1 − F` at the optimum.
    pub error: f64,
}

/// `Σ_k |Tr(CZ† K_k Z(φ))|²` as `Re Σ_ab R_ab e^{−i(θ_a−θ_b)}`.
struct PhaseObjective {
    r: [[C64; 4]; 4],
    trace: f64,
}

impl PhaseObjective {
    fn new(kraus: &[Array2<C64>]) -> Self {
        let mut r = [[ZERO; 4]; 4];
        let mut trace = 0.0;
        for k in kraus {
            let b: Vec<C64> = (0..4).map(|a| k[[a, a]] * CZ[a]).collect();
            for a in 0..4 {
                for c in 0..4 {
                    r[a][c] += b[a] * b[c].conj();
                }
            }
            trace += k.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        PhaseObjective { r, trace }
    }

    /// Value, gradient and Hessian at `phi`.
    fn eval(&self, phi: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let theta: Vec<f64> = (0..4).map(|a| phi[0] * Z1[a] + phi[1] * Z2[a]).collect();
        let (mut f, mut g, mut h) = (0.0, [0.0; 2], [[0.0; 2]; 2]);
        for a in 0..4 {
            for b in 0..4 {
                let w = self.r[a][b] * C64::from_polar(1.0, -(theta[a] - theta[b]));
                let d = [Z1[a] - Z1[b], Z2[a] - Z2[b]];
                f += w.re;
                for p in 0..2 {
                    g[p] += w.im * d[p];
                    for q in 0..2 {
                        h[p][q] -= w.re * d[p] * d[q];
                    }
                }
            }
        }
        (f, g, h)
    }

    fn error(&self, f: f64) -> f64 {
        (1.0 - (self.trace + f) / 20.0).clamp(0.0, 1.0)
    }

    /// Newton ascent with backtracking; falls back to a gradient step where
    /// the Hessian is not negative definite.
    fn climb(&self, mut x: [f64; 2]) -> ([f64; 2], f64, f64) {
        let (mut f, mut g, mut h) = self.eval(x);
        for _ in 0..200 {
            let gn = g[0].hypot(g[1]);
            if gn < 1e-12 {
                break;
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            let mut dir = if h[0][0] < 0.0 && det > 0.0 {
                [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det]
            } else {
                let scale = 0.1 / (1.0 + h[0][0].abs().max(h[1][1].abs()));
                [g[0] * scale, g[1] * scale]
            };
            let mut moved = false;
            for _ in 0..40 {
                let y = [x[0] + dir[0], x[1] + dir[1]];
                let (fy, gy, hy) = self.eval(y);
                if fy >= f {
                    moved = fy > f || dir[0].hypot(dir[1]) < 1e-15;
                    x = y;
                    f = fy;
                    g = gy;
                    h = hy;
                    break;
                }
                dir = [0.5 * dir[0], 0.5 * dir[1]];
            }
            if !moved {
                break;
            }
        }
        (x, f, g[0].hypot(g[1]))
    }
}

/// Maximise the average gate fidelity of `{K_k}` against CZ over local
/// virtual-Z phases `Z(φ) = exp(−i(φ₁Z₁ + φ₂Z₂))`. The start set is the
/// least-squares fit to the diagonal phases plus a fixed grid, so the
/// result is deterministic.
pub fn virtual_z_optimize_kraus(kraus: &[Array2<C64>]) -> VirtualZ {
    let obj = PhaseObjective::new(kraus);
    let alpha: Vec<f64> = (0..4)
        .map(|a| {
            let s: C64 = kraus.iter().map(|k| k[[a, a]] * CZ[a]).sum();
            s.arg()
        })
        .collect();
    let ls = [
        (alpha[0] + alpha[1] - alpha[2] - alpha[3]) / 4.0,
        (alpha[0] - alpha[1] + alpha[2] - alpha[3]) / 4.0,
    ];
    let mut starts = vec![ls];
    let n = 6;
    for i in 0..n {
        for j in 0..n {
            let step = std::f64::consts::PI / n as f64;
            starts.push([ls[0] + i as f64 * step, ls[1] + j as f64 * step]);
        }
    }
    let mut best: Option<([f64; 2], f64)> = None;
    for x0 in starts {
        let (x, f, _) = obj.climb(x0);
        if best.map_or(true, |(_, fb)| f > fb + 1e-15) {
            best = Some((x, f));
        }
    }
    let (x, f) = best.expect("non-empty start set");
    VirtualZ { phases: [wrap_angle(x[0]), wrap_angle(x[1])], error: obj.error(f) }
}

pub fn virtual_z_optimize(u_proj: &Array2<C64>) -> VirtualZ {
    virtual_z_optimize_kraus(std::slice::from_ref(u_proj))
}

/// `1 − F` of `{K_k}` with fixed virtual-Z phases.
pub fn error_at_phases(kraus: &[Array2<C64>], phases: [f64; 2]) -> f64 {
    let obj = PhaseObjective::new(kraus);
    obj.error(obj.eval(phases).0)
}

/// `1 − Tr(M†M)/4`.
pub fn leakage(m: &Array2<C64>) -> f64 {
    (1.0 - m.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0).clamp(0.0, 1.0)
}

pub fn coherent_error(u_proj: &Array2<C64>) -> GateResult {
    let vz = virtual_z_optimize(u_proj);
    GateResult {
        projected: u_proj.iter().map(|z| [z.re, z.im]).collect(),
        phases: vz.phases,
        coherent_error: vz.error,
        leakage: leakage(u_proj),
        entangling_phase: entangling_phase(u_proj),
    }
}

/// Change of the coherent error when `dt_prop` is halved.
pub fn dt_halving_delta(frame: &GateFrame, wf: &Waveform, dt_prop: f64) -> Result<f64> {
    let a = frame.coherent_error(&frame.propagate(wf, dt_prop)?).coherent_error;
    let b = frame.coherent_error(&frame.propagate(wf, 0.5 * dt_prop)?).coherent_error;
    Ok((a - b).abs())
}

/// Coherent error with offsets `δ_i` on the inner flux and `δ_o` on the
/// differential outer flux, the virtual-Z phases held at `phases`.
pub fn offset_error_map(
    frame: &GateFrame,
    wf: &Waveform,
    phases: [f64; 2],
    grid_i: &[f64],
    grid_o: &[f64],
    dt_prop: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(grid_i.len());
    for &di in grid_i {
        let mut row = Vec::with_capacity(grid_o.len());
        for &d_o in grid_o {
            let u = frame.propagate_with(wf, dt_prop, |phi| {
                gradiometric_to_bias(&GradiometricBias::symmetric(phi + di, d_o))
                    .expect("symmetric inductors are valid")
            })?;
            row.push(error_at_phases(&[frame.project(&u)], phases));
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisyGateResult {
    /// Each Kraus operator row-major as `[re, im]` pairs.
    pub kraus: Vec<Vec<[f64; 2]>>,
    pub phases: [f64; 2],
    pub infidelity: f64,
}

impl NoisyGateResult {
    pub fn kraus_matrices(&self) -> Vec<Array2<C64>> {
        self.kraus
            .iter()
            .map(|k| Array2::from_shape_fn((4, 4), |(a, b)| C64::new(k[4 * a + b][0], k[4 * a + b][1])))
            .collect()
    }
}

/// Collapse operators `√(1/T1ᵢ)·âᵢ` in the frame, with `âᵢ` the ladder of
/// the lowest `JUMP_LEVELS` bare states of transmon `i`.
pub fn jump_operators(frame: &GateFrame, t1: [f64; 2]) -> Result<Vec<Array2<C64>>> {
    let offsets = frame.sys.offsets(&FluxBias::operating(frame.phi_off))?;
    let bare = frame.sys.system.bare_basis(&offsets, JUMP_LEVELS)?;
    let dims: Vec<usize> = bare.vectors.iter().map(|v| v.nrows()).collect();
    let mut out = Vec::new();
    for (i, &t) in t1.iter().enumerate() {
        if !(t > 0.0) {
            return param_err("T1 must be positive");
        }
        if t.is_infinite() {
            continue;
        }
        let v = &bare.vectors[i];
        let k = v.ncols();
        let mut ladder = Array2::zeros((k, k));
        for m in 0..k - 1 {
            ladder[[m, m + 1]] = C64::new(((m + 1) as f64).sqrt(), 0.0);
        }
        let local = v.dot(&ladder).dot(&dagger(v));
        let mut factors = vec![None; dims.len()];
        factors[i] = Some(local);
        let full = embed(&factors, &dims);
        let a = dagger(&frame.basis).dot(&full.dot(&frame.basis));
        out.push(a.mapv(|z| z * (1.0 / t).sqrt()));
    }
    Ok(out)
}

struct Dissipator {
    jumps: Vec<(Array2<C64>, Array2<C64>)>,
    /// `½ Σ L†L`.
    half_k: Array2<C64>,
}

impl Dissipator {
    fn new(jumps: Vec<Array2<C64>>, n: usize) -> Self {
        let mut half_k = Array2::zeros((n, n));
        let jumps: Vec<_> = jumps
            .into_iter()
            .map(|l| {
                let ld = dagger(&l);
                half_k = &half_k + &ld.dot(&l).mapv(|z| z * 0.5);
                (l, ld)
            })
            .collect();
        Dissipator { jumps, half_k }
    }

    fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = -(self.half_k.dot(rho) + rho.dot(&self.half_k));
        for (l, ld) in &self.jumps {
            out = out + l.dot(&rho.dot(ld));
        }
        out
    }

    /// Heun step of length `h`.
    fn advance(&self, rho: &Array2<C64>, h: f64) -> Array2<C64> {
        if self.jumps.is_empty() {
            return rho.clone();
        }
        let k1 = self.apply(rho);
        let mid = rho + &k1.mapv(|z| z * h);
        let k2 = self.apply(&mid);
        rho + &(k1 + k2).mapv(|z| z * (0.5 * h))
    }
}

/// Evolve density matrices (frame basis) through the waveform under the
/// Lindblad equation: groups of `LINDBLAD_SUBSTEPS` unitary midpoint steps
/// are sandwiched between dissipator half-steps.
pub fn evolve_density(
    frame: &GateFrame,
    wf: &Waveform,
    t1: [f64; 2],
    dt_prop: f64,
    mut states: Vec<Array2<C64>>,
) -> Result<Vec<Array2<C64>>> {
    let diss = Dissipator::new(jump_operators(frame, t1)?, frame.n_levels);
    let (n, dt) = GateFrame::steps(wf, dt_prop)?;
    let mut k = 0;
    while k < n {
        let m = LINDBLAD_SUBSTEPS.min(n - k);
        let mut u = identity(frame.n_levels);
        for j in k..k + m {
            u = frame.step(&FluxBias::operating(wf.at((j as f64 + 0.5) * dt)), dt)?.dot(&u);
        }
        let ud = dagger(&u);
        let h = 0.5 * m as f64 * dt;
        for rho in states.iter_mut() {
            let r = diss.advance(rho, h);
            let r = u.dot(&r).dot(&ud);
            *rho = diss.advance(&r, h);
        }
        k += m;
    }
    Ok(states)
}

/// Process of the gate on the computational subspace under T1 decay, as
/// Kraus operators from the Choi matrix.
pub fn propagate_lindblad(frame: &GateFrame, wf: &Waveform, t1: [f64; 2], dt_prop: f64) -> Result<NoisyGateResult> {
    let n = frame.n_levels;
    let mut pairs = Vec::new();
    let mut inputs = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            let mut rho = Array2::zeros((n, n));
            rho[[frame.comp[i], frame.comp[j]]] = ONE;
            pairs.push((i, j));
            inputs.push(rho);
        }
    }
    let outputs = evolve_density(frame, wf, t1, dt_prop, inputs)?;
    for ((i, j), rho) in pairs.iter().zip(&outputs) {
        if i == j {
            let tr: C64 = rho.diag().sum();
            if (tr - ONE).norm() > 1e-8 {
                return Err(Error::Integration(format!("density-matrix trace drifted to {tr}")));
            }
        }
    }
    let mut choi = Array2::<C64>::zeros((16, 16));
    for ((i, j), rho) in pairs.iter().zip(&outputs) {
        for a in 0..4 {
            for b in 0..4 {
                let v = rho[[frame.comp[a], frame.comp[b]]];
                choi[[i * 4 + a, j * 4 + b]] = v;
                choi[[j * 4 + b, i * 4 + a]] = v.conj();
            }
        }
    }
    let kraus = choi_to_kraus(&choi)?;
    let vz = virtual_z_optimize_kraus(&kraus);
    Ok(NoisyGateResult {
        kraus: kraus.iter().map(|k| k.iter().map(|z| [z.re, z.im]).collect()).collect(),
        phases: vz.phases,
        infidelity: vz.error,
    })
}

/// Kraus operators `K[a, i] = √λ·v[4i + a]` from a 16×16 Choi matrix
/// `C[(4i + a), (4j + b)] = E(|i⟩⟨j|)[a, b]`.
pub fn choi_to_kraus(choi: &Array2<C64>) -> Result<Vec<Array2<C64>>> {
    let (w, v) = eigh(choi)?;
    let total: f64 = w.sum();
    if let Some(bad) = w.iter().find(|&&x| x < -CHOI_CLIP) {
        return Err(Error::Integration(format!("Choi eigenvalue {bad:e} below the clip threshold")));
    }
    let floor = 1e-14 * total.abs();
    let kept: f64 = w.iter().filter(|&&x| x > floor).sum();
    let scale = if kept > 0.0 { total / kept } else { 1.0 };
    let mut out = Vec::new();
    for (k, &lam) in w.iter().enumerate() {
        if lam <= floor {
            continue;
        }
        let s = (lam * scale).sqrt();
        let col = v.slice(s![.., k]);
        out.push(Array2::from_shape_fn((4, 4), |(a, i)| col[i * 4 + a] * s));
    }
    Ok(out)
}

/// Least-squares fit `1 − F ≈ a·T_G/T1 + b` over the grid, equal T1 on both
/// transmons. Returns `(a, b, infidelities)`.
pub fn t1_sweep_fit(frame: &GateFrame, wf: &Waveform, t1_grid: &[f64], dt_prop: f64) -> Result<(f64, f64, Vec<f64>)> {
    let tg = wf.duration();
    let mut infid = Vec::with_capacity(t1_grid.len());
    for &t in t1_grid {
        infid.push(propagate_lindblad(frame, wf, [t, t], dt_prop)?.infidelity);
    }
    let x: Vec<f64> = t1_grid.iter().map(|t| tg / t).collect();
    let (a, b) = linear_fit(&x, &infid)?;
    Ok((a, b, infid))
}

/// Ordinary least squares `y ≈ a·x + b`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return param_err("linear fit needs at least two points");
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-30 * mx.abs().max(1e-300).powi(2) {
        return param_err("degenerate T1 grid");
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

/// Knobs of the end-to-end CZ design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CzOptions {
    pub n_levels: usize,
    pub dt_prop: f64,
    pub off_bracket: (f64, f64),
    pub beta_bracket: (f64, f64),
    pub table_points: usize,
    pub sigma_filter: f64,
    pub window: Window,
    pub dt_synth: f64,
}

impl Default for CzOptions {
    fn default() -> Self {
        CzOptions {
            n_levels: DEFAULT_GATE_LEVELS,
            dt_prop: DEFAULT_DT_PROP,
            off_bracket: (0.3, 0.7),
            beta_bracket: DEFAULT_BETA_BRACKET,
            table_points: DEFAULT_TABLE_POINTS,
            sigma_filter: DEFAULT_SIGMA,
            window: Window::default(),
            dt_synth: DEFAULT_SYNTH_DT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CzGate {
    pub phi_off: f64,
    pub zeta_on: f64,
    pub beta: f64,
    pub waveform: Waveform,
    pub table: ThetaTable,
    pub result: GateResult,
    pub frame: GateFrame,
}

/// Idle point, mixing-angle table, β calibration and the final coherent
/// error of a `t_g`-long CZ.
pub fn design_cz(sys: &TwoQubitSystem, t_g: f64, opts: &CzOptions) -> Result<CzGate> {
    let phi_off = find_phi_off_with(sys, opts.off_bracket)?;
    let table = mixing_angle_table(sys, phi_off, &table_grid(0.0, phi_off, opts.table_points))?;
    let frame = GateFrame::new(sys, phi_off, opts.n_levels)?;
    let template = PulseConfig {
        sigma_filter: opts.sigma_filter,
        dt: opts.dt_synth,
        window: opts.window,
        ..PulseConfig::new(t_g, phi_off)
    };
    let cal = calibrate_beta(&frame, &table, &template, opts.beta_bracket, opts.dt_prop)?;
    let u = frame.propagate(&cal.waveform, opts.dt_prop)?;
    let result = frame.coherent_error(&u);
    Ok(CzGate {
        phi_off,
        zeta_on: frame.zeta_at(0.0)?,
        beta: cal.beta,
        waveform: cal.waveform,
        table,
        result,
        frame,
    })
}
