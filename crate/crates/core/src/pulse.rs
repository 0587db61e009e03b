//! Fast-adiabatic CZ flux waveforms.
//!
//! The target is shaped in the mixing angle of the bare `|11⟩/|02⟩` pair: a
//! square pulse convolved with a Kaiser window, mapped back to flux through
//! the tabulated mixing angle and then Gaussian filtered.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::FluxBias;
use crate::dynamics::GateFrame;
use crate::error::{param_err, Error, Result};
use crate::linalg::wrap_angle;
use crate::spectrum::{brent, fmt17, TwoQubitSystem};

pub const DEFAULT_KAISER_SHAPE: f64 = 6.0;
pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_SYNTH_DT: f64 = 0.01;
pub const DEFAULT_TABLE_POINTS: usize = 401;
/// Gaussian kernels are cut at this many σ unless stated otherwise.
pub const DEFAULT_TRUNCATE: f64 = 5.0;
/// Kernel cut used inside `synthesize`. The unfiltered core is inset by the
/// same amount at both ends, so the filtered endpoints sit exactly at Φ_off.
pub const SYNTH_TRUNCATE: f64 = 3.0;
pub const DEFAULT_BETA_BRACKET: (f64, f64) = (0.05, 0.995);
const BETA_SCAN: usize = 12;
pub const PHASE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// Sample period (ns).
    pub dt: f64,
    /// `Φ_e1(t_k)` in Φ₀.
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn constant(value: f64, duration: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && duration >= 0.0) {
            return param_err("waveform needs dt > 0 and duration ≥ 0");
        }
        let n = (duration / dt).round() as usize + 1;
        Ok(Waveform { dt, samples: vec![value; n] })
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len().saturating_sub(1)) as f64
    }

    /// Piecewise-linear value at time `t`, clamped to the ends.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 1 || t <= 0.0 {
            return self.samples[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k >= n - 1 {
            return self.samples[n - 1];
        }
        let f = x - k as f64;
        self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
    }

    /// Two-column CSV `t_ns,phi_e1`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Parameter(format!("waveform csv: {e}"));
        wr.write_record(["t_ns", "phi_e1"]).map_err(io)?;
        for (k, v) in self.samples.iter().enumerate() {
            wr.write_record([fmt17(k as f64 * self.dt), fmt17(*v)]).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Parameter(format!("waveform csv: {e}")))?;
        Ok(())
    }

    /// Read a CSV written by `write_csv`; samples must be uniformly spaced.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut t = Vec::new();
        let mut v = Vec::new();
        for rec in rd.deserialize::<(f64, f64)>() {
            let (a, b) = rec.map_err(|e| Error::Parameter(format!("waveform csv: {e}")))?;
            t.push(a);
            v.push(b);
        }
        if t.len() < 2 {
            return param_err("waveform csv needs at least two samples");
        }
        let dt = t[1] - t[0];
        if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return param_err("waveform samples must be uniformly spaced");
        }
        Ok(Waveform { dt, samples: v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Window {
    /// Kaiser window with the given shape parameter, pedestal removed.
    Kaiser(f64),
}

impl Default for Window {
    fn default() -> Self {
        Window::Kaiser(DEFAULT_KAISER_SHAPE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// Gate duration (ns).
    pub t_g: f64,
    pub beta: f64,
    /// Gaussian filter width (ns).
    pub sigma_filter: f64,
    pub phi_on: f64,
    pub phi_off: f64,
    pub dt: f64,
    pub window: Window,
}

impl PulseConfig {
    pub fn new(t_g: f64, phi_off: f64) -> Self {
        PulseConfig {
            t_g,
            beta: 0.5,
            sigma_filter: DEFAULT_SIGMA,
            phi_on: 0.0,
            phi_off,
            dt: DEFAULT_SYNTH_DT,
            window: Window::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return param_err(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.sigma_filter >= 0.0) {
            return param_err("sigma_filter must be non-negative");
        }
        if self.phi_on == self.phi_off {
            return param_err("phi_on and phi_off must differ");
        }
        if !(self.dt > 0.0 && self.t_g > 0.0) {
            return param_err("dt and T_G must be positive");
        }
        Ok(())
    }
}

/// Monotone cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return param_err("pchip needs ≥ 2 strictly increasing abscissae");
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            let end = |h0: f64, h1: f64, m0: f64, m1: f64| {
                let e = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
                if e.signum() != m0.signum() {
                    0.0
                } else if m0.signum() != m1.signum() && e.abs() > 3.0 * m0.abs() {
                    3.0 * m0
                } else {
                    e
                }
            };
            d[0] = end(h[0], h[1], del[0], del[1]);
            d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Pchip { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        let span = hi - lo;
        if t < lo - 1e-12 * span || t > hi + 1e-12 * span {
            return None;
        }
        let t = t.clamp(lo, hi);
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s).powi(2),
            s * (1.0 - s).powi(2),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }
}

/// Mixing angle of `|11⟩` and its nearest doubly excited partner, tabulated
/// on a flux grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaTable {
    pub flux: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ThetaTable {
    /// Monotone inverse `θ ↦ Φ`.
    pub fn inverse(&self) -> Result<Pchip> {
        let increasing = self.theta.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.theta.windows(2).all(|w| w[1] < w[0]);
        if increasing {
            Pchip::new(self.theta.clone(), self.flux.clone())
        } else if decreasing {
            Pchip::new(self.theta.iter().rev().cloned().collect(), self.flux.iter().rev().cloned().collect())
        } else {
            Err(Error::Pulse("mixing angle is not monotone on the flux grid".into()))
        }
    }

    pub fn theta_at_end(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }
}

/// Bare product vector with its largest component made real and positive.
fn gauge_fixed(v: Array1<C64>) -> Array1<C64> {
    let k = v.iter().enumerate().fold(0, |b, (i, z)| if z.norm() > v[b].norm() { i } else { b });
    let ph = v[k].conj() / v[k].norm();
    v.mapv(|z| z * ph)
}

/// θ(Φ) = ½·arctan(2s/d) with `s = ±|⟨p|H|11⟩|` (sign of its real part) and
/// `d = ⟨11|H|11⟩ − ⟨p|H|p⟩`, bare states fixed at `reference` flux. The
/// partner `p` is whichever of `|02⟩`, `|20⟩` lies closer to `|11⟩` there.
/// The operating condition `Φ_e2 = −Φ_e1/2` is applied at every grid point.
pub fn mixing_angle_table(sys: &TwoQubitSystem, reference: f64, grid: &[f64]) -> Result<ThetaTable> {
    if grid.len() < 2 {
        return param_err("mixing-angle grid needs at least two points");
    }
    let bare = sys.bare_basis(&FluxBias::operating(reference))?;
    if bare.vectors.iter().any(|v| v.ncols() < 3) {
        return param_err("bare basis must keep at least three levels per mode");
    }
    let prod = |a: usize, b: usize| {
        let va = bare.vectors[0].column(a);
        let vb = bare.vectors[1].column(b);
        let mut out = Array1::zeros(va.len() * vb.len());
        for (i, x) in va.iter().enumerate() {
            for (j, y) in vb.iter().enumerate() {
                out[i * vb.len() + j] = x * y;
            }
        }
        gauge_fixed(out)
    };
    let e11 = bare.tuple_energy(&[1, 1]);
    let partner = if (bare.tuple_energy(&[2, 0]) - e11).abs() < (bare.tuple_energy(&[0, 2]) - e11).abs() {
        (2, 0)
    } else {
        (0, 2)
    };
    let (b11, bp) = (prod(1, 1), prod(partner.0, partner.1));
    // ⟨x|H|y⟩ is linear in the branch phasors, so precompute each part.
    let terms = &sys.system.terms;
    let inner = |x: &Array1<C64>, a: &Array2<C64>, y: &Array1<C64>| -> C64 {
        x.iter().zip(a.dot(y).iter()).map(|(p, q)| p.conj() * q).sum()
    };
    let pairs = [(&bp, &b11), (&b11, &b11), (&bp, &bp)];
    let base: Vec<C64> = pairs.iter().map(|(x, y)| inner(x, &terms.constant, y)).collect();
    let parts: Vec<Vec<(C64, C64)>> = terms
        .branches
        .iter()
        .map(|t| {
            pairs
                .iter()
                .map(|(x, y)| {
                    let fwd = inner(x, &t.op, y);
                    let back: C64 = inner(y, &t.op, x).conj();
                    (fwd, back)
                })
                .collect()
        })
        .collect();
    let mut theta = Vec::with_capacity(grid.len());
    for &f in grid {
        let offsets = sys.offsets(&FluxBias::operating(f))?;
        let mut el = base.clone();
        for (t, p) in terms.branches.iter().zip(&parts) {
            let ph = C64::from_polar(-0.5 * t.ej, offsets[t.branch]);
            for (e, (fwd, back)) in el.iter_mut().zip(p) {
                *e += ph * fwd + ph.conj() * back;
            }
        }
        let (m, d) = (el[0], el[1].re - el[2].re);
        if d == 0.0 {
            return Err(Error::Pulse(format!("|11⟩ and {partner:?} degenerate at Φ = {f}")));
        }
        let s = m.norm() * m.re.signum();
        theta.push(0.5 * (2.0 * s / d).atan());
    }
    let t = ThetaTable { flux: grid.to_vec(), theta };
    t.inverse()?;
    Ok(t)
}

/// Uniform flux grid from `phi_on` to `phi_off`.
pub fn table_grid(phi_on: f64, phi_off: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| phi_on + (phi_off - phi_on) * k as f64 / (n - 1) as f64).collect()
}

fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser window of `n` points with its edge value subtracted, normalised to
/// unit sum. Windows of one or two points are flat.
pub fn kaiser_window(n: usize, shape: f64) -> Vec<f64> {
    if n <= 2 {
        return vec![1.0 / n.max(1) as f64; n.max(1)];
    }
    let norm = bessel_i0(shape);
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            let x = 2.0 * k as f64 / (n - 1) as f64 - 1.0;
            bessel_i0(shape * (1.0 - x * x).max(0.0).sqrt()) / norm
        })
        .collect();
    let edge = raw[0];
    let w: Vec<f64> = raw.iter().map(|v| v - edge).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Full convolution of a length-`nb` box of ones with `win`, computed with
/// prefix sums.
pub fn box_convolve(nb: usize, win: &[f64]) -> Vec<f64> {
    let nw = win.len();
    let mut prefix = vec![0.0; nw + 1];
    for (k, w) in win.iter().enumerate() {
        prefix[k + 1] = prefix[k] + w;
    }
    (0..nb + nw - 1)
        .map(|n| {
            let hi = n.min(nw - 1) + 1;
            let lo = (n + 1).saturating_sub(nb);
            prefix[hi] - prefix[lo.min(hi)]
        })
        .collect()
}

/// Discrete Gaussian smoothing with the kernel cut at `truncate·σ` and
/// renormalised to unit sum; the signal is extended by holding its end
/// values.
pub fn gaussian_filter_truncated(wf: &Waveform, sigma: f64, truncate: f64) -> Result<Waveform> {
    if !(sigma >= 0.0) {
        return param_err("sigma must be non-negative");
    }
    if sigma == 0.0 || wf.samples.is_empty() {
        return Ok(wf.clone());
    }
    let ks = (truncate * sigma / wf.dt).ceil() as usize;
    let mut kernel: Vec<f64> = (0..=2 * ks)
        .map(|i| {
            let t = (i as f64 - ks as f64) * wf.dt;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= s);
    let n = wf.samples.len();
    let at = |i: isize| wf.samples[i.clamp(0, n as isize - 1) as usize];
    let samples = (0..n as isize)
        .map(|i| kernel.iter().enumerate().map(|(j, k)| k * at(i + j as isize - ks as isize)).sum())
        .collect();
    Ok(Waveform { dt: wf.dt, samples })
}

pub fn gaussian_filter(wf: &Waveform, sigma: f64) -> Result<Waveform> {
    gaussian_filter_truncated(wf, sigma, DEFAULT_TRUNCATE)
}

/// Normalised θ-domain envelope in `[0, 1]` on `n` samples: zero inset of
/// `pad` samples at both ends, box of `β·(n − 2·pad − 1)` samples convolved
/// with the window. Fractional box lengths blend the two neighbouring integer
/// lengths linearly, so the envelope is continuous in β.
pub fn envelope(n: usize, pad: usize, beta: f64, window: Window) -> Result<Vec<f64>> {
    if n < 2 * pad + 3 {
        return Err(Error::Pulse("gate too short for the filter inset".into()));
    }
    let nc = n - 2 * pad;
    let x = (beta * (nc - 1) as f64).clamp(1.0, (nc - 1) as f64);
    let lo = x.floor() as usize;
    let frac = x - lo as f64;
    let mut out = vec![0.0; n];
    for (nb, weight) in [(lo, 1.0 - frac), (lo + 1, frac)] {
        if weight == 0.0 || nb > nc - 1 {
            continue;
        }
        let win = match window {
            Window::Kaiser(shape) => kaiser_window(nc - nb + 1, shape),
        };
        let core = box_convolve(nb, &win);
        let peak = core.iter().cloned().fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::Pulse("degenerate pulse envelope".into()));
        }
        for (k, v) in core.iter().enumerate() {
            out[pad + k] += weight * v / peak;
        }
    }
    Ok(out)
}

/// Flux waveform for one β: the envelope scales θ between its idle and on
/// values, the inverse table maps back to flux, and the result is filtered.
pub fn synthesize(config: &PulseConfig, table: &ThetaTable) -> Result<Waveform> {
    config.validate()?;
    let inv = table.inverse()?;
    let theta_of = Pchip::new(
        if table.flux[0] < table.flux[table.flux.len() - 1] { table.flux.clone() } else { table.flux.iter().rev().cloned().collect() },
        if table.flux[0] < table.flux[table.flux.len() - 1] { table.theta.clone() } else { table.theta.iter().rev().cloned().collect() },
    )?;
    let th_on = theta_of
        .eval(config.phi_on)
        .ok_or_else(|| Error::Pulse(format!("phi_on {} outside the table", config.phi_on)))?;
    let th_off = theta_of
        .eval(config.phi_off)
        .ok_or_else(|| Error::Pulse(format!("phi_off {} outside the table", config.phi_off)))?;
    let n = (config.t_g / config.dt).round() as usize + 1;
    let pad = (SYNTH_TRUNCATE * config.sigma_filter / config.dt).ceil() as usize;
    let env = envelope(n, pad, config.beta, config.window)?;
    let samples = env
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return Ok(config.phi_off);
            }
            let th = th_off + (th_on - th_off) * s;
            inv.eval(th).ok_or_else(|| Error::Pulse(format!("θ = {th} outside the table range")))
        })
        .collect::<Result<Vec<f64>>>()?;
    gaussian_filter_truncated(&Waveform { dt: config.dt, samples }, config.sigma_filter, SYNTH_TRUNCATE)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub beta: f64,
    pub waveform: Waveform,
    /// Entangling phase of the calibrated gate (rad, in (−π, π]).
    pub phase: f64,
    pub evaluations: usize,
}

/// Shortest CZ duration `π/|2πζ_on|` (ns) for ζ in GHz.
pub fn min_gate_time(zeta_on: f64) -> f64 {
    0.5 / zeta_on.abs()
}

/// Find β so that the propagated entangling phase equals π. The bracket is
/// scanned on a uniform grid for zero crossings of `wrap(phase − π)` (jumps
/// of the wrap itself are skipped); each is refined by Brent's method and the
/// root with the lowest coherent error is kept.
pub fn calibrate_beta(
    frame: &GateFrame,
    table: &ThetaTable,
    template: &PulseConfig,
    bracket: (f64, f64),
    dt_prop: f64,
) -> Result<Calibration> {
    let zeta_on = frame.zeta_at(template.phi_on)?;
    if template.t_g <= min_gate_time(zeta_on) {
        return Err(Error::Infeasible(format!(
            "T_G = {} ns is below π/|ζ_on| = {:.3} ns",
            template.t_g,
            min_gate_time(zeta_on)
        )));
    }
    let (lo, hi) = bracket;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return param_err("beta bracket must satisfy 0 < lo < hi < 1");
    }
    let mut evals = 0usize;
    let mut f = |b: f64| -> Result<f64> {
        evals += 1;
        let wf = synthesize(&PulseConfig { beta: b, ..*template }, table)?;
        let u = frame.propagate(&wf, dt_prop)?;
        Ok(wrap_angle(frame.entangling_phase(&u) - std::f64::consts::PI))
    };
    let xs: Vec<f64> = (0..BETA_SCAN).map(|k| lo + (hi - lo) * k as f64 / (BETA_SCAN - 1) as f64).collect();
    let mut prev = (xs[0], f(xs[0])?);
    let mut crossings = Vec::new();
    for &x in &xs[1..] {
        let y = f(x)?;
        if (prev.1 < 0.0) != (y < 0.0) && (y - prev.1).abs() < std::f64::consts::PI {
            crossings.push((prev.0, x));
        }
        prev = (x, y);
    }
    if crossings.is_empty() {
        return Err(Error::Infeasible(format!("entangling phase does not reach π for β in {bracket:?}")));
    }
    let mut best: Option<(f64, Calibration)> = None;
    for (a, b) in crossings {
        let beta = brent(&mut f, a, b, 1e-10, PHASE_TOL, 60)?;
        let waveform = synthesize(&PulseConfig { beta, ..*template }, table)?;
        let u = frame.propagate(&waveform, dt_prop)?;
        let phase = frame.entangling_phase(&u);
        if wrap_angle(phase - std::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::NonConvergence(format!("entangling phase {phase} after β calibration")));
        }
        let err = frame.coherent_error(&u).coherent_error;
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, Calibration { beta, waveform, phase, evaluations: 0 }));
        }
    }
    let (_, mut cal) = best.expect("at least one crossing");
    cal.evaluations = evals;
    Ok(cal)
}
