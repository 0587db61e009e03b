//! Registered experiments. Each returns its CSV tables and a JSON summary;
//! grid points run in parallel and are collected in grid order.

use rayon::prelude::*;
use serde_json::{json, Value};
use sqcoupler::circuit::{compile_spectator, CircuitParams, ChainParams, FluxBias, SpectatorParams};
use sqcoupler::dynamics::{
    dt_halving_delta, design_cz, offset_error_map, t1_sweep_fit, CzGate, CzOptions, GateFrame,
};
use sqcoupler::noise::{asymmetry_dephasing_sweep, coupler_energy_tradeoff, rms_drift};
use sqcoupler::perturbation::{predict_phi_off_pert, solve_zpf, zeta13_pert, zeta_pert_parts, zeta_spectator};
use sqcoupler::spectrum::{
    brent, find_phi_off_with, fmt17, frequency_excursion, idle_chain_biases_with, sweep_flux, zz_rate, Basis,
    ChainSystem, LabelOptions, SweepRow, System, TwoQubitSystem, DEFAULT_LEVELS_THREE_MODE, DEFAULT_LEVELS_TWO_MODE,
    DEFAULT_MODE_LEVELS,
};
use sqcoupler::{Error, Result};

use crate::config::Config;

/// A CSV table under construction; every float is written with 17
/// significant digits.
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(|&x| cell(x)).collect());
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        fmt17(x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Value,
}

/// JSON cannot carry non-finite numbers; they become strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(cell(x))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

struct Ctx<'a> {
    cfg: &'a Config,
    t_g: f64,
}

impl Ctx<'_> {
    fn params(&self, preset: &str) -> Result<CircuitParams> {
        self.cfg.circuit.params(preset).map_err(Error::Parameter)
    }

    fn system(&self, p: &CircuitParams) -> Result<TwoQubitSystem> {
        TwoQubitSystem::new(p, self.cfg.numerics.ncut, DEFAULT_LEVELS_TWO_MODE)
    }

    fn bracket(&self) -> (f64, f64) {
        let b = self.cfg.numerics.off_bracket;
        (b[0], b[1])
    }

    fn cz_options(&self, n_levels: usize) -> CzOptions {
        let n = &self.cfg.numerics;
        CzOptions {
            n_levels,
            dt_prop: n.dt_prop,
            off_bracket: self.bracket(),
            beta_bracket: (n.beta_bracket[0], n.beta_bracket[1]),
            ..CzOptions::default()
        }
    }

    fn gate(&self, p: &CircuitParams, t_g: f64) -> Result<CzGate> {
        design_cz(&self.system(p)?, t_g, &self.cz_options(self.cfg.numerics.n_levels))
    }
}

pub fn run(name: &str, cfg: &Config, t_g: Option<f64>) -> Result<Outcome> {
    let ctx = Ctx { cfg, t_g: t_g.unwrap_or(cfg.experiment.t_g) };
    match name {
        "zz-sweep" => zz_sweep(&ctx),
        "spectrum" => spectrum(&ctx),
        "find-off" => find_off(&ctx),
        "cz-gate" => cz_gate(&ctx, "nominal", ctx.t_g),
        "asymmetry-scan" => asymmetry_scan(&ctx),
        "noise-dephasing" => noise_dephasing(&ctx),
        "tradeoff" => tradeoff(&ctx),
        "offset-map" => offset_map(&ctx),
        "chain-crosstalk" => chain_crosstalk(&ctx),
        "spectator" => spectator(&ctx),
        "t1-sweep" => t1_sweep(&ctx),
        "pert-vs-numeric" => pert_vs_numeric(&ctx),
        "truncation-scan" => truncation_scan(&ctx),
        "straddling" => cz_gate(&ctx, "straddling", t_g.unwrap_or(cfg.experiment.straddling_t_g)),
        other => Err(Error::Parameter(format!("unknown experiment '{other}'"))),
    }
}

fn flux_grid(ctx: &Ctx) -> Vec<f64> {
    let e = &ctx.cfg.experiment;
    linspace(e.flux_min, e.flux_max, e.flux_points)
}

fn zz_sweep(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let sys = ctx.system(&p)?;
    let k = ctx.cfg.experiment.eig_count;
    let rows: Vec<SweepRow> = flux_grid(ctx)
        .par_iter()
        .map(|&x| sweep_flux(&sys, &[x], k).map(|mut v| v.remove(0)))
        .collect::<Result<_>>()?;
    let mut header = vec!["flux", "zeta_GHz", "hybridization", "omega1_GHz", "omega2_GHz"];
    let eig_names: Vec<String> = (0..k).map(|i| format!("eig_{i}")).collect();
    header.extend(eig_names.iter().map(String::as_str));
    let mut t = Table::new("zz_sweep", &header);
    for r in &rows {
        let (w1, w2) = r.qubit_freqs.unwrap_or((f64::NAN, f64::NAN));
        let mut v = vec![r.flux, r.zeta.unwrap_or(f64::NAN), r.hybridization.unwrap_or(f64::NAN), w1, w2];
        v.extend((0..k).map(|i| r.eigs.get(i).copied().unwrap_or(f64::NAN)));
        t.push(&v);
    }
    let phi_off = find_phi_off_with(&sys, ctx.bracket()).ok();
    let excursion = phi_off.map(|off| frequency_excursion(&rows, 0.0, off));
    let unlabeled = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(Outcome {
        tables: vec![t],
        summary: json!({ "phi_off": phi_off, "frequency_excursion_GHz": excursion, "unlabeled_points": unlabeled }),
    })
}

fn spectrum(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let sys = ctx.system(&p)?;
    let per_flux: Vec<_> = ctx
        .cfg
        .experiment
        .spectrum_flux
        .par_iter()
        .map(|&x| sys.spectrum(&FluxBias::operating(x)).map(|sp| (x, sp)))
        .collect::<Result<_>>()?;
    let mut t = Table::new("spectrum", &["flux", "n1", "n2", "energy_GHz", "overlap"]);
    for (x, sp) in &per_flux {
        let e0 = sp.eigenvalues[0];
        let mut labeled: Vec<(&Vec<usize>, usize)> = sp.labels.iter().map(|(k, &v)| (k, v)).collect();
        labeled.sort_by_key(|&(_, i)| i);
        for (label, i) in labeled {
            t.push(&[*x, label[0] as f64, label[1] as f64, sp.eigenvalues[i] - e0, sp.overlap(label)?]);
        }
    }
    Ok(Outcome { tables: vec![t], summary: json!({ "points": per_flux.len() }) })
}

fn find_off(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let sys = ctx.system(&p)?;
    let phi_off = find_phi_off_with(&sys, ctx.bracket())?;
    let pert = predict_phi_off_pert(&p, ctx.bracket()).ok();
    let zeta_on = sys.zeta(0.0)?;
    let mut t = Table::new("find_off", &["phi_off", "phi_off_pert", "zeta_on_GHz", "zeta_at_off_GHz"]);
    t.push(&[phi_off, pert.unwrap_or(f64::NAN), zeta_on, sys.zeta(phi_off)?]);
    Ok(Outcome { tables: vec![t], summary: json!({ "phi_off": phi_off, "phi_off_pert": pert, "zeta_on_GHz": zeta_on }) })
}

fn gate_summary(g: &CzGate, t_g: f64) -> Value {
    json!({
        "t_g": t_g,
        "phi_off": g.phi_off,
        "zeta_on_GHz": g.zeta_on,
        "beta": g.beta,
        "coherent_error": g.result.coherent_error,
        "leakage": g.result.leakage,
        "entangling_phase": g.result.entangling_phase,
        "virtual_z_phases": g.result.phases,
    })
}

fn waveform_table(g: &CzGate) -> Table {
    let mut t = Table::new("waveform", &["t_ns", "phi_e1"]);
    for (i, &v) in g.waveform.samples.iter().enumerate() {
        t.push(&[i as f64 * g.waveform.dt, v]);
    }
    t
}

fn cz_gate(ctx: &Ctx, preset: &str, t_g: f64) -> Result<Outcome> {
    let p = ctx.params(preset)?;
    let mut ctx2 = Ctx { cfg: ctx.cfg, t_g };
    let straddle_cfg;
    if preset == "straddling" && ctx.cfg.numerics.off_bracket == crate::config::Numerics::default().off_bracket {
        // Straddling pairs idle below half a flux quantum.
        let mut c = ctx.cfg.clone();
        c.numerics.off_bracket = c.experiment.straddling_off_bracket;
        straddle_cfg = c;
        ctx2.cfg = &straddle_cfg;
    }
    let g = ctx2.gate(&p, t_g)?;
    let mut t = Table::new(
        "gate",
        &["t_g_ns", "phi_off", "zeta_on_GHz", "beta", "coherent_error", "leakage", "entangling_phase"],
    );
    t.push(&[t_g, g.phi_off, g.zeta_on, g.beta, g.result.coherent_error, g.result.leakage, g.result.entangling_phase]);
    Ok(Outcome { tables: vec![t, waveform_table(&g)], summary: gate_summary(&g, t_g) })
}

fn asymmetry_scan(ctx: &Ctx) -> Result<Outcome> {
    let base = ctx.params("nominal")?;
    let rows: Vec<(f64, f64, CzGate)> = ctx
        .cfg
        .experiment
        .asymmetries
        .par_iter()
        .map(|&d| {
            let p = base.with_coupler_asymmetry(d)?;
            Ok((d, p.delta_ejc(), ctx.gate(&p, ctx.t_g)?))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "asymmetry_scan",
        &["asymmetry", "delta_ejc_GHz", "phi_off", "beta", "coherent_error", "leakage"],
    );
    for (d, de, g) in &rows {
        t.push(&[*d, *de, g.phi_off, g.beta, g.result.coherent_error, g.result.leakage]);
    }
    let worst = rows.iter().map(|r| r.2.result.coherent_error).fold(0.0, f64::max);
    Ok(Outcome { tables: vec![t], summary: json!({ "t_g": ctx.t_g, "max_coherent_error": worst }) })
}

fn noise_dephasing(ctx: &Ctx) -> Result<Outcome> {
    let base = ctx.params("nominal")?;
    let noise = ctx.cfg.experiment.noise.model().map_err(Error::Parameter)?;
    let rows: Vec<_> = ctx
        .cfg
        .experiment
        .asymmetries
        .par_iter()
        .map(|&d| asymmetry_dephasing_sweep(&base, &[d], &noise, ctx.bracket()).map(|mut v| v.remove(0)))
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "noise_dephasing",
        &[
            "asymmetry",
            "delta_ejc_GHz",
            "phi_off",
            "t_echo_10_us",
            "t_echo_01_us",
            "dw10_dphi_i_hf",
            "dw10_dphi_o_hf",
            "dw10_dphi_i_fd",
            "dw10_dphi_o_fd",
            "rel_diff_10",
            "rel_diff_01",
        ],
    );
    for r in &rows {
        let (h, f) = (r.derivs_10.hellmann_feynman, r.derivs_10.finite_difference);
        t.push(&[
            r.asymmetry,
            r.delta_ejc,
            r.phi_off,
            r.t_echo_10,
            r.t_echo_01,
            h[0],
            h[1],
            f[0],
            f[1],
            r.derivs_10.rel_diff,
            r.derivs_01.rel_diff,
        ]);
    }
    let agree = rows.iter().all(|r| r.derivs_10.agree && r.derivs_01.agree);
    Ok(Outcome { tables: vec![t], summary: json!({ "derivatives_agree": agree }) })
}

fn tradeoff(ctx: &Ctx) -> Result<Outcome> {
    let base = ctx.params("nominal")?;
    let noise = ctx.cfg.experiment.noise.model().map_err(Error::Parameter)?;
    let rows: Vec<_> = ctx
        .cfg
        .experiment
        .coupler_sums
        .par_iter()
        .map(|&s| coupler_energy_tradeoff(&base, &[s], &noise, ctx.bracket()).map(|mut v| v.remove(0)))
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "tradeoff",
        &["sum_ejc_GHz", "phi_off", "zeta_on_GHz", "min_gate_time_ns", "t_echo_10_us", "t_echo_01_us"],
    );
    for r in &rows {
        t.push(&[
            r.sum_ejc,
            r.phi_off.unwrap_or(f64::NAN),
            r.zeta_on,
            r.min_gate_time,
            r.t_echo_10,
            r.t_echo_01,
        ]);
    }
    Ok(Outcome { tables: vec![t], summary: json!({ "points": rows.len() }) })
}

fn offset_map(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let g = ctx.gate(&p, ctx.t_g)?;
    let e = &ctx.cfg.experiment;
    let dt = ctx.cfg.numerics.dt_prop;
    let grid: Vec<Vec<f64>> = e
        .offsets_inner
        .par_iter()
        .map(|&di| offset_error_map(&g.frame, &g.waveform, g.result.phases, &[di], &e.offsets_outer, dt).map(|mut m| m.remove(0)))
        .collect::<Result<_>>()?;
    let mut t = Table::new("offset_map", &["delta_inner", "delta_outer", "coherent_error"]);
    for (row, &di) in grid.iter().zip(&e.offsets_inner) {
        for (&err, &d_o) in row.iter().zip(&e.offsets_outer) {
            t.push(&[di, d_o, err]);
        }
    }
    let noise = e.noise.model().map_err(Error::Parameter)?;
    let drift_i = rms_drift(noise.a_inner, e.drift_total_s, e.drift_min_s)?;
    let drift_o = rms_drift(noise.a_outer, e.drift_total_s, e.drift_min_s)?;
    let mut s = gate_summary(&g, ctx.t_g);
    s["rms_drift_inner"] = num(drift_i);
    s["rms_drift_outer"] = num(drift_o);
    Ok(Outcome { tables: vec![t], summary: s })
}

fn chain_crosstalk(ctx: &Ctx) -> Result<Outcome> {
    let e = &ctx.cfg.experiment;
    let ncut = ctx.cfg.numerics.ncut;
    let bracket = ctx.bracket();
    let rows: Vec<_> = e
        .chain_asymmetries
        .par_iter()
        .map(|&d| {
            let chain = ChainParams::nominal(e.chain_sum, d);
            let sys = ChainSystem::new(&chain, ncut, DEFAULT_MODE_LEVELS, DEFAULT_LEVELS_THREE_MODE)?;
            let idle = idle_chain_biases_with(&sys, bracket, 8)?;
            let pert = zeta13_pert(&chain, idle.phi12, idle.phi23)?;
            Ok((d, idle, pert))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "chain_crosstalk",
        &["asymmetry", "phi12", "phi23", "zeta12_GHz", "zeta23_GHz", "zeta13_GHz", "zeta13_pert_GHz"],
    );
    for (d, i, pert) in &rows {
        t.push(&[*d, i.phi12, i.phi23, i.zeta12, i.zeta23, i.zeta13, *pert]);
    }
    let worst = rows.iter().map(|r| r.1.zeta13.abs()).fold(0.0, f64::max);
    Ok(Outcome { tables: vec![t], summary: json!({ "max_abs_zeta13_GHz": worst }) })
}

/// Spectator Josephson energy that puts its bare frequency at `omega2 + det`.
fn spectator_ej(sp: &SpectatorParams, ec_s: f64, target: f64) -> Result<f64> {
    let f = |ej: f64| Ok(solve_zpf(ej, ec_s)?.omega - target);
    brent(f, 1.0, 500.0, 1e-12, 1e-10, 200).map_err(|e| match e {
        Error::NoIdlePoint(_) | Error::NonConvergence(_) => {
            Error::Parameter(format!("no spectator junction reaches {target} GHz (c_s = {} fF)", sp.c_s))
        }
        other => other,
    })
}

fn spectator_point(ctx: &Ctx, base: &CircuitParams, c_para: f64, det: f64) -> Result<[f64; 7]> {
    let e = &ctx.cfg.experiment;
    let bias = FluxBias::operating(e.spectator_flux);
    let mut sp = SpectatorParams { circuit: *base, ej_s: base.ej2, c_s: e.spectator_cs, c_para };
    let spec0 = compile_spectator(&sp, &bias)?;
    let omega2 = solve_zpf(base.ej2, spec0.ec[1])?.omega;
    sp.ej_s = spectator_ej(&sp, spec0.ec[2], omega2 + det)?;
    let pert = zeta_spectator(&sp, e.spectator_flux)?;
    let sys = System::new(compile_spectator(&sp, &bias)?, ctx.cfg.numerics.ncut, Basis::Truncated(DEFAULT_MODE_LEVELS))?;
    let spectrum = sys.spectrum(&sys.default_offsets(), DEFAULT_LEVELS_THREE_MODE, &LabelOptions::default())?;
    let z1s = zz_rate(&spectrum, 3, (0, 2))?;
    let z2s = zz_rate(&spectrum, 3, (1, 2))?;
    Ok([c_para, det, sp.ej_s, pert.omega_s, pert.zeta1s, z1s, z2s])
}

fn spectator(ctx: &Ctx) -> Result<Outcome> {
    let base = ctx.params("nominal")?;
    let e = &ctx.cfg.experiment;
    let nearest = e
        .spectator_detunings
        .iter()
        .copied()
        .filter(|d| *d < 0.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let fixed_det = if nearest.is_finite() { nearest } else { e.spectator_detunings[0] };
    let mut points: Vec<(f64, f64)> = e.spectator_detunings.iter().map(|&d| (e.spectator_cpara, d)).collect();
    points.extend(e.spectator_cparas.iter().map(|&c| (c, fixed_det)));
    let rows: Vec<[f64; 7]> =
        points.par_iter().map(|&(c, d)| spectator_point(ctx, &base, c, d)).collect::<Result<_>>()?;
    let header = ["c_para_aF", "detuning_GHz", "ej_s_GHz", "omega_s_GHz", "zeta1s_pert_GHz", "zeta1s_GHz", "zeta2s_GHz"];
    let n = e.spectator_detunings.len();
    let mut by_det = Table::new("spectator_detuning", &header);
    let mut by_c = Table::new("spectator_cpara", &header);
    for (i, r) in rows.iter().enumerate() {
        if i < n {
            by_det.push(r);
        } else {
            by_c.push(r);
        }
    }
    Ok(Outcome {
        tables: vec![by_det, by_c],
        summary: json!({ "flux": e.spectator_flux, "cpara_scan_detuning_GHz": fixed_det }),
    })
}

fn t1_sweep(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let g = ctx.gate(&p, ctx.t_g)?;
    let sys = ctx.system(&p)?;
    let frame = GateFrame::new(&sys, g.phi_off, ctx.cfg.numerics.lindblad_levels)?;
    let grid = &ctx.cfg.experiment.t1_grid;
    let (a, b, infid) = t1_sweep_fit(&frame, &g.waveform, grid, ctx.cfg.numerics.dt_prop)?;
    let mut t = Table::new("t1_sweep", &["t1_ns", "infidelity", "fit"]);
    for (&t1, &f) in grid.iter().zip(&infid) {
        t.push(&[t1, f, a * g.waveform.duration() / t1 + b]);
    }
    Ok(Outcome { tables: vec![t], summary: json!({ "t_g": ctx.t_g, "fit_a": a, "fit_b": b }) })
}

fn pert_vs_numeric(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let sys = ctx.system(&p)?;
    let rows: Vec<[f64; 8]> = flux_grid(ctx)
        .par_iter()
        .map(|&x| {
            let numeric = match sys.zeta(x) {
                Ok(z) => z,
                Err(e) if e.is_physics() => f64::NAN,
                Err(e) => return Err(e),
            };
            let nan = [f64::NAN; 5];
            let [z1, z1m, z2c, z2o, tot] = match zeta_pert_parts(&p, x) {
                Ok(z) => [z.zeta1, z.zeta1_matrix, z.zeta2_c, z.zeta2_odd, z.total()],
                Err(e) if e.is_physics() => nan,
                Err(e) => return Err(e),
            };
            Ok([x, numeric, tot, z1, z1m, z2c, z2o, (tot - numeric) / numeric])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(
        "pert_vs_numeric",
        &["flux", "zeta_numeric_GHz", "zeta_pert_GHz", "zeta1_GHz", "zeta1_matrix_GHz", "zeta2_c_GHz", "zeta2_odd_GHz", "rel_err"],
    );
    for r in &rows {
        t.push(r);
    }
    Ok(Outcome { tables: vec![t], summary: json!({ "points": rows.len() }) })
}

fn truncation_scan(ctx: &Ctx) -> Result<Outcome> {
    let p = ctx.params("nominal")?;
    let g = ctx.gate(&p, ctx.t_g)?;
    let sys = ctx.system(&p)?;
    let dt = ctx.cfg.numerics.dt_prop;
    let rows: Vec<(usize, f64, f64)> = ctx
        .cfg
        .experiment
        .truncation_levels
        .par_iter()
        .map(|&n| {
            let frame = GateFrame::new(&sys, g.phi_off, n)?;
            let r = frame.coherent_error(&frame.propagate(&g.waveform, dt)?);
            Ok((n, r.coherent_error, r.leakage))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new("truncation_scan", &["n_levels", "coherent_error", "leakage"]);
    for &(n, e, l) in &rows {
        t.push(&[n as f64, e, l]);
    }
    let halving = dt_halving_delta(&g.frame, &g.waveform, dt)?;
    let mut s = gate_summary(&g, ctx.t_g);
    s["dt_halving_delta"] = num(halving);
    Ok(Outcome { tables: vec![t], summary: s })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_use_seventeen_digits() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(&[0.1, f64::INFINITY]);
        assert_eq!(t.render(), "a,b\n1.0000000000000001e-1,inf\n");
    }

    #[test]
    fn unknown_experiment_is_a_parameter_error() {
        let cfg = Config::default();
        assert!(matches!(run("nope", &cfg, None), Err(e) if e.is_parameter()));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
