//! Versioned TOML experiment configuration.

use serde::{Deserialize, Serialize};
use sqcoupler::circuit::CircuitParams;
use sqcoupler::noise::FluxNoiseModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub experiment: ExperimentParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            circuit: CircuitSection::default(),
            numerics: Numerics::default(),
            experiment: ExperimentParams::default(),
        }
    }
}

/// Preset plus optional per-field overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    /// `nominal` or `straddling`.
    pub preset: Option<String>,
    pub ej1: Option<f64>,
    pub ej2: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub ejc1: Option<f64>,
    pub ejc2: Option<f64>,
    pub cc1: Option<f64>,
    pub cc2: Option<f64>,
    /// Coupler asymmetry `ΔE/ΣE`, applied after the overrides.
    pub asymmetry: Option<f64>,
}

impl CircuitSection {
    pub fn params(&self, default_preset: &str) -> Result<CircuitParams, String> {
        let preset = self.preset.as_deref().unwrap_or(default_preset);
        let mut p = match preset {
            "nominal" => CircuitParams::nominal(),
            "straddling" => CircuitParams::straddling(),
            other => return Err(format!("unknown circuit preset '{other}'")),
        };
        let fields = [
            (self.ej1, &mut p.ej1),
            (self.ej2, &mut p.ej2),
            (self.c1, &mut p.c1),
            (self.c2, &mut p.c2),
            (self.ejc1, &mut p.ejc1),
            (self.ejc2, &mut p.ejc2),
            (self.cc1, &mut p.cc1),
            (self.cc2, &mut p.cc2),
        ];
        for (v, slot) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(d) = self.asymmetry {
            p = p.with_coupler_asymmetry(d).map_err(|e| e.to_string())?;
        }
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub ncut: usize,
    pub n_levels: usize,
    pub lindblad_levels: usize,
    pub dt_prop: f64,
    pub off_bracket: [f64; 2],
    pub beta_bracket: [f64; 2],
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            ncut: sqcoupler::operators::DEFAULT_NCUT,
            n_levels: sqcoupler::dynamics::DEFAULT_GATE_LEVELS,
            lindblad_levels: sqcoupler::dynamics::DEFAULT_LINDBLAD_LEVELS,
            dt_prop: sqcoupler::dynamics::DEFAULT_DT_PROP,
            off_bracket: [0.3, 0.7],
            beta_bracket: [sqcoupler::pulse::DEFAULT_BETA_BRACKET.0, sqcoupler::pulse::DEFAULT_BETA_BRACKET.1],
        }
    }
}

/// Parameters of every registered experiment; each reads only its own.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub flux_min: f64,
    pub flux_max: f64,
    pub flux_points: usize,
    /// Excitation energies listed per sweep point.
    pub eig_count: usize,
    pub spectrum_flux: Vec<f64>,
    pub t_g: f64,
    pub asymmetries: Vec<f64>,
    pub coupler_sums: Vec<f64>,
    pub noise: NoiseSection,
    pub offsets_inner: Vec<f64>,
    pub offsets_outer: Vec<f64>,
    pub drift_total_s: f64,
    pub drift_min_s: f64,
    pub chain_sum: f64,
    pub chain_asymmetries: Vec<f64>,
    pub spectator_cs: f64,
    pub spectator_cpara: f64,
    pub spectator_detunings: Vec<f64>,
    pub spectator_cparas: Vec<f64>,
    pub spectator_flux: f64,
    pub t1_grid: Vec<f64>,
    pub truncation_levels: Vec<usize>,
    pub straddling_t_g: f64,
    /// Idle-point bracket for the straddling preset, used while the global
    /// bracket is left at its default.
    pub straddling_off_bracket: [f64; 2],
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            flux_min: 0.0,
            flux_max: 1.0,
            flux_points: 101,
            eig_count: 6,
            spectrum_flux: vec![0.0],
            t_g: 22.0,
            asymmetries: vec![0.0, 0.1, 0.2, 0.5, 1.0],
            coupler_sums: vec![0.2, 0.4, 0.8, 1.2, 1.6],
            noise: NoiseSection::default(),
            offsets_inner: vec![-4e-5, -2e-5, 0.0, 2e-5, 4e-5],
            offsets_outer: vec![-4e-5, -2e-5, 0.0, 2e-5, 4e-5],
            drift_total_s: 3600.0,
            drift_min_s: 22e-9,
            chain_sum: 0.8,
            chain_asymmetries: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            spectator_cs: 69.2,
            spectator_cpara: 30.0,
            spectator_detunings: vec![-0.3, -0.2, -0.1, -0.06, 0.06, 0.1, 0.2, 0.3],
            spectator_cparas: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            spectator_flux: 0.0,
            t1_grid: vec![1e4, 3e4, 1e5, 3e5, 1e6],
            truncation_levels: vec![20, 28, 32, 40, 48],
            straddling_t_g: 43.0,
            straddling_off_bracket: [0.05, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub a_inner: f64,
    pub a_outer: f64,
    pub a_outer_prime: f64,
    pub correlation: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let m = FluxNoiseModel::default();
        NoiseSection { a_inner: m.a_inner, a_outer: m.a_outer, a_outer_prime: m.a_outer_prime, correlation: m.correlation }
    }
}

impl NoiseSection {
    pub fn model(&self) -> Result<FluxNoiseModel, String> {
        FluxNoiseModel::new(self.a_inner, self.a_outer, self.a_outer_prime, self.correlation).map_err(|e| e.to_string())
    }
}

/// Parse and validate; messages carry TOML line/column information.
pub fn parse(text: &str) -> Result<Config, String> {
    let cfg: Config = toml::from_str(text).map_err(|e| e.to_string())?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            cfg.schema_version
        ));
    }
    let e = &cfg.experiment;
    let grids: [(&str, usize); 9] = [
        ("spectrum_flux", e.spectrum_flux.len()),
        ("asymmetries", e.asymmetries.len()),
        ("coupler_sums", e.coupler_sums.len()),
        ("offsets_inner", e.offsets_inner.len()),
        ("offsets_outer", e.offsets_outer.len()),
        ("chain_asymmetries", e.chain_asymmetries.len()),
        ("spectator_detunings", e.spectator_detunings.len()),
        ("t1_grid", e.t1_grid.len()),
        ("truncation_levels", e.truncation_levels.len()),
    ];
    if let Some((name, _)) = grids.iter().find(|(_, n)| *n == 0) {
        return Err(format!("experiment.{name} must not be empty"));
    }
    if e.flux_points < 2 || !(e.flux_max > e.flux_min) {
        return Err("flux grid needs flux_points ≥ 2 and flux_max > flux_min".into());
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = toml::to_string(&Config::default()).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back.experiment.t_g, 22.0);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse("schema_version = 1\n[numerics]\nncut = \"ten\"\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(parse("schema_version = 2\n").is_err());
        assert!(parse("schema_version = 1\n[experiment]\nt1_grid = []\n").is_err());
        assert!(parse("schema_version = 1\nbogus = 3\n").is_err());
    }

    #[test]
    fn circuit_overrides() {
        let cfg = parse("schema_version = 1\n[circuit]\npreset = \"straddling\"\nasymmetry = 0.2\n").unwrap();
        let p = cfg.circuit.params("nominal").unwrap();
        assert_eq!(p.ej2, 11.0);
        assert!((p.delta_ejc() - 0.11).abs() < 1e-12);
        assert!(CircuitSection { preset: Some("x".into()), ..Default::default() }.params("nominal").is_err());
    }
}
