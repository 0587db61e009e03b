use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::json;

mod config;
mod experiments;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    ZzSweep,
    Spectrum,
    FindOff,
    CzGate,
    AsymmetryScan,
    NoiseDephasing,
    Tradeoff,
    OffsetMap,
    ChainCrosstalk,
    Spectator,
    T1Sweep,
    PertVsNumeric,
    TruncationScan,
    Straddling,
}

/// Tunable cross-Kerr coupler experiments.
#[derive(Debug, Parser)]
#[command(name = "sqcoupler", version, allow_negative_numbers = true)]
struct Cli {
    experiment: Experiment,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Propagation step (ns).
    #[arg(long)]
    dt: Option<f64>,
    /// Charge-basis cutoff.
    #[arg(long)]
    ncut: Option<usize>,
    /// Dressed levels kept in gate propagation.
    #[arg(long)]
    nlevels: Option<usize>,
    /// Gate time (ns) for gate experiments.
    #[arg(long)]
    tg: Option<f64>,
}

enum Failure {
    Config(String),
    Core(sqcoupler::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Core(e) if e.is_parameter() => 1,
            Failure::Core(e) if e.is_physics() => 2,
            Failure::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn load_config(cli: &Cli) -> Result<config::Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => config::Config::default(),
    };
    if let Some(dt) = cli.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
        cfg.numerics.dt_prop = dt;
    }
    if let Some(n) = cli.ncut {
        cfg.numerics.ncut = n;
    }
    if let Some(n) = cli.nlevels {
        cfg.numerics.n_levels = n;
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let name = cli.experiment.to_possible_value().expect("no skipped variants").get_name().to_string();
    let start = Instant::now();
    let outcome = experiments::run(&name, &cfg, cli.tg).map_err(Failure::Core)?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", cli.out.display())))?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        let file = format!("{}.csv", t.name);
        write(&cli.out.join(&file), &t.render())?;
        files.push(file);
    }
    let manifest = json!({
        "experiment": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "tg_override": cli.tg,
        "threads": cli.threads,
        "outputs": files,
        "summary": outcome.summary,
        "wall_time_s": wall,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain JSON");
    write(&cli.out.join(format!("{name}.manifest.json")), &text)?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sqcoupler: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
