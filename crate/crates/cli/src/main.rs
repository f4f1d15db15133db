//! `qmetro`: sweeps, circuit optimization, Wigner grids and ablations from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmetro::Nonlinearity;

use crate::config::{GridSpec, Measurement, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
    Core(qmetro::Error),
}

impl CliError {
    fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<qmetro::Error> for CliError {
    fn from(e: qmetro::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Jc,
    Kerr,
}

impl From<KindArg> for Nonlinearity {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Jc => Nonlinearity::Jc,
            KindArg::Kerr => Nonlinearity::Kerr,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

#[derive(Parser, Debug)]
#[command(name = "qmetro", version, about = "Photonic phase-estimation simulator and circuit optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every run; flags override the configuration file.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML configuration, or a previous run's manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Total mean photon number N.
    #[arg(long, value_parser = positive)]
    n: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    measurement: Option<Measurement>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Quadrature grid points per mode.
    #[arg(long)]
    homodyne_points: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    dmax: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    initial_step: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            kind: self.kind.map(Into::into),
            n: self.n,
            cutoff: self.cutoff,
            phi: self.phi,
            delta: self.delta,
            measurement: self.measurement,
            theta: self.theta,
            homodyne_points: self.homodyne_points,
            seeds: self.seeds,
            d_max: self.dmax,
            max_iters: self.max_iters,
            tol: self.tol,
            init_scale: self.init_scale,
            initial_step: self.initial_step,
            master_seed: self.master_seed,
            sweep: None,
            output: self.output.clone(),
            threads: self.threads,
        }
    }

    fn resolve(&self, extra: impl FnOnce(&mut Overrides)) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut o = self.overrides();
        extra(&mut o);
        let config = base.apply(&o).resolve()?;
        if let Some(threads) = config.threads {
            // only the first call can size the global pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Prepare,
    Measure,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    /// Free angle versus pre-measurement circuit.
    Theta,
    /// Bare measurement versus pre-measurement circuit, depth by depth.
    Premeasure,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continuous-evolution sweep of 1/F_Q (and optional 1/F_C) with its extrema.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Add the photon-counting CFI column.
        #[arg(long)]
        counting: bool,
        /// Add the homodyne CFI column at the configured angle.
        #[arg(long)]
        homodyne: bool,
    },
    /// Optimize preparation and/or pre-measurement circuits.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "prepare")]
        stage: Stage,
        /// Preparation parameter file (default: <output>/prepare_params.json).
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Wigner function of one photonic mode.
    #[command(group(clap::ArgGroup::new("source").required(true).args(["time", "params", "vacuum"])))]
    Wigner {
        #[command(flatten)]
        common: Common,
        /// Continuous-evolution time of the probe.
        #[arg(long)]
        time: Option<f64>,
        /// Parameter file holding an optimized preparation circuit.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Depth to pick from the parameter file (default: best overall).
        #[arg(long, requires = "params")]
        depth: Option<usize>,
        /// The single-mode vacuum.
        #[arg(long)]
        vacuum: bool,
        /// Photonic mode, 1 or 2.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        mode: u8,
        #[arg(long, value_parser = positive)]
        half_width: Option<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// SQL, TFS and HL inverse-Fisher bounds.
    Bench {
        /// Total mean photon number N.
        #[arg(long, value_parser = positive)]
        n: f64,
    },
    /// Homodyne 1/F_C against the quadrature angle for a continuous probe.
    ThetaSweep {
        #[command(flatten)]
        common: Common,
        /// Probe time (default: first 1/F_Q minimum for JC, pi/4 for Kerr).
        #[arg(long)]
        time: Option<f64>,
        /// Angles in [0, pi).
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Measurement ablations on optimized probes.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "premeasure")]
        variant: Variant,
        /// Preparation parameter file (default: <output>/prepare_params.json).
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep { common, start, stop, step, counting, homodyne } => {
            let config = common.resolve(|o| {
                if start.is_some() || stop.is_some() || step.is_some() {
                    let kind = o.kind.unwrap_or(RunConfig::default().kind);
                    let d = GridSpec::default_for(kind);
                    o.sweep = Some(GridSpec { start: start.unwrap_or(d.start), stop: stop.unwrap_or(d.stop), step: step.unwrap_or(d.step) });
                }
            })?;
            commands::sweep(config, counting, homodyne)
        }
        Command::Optimize { common, stage, from } => {
            let config = common.resolve(|_| {})?;
            commands::optimize(config, stage, from)
        }
        Command::Wigner { common, time, params, depth, vacuum, mode, half_width, points } => {
            let config = common.resolve(|_| {})?;
            let source = match (time, params, vacuum) {
                (Some(t), None, false) => commands::WignerSource::Continuous(t),
                (None, Some(p), false) => commands::WignerSource::Params(p, depth),
                (None, None, true) => commands::WignerSource::Vacuum,
                _ => unreachable!("clap enforces exactly one source"),
            };
            commands::wigner(config, source, mode as usize, half_width, points)
        }
        Command::Bench { n } => commands::bench(n),
        Command::ThetaSweep { common, time, count } => {
            let config = common.resolve(|_| {})?;
            commands::theta_sweep(config, time, count)
        }
        Command::Ablate { common, variant, from } => {
            let config = common.resolve(|_| {})?;
            commands::ablate(config, variant, from)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
