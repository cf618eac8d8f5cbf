use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use qbm::propagation::Measure;
use qbm::Simulation;
use qbm_cli::commands::{self, DecayOutputs};
use qbm_cli::config::parse_curves;
use qbm_cli::{CliError, RawConfig, RunConfig};

/// Decoherence of two-packet superpositions in an Ohmic bath.
#[derive(Debug, Parser)]
#[command(name = "qbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherence decay curves and their limiting laws.
    Decay {
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script for the CSV.
        #[arg(long)]
        plot_script: bool,
        /// Also write the master-equation coefficients on the time grid.
        #[arg(long)]
        dump_coefficients: bool,
    },
    /// Wigner function snapshots and position densities.
    Wigner {
        #[command(flatten)]
        common: Common,
    },
    /// Regime classification with bounds and timescales.
    Regimes {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Convention of the quoted decoherence times.
        #[arg(long, value_enum, default_value_t = MeasureArg::Norm)]
        measure: MeasureArg,
    },
    /// Decoherence times over a list of separations.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop the determinant prefactor from n12.
    #[arg(long)]
    no_prefactor: bool,
    /// Comma-separated subset of exact, gr, id1, id2.
    #[arg(long)]
    curves: Option<String>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MeasureArg {
    Norm,
    Indicator,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
            raw.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            raw.set("output_dir", out.to_string_lossy())?;
        }
        if self.no_prefactor {
            raw.set("include_prefactor", "false")?;
        }
        if let Some(curves) = &self.curves {
            parse_curves(curves)?;
            raw.set("curves", curves.as_str())?;
        }
        if let Some(t) = self.tmax {
            raw.set("t_max", t.to_string())?;
        }
        if let Some(n) = self.samples {
            raw.set("n_samples", n.to_string())?;
        }
        RunConfig::from_raw(&raw)
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("QBM_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("QBM_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Decay {
            common,
            plot_script,
            dump_coefficients,
        } => {
            let cfg = common.load()?;
            if let Some(w) = cfg.scenario.warning() {
                log::warn!("{w}");
            }
            let sim = Simulation::new(cfg.params);
            let outputs = DecayOutputs {
                plot_script,
                coefficients: dump_coefficients,
            };
            for path in commands::run_decay(&cfg, &sim, outputs)? {
                info!("wrote {}", path.display());
                println!("{}", path.display());
            }
        }
        Command::Wigner { common } => {
            let cfg = common.load()?;
            let sim = Simulation::new(cfg.params);
            for path in commands::run_wigner(&cfg, &sim)? {
                println!("{}", path.display());
            }
        }
        Command::Regimes {
            common,
            format,
            measure,
        } => {
            let cfg = common.load()?;
            let sim = Simulation::new(cfg.params);
            let measure = match measure {
                MeasureArg::Norm => Measure::Norm,
                MeasureArg::Indicator => Measure::Indicator,
            };
            let report = commands::run_regimes(&cfg, &sim, measure)?;
            match format {
                Format::Text => println!("{report}"),
                Format::Csv => {
                    println!("key,value");
                    for (k, v) in report.key_values() {
                        println!("{k},{v}");
                    }
                }
            }
        }
        Command::Sweep { common } => {
            let cfg = common.load()?;
            let sim = Simulation::new(cfg.params);
            let path = commands::run_sweep(&cfg, &sim)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.guidance() {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
