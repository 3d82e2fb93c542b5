use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use essvi::cli::{self, InitKind, Method, RunManifest};
use essvi::global::WeightScheme;
use essvi::robust::RobustConfig;

#[derive(Parser)]
#[command(
    name = "essvi",
    version,
    about = "Arbitrage-free eSSVI surface calibration"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Robust,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Vega,
    Const,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Robust,
    Simple,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a chain and write anchors.json
    Filter {
        chain: PathBuf,
        curve: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Calibrate a surface and write surface.json and diagnostics.json
    Calibrate {
        chain: PathBuf,
        curve: PathBuf,
        #[arg(long, value_enum, default_value = "robust")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "vega")]
        weights: WeightsArg,
        #[arg(long, value_enum, default_value = "robust")]
        init: InitArg,
        #[arg(long, default_value_t = 100)]
        r: usize,
        #[arg(long, default_value_t = 1e-5)]
        epsilon: f64,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check butterfly and calendar-spread arbitrage of surface.json
    CheckArb {
        surface: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a synthetic chain, curve and generating surface
    Synth {
        /// JSON configuration; flags override its fields
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Quote bid = ask = mid
        #[arg(long)]
        zero_spread: bool,
        /// Lognormal noise on mids
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compute fit measures of surface.json against a chain
    Report {
        surface: PathBuf,
        chain: PathBuf,
        curve: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(args: Args) -> essvi::Result<i32> {
    match args.command {
        Command::Filter { chain, curve, out } => {
            cli::cmd_filter(&chain, &curve, &out)?;
        }
        Command::Calibrate {
            chain,
            curve,
            method,
            weights,
            init,
            r,
            epsilon,
            budget,
            out,
        } => {
            let manifest = RunManifest {
                method: match method {
                    MethodArg::Robust => Method::Robust,
                    MethodArg::Global => Method::Global,
                },
                weights: match weights {
                    WeightsArg::Vega => WeightScheme::InverseVegaSquared,
                    WeightsArg::Const => WeightScheme::Constant,
                },
                init: match init {
                    InitArg::Robust => InitKind::Robust,
                    InitArg::Simple => InitKind::Simple,
                },
                robust: RobustConfig {
                    r,
                    epsilon,
                    ..RobustConfig::default()
                },
                budget,
            };
            cli::cmd_calibrate(&chain, &curve, &manifest, &out)?;
        }
        Command::CheckArb { surface, out } => {
            if !cli::cmd_check_arb(&surface, &out)?.arbitrage_free {
                return Ok(cli::EXIT_ARBITRAGE);
            }
        }
        Command::Synth {
            config,
            seed,
            zero_spread,
            noise,
            out,
        } => {
            let mut cfg = cli::load_synth_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if zero_spread {
                cfg.half_spread = 0.0;
            }
            if let Some(n) = noise {
                cfg.noise = n;
            }
            cli::cmd_synth(&cfg, &out)?;
        }
        Command::Report {
            surface,
            chain,
            curve,
            out,
        } => {
            cli::cmd_report(&surface, &chain, &curve, &out)?;
        }
    }
    Ok(cli::EXIT_OK)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ESSVI_LOG", "warn")).init();
    let code = match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
