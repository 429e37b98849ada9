//! `cfsl`: experiment driver for the split-learning-over-cell-free-MIMO
//! workbench. Subcommands write CSV result files into the output directory
//! (flag, `CFSL_OUT_DIR`, or `./out`) and echo the effective configuration.

use std::path::PathBuf;

use anyhow::Result;
use cfsl_cli::commands;
use cfsl_cli::config::{ExperimentConfig, Overrides, Scheme, SweepAxis};
use cfsl_cli::output::resolve_out_dir;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cfsl", about = "Split federated learning over user-centric cell-free MIMO: simulation and optimization driver", version)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to $CFSL_OUT_DIR, then ./out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of APs override.
    #[arg(long, global = true)]
    aps: Option<usize>,
    /// Number of UEs override.
    #[arg(long, global = true)]
    ues: Option<usize>,
    /// Bandwidth override, Hz.
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    /// UE compute frequency override, Hz.
    #[arg(long, global = true)]
    f_ue: Option<f64>,
    /// Accuracy-proxy exponent override.
    #[arg(long, global = true)]
    ell: Option<f64>,
    /// Training episode cap override.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Channel draws per expectation override.
    #[arg(long, global = true)]
    n_draws: Option<usize>,
    /// Sweep axis override: f_ue, w, or ell.
    #[arg(long, global = true)]
    sweep_axis: Option<SweepAxis>,
    /// Sweep values override (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    sweep_values: Option<Vec<f64>>,
    /// Scheme list override (comma-separated: UCSFL, BL1, BL2, BL3).
    #[arg(long, global = true, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One short-term solve on a fixed strategy; writes the outer-iteration
    /// trace and the resulting rates.
    RunNbcd {
        /// Split layer per UE (comma-separated, 1-based); default: no split.
        #[arg(long, value_delimiter = ',')]
        splits: Option<Vec<usize>>,
    },
    /// Train the long-term strategy learner; writes the reward trace and the
    /// best strategy.
    RunMais,
    /// Sweep the configured axis and compare schemes; writes sweep.csv.
    RunLatencySweep,
    /// Desk-scale convergence study with exactly computed bound constants.
    RunConvergence,
    /// Parse and validate the configuration, print the effective TOML.
    ValidateConfig,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let over = Overrides {
        seed: cli.seed,
        num_aps: cli.aps,
        num_ues: cli.ues,
        bandwidth: cli.bandwidth,
        f_ue: cli.f_ue,
        ell: cli.ell,
        episodes: cli.episodes,
        n_draws: cli.n_draws,
        sweep_axis: cli.sweep_axis,
        sweep_values: cli.sweep_values,
        schemes: cli.schemes,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &over)?;
    match cli.command {
        Command::ValidateConfig => {
            print!("{}", commands::validate_config(&cfg)?);
            Ok(())
        }
        cmd => {
            let out = resolve_out_dir(cli.out_dir.as_deref())?;
            match cmd {
                Command::RunNbcd { splits } => commands::run_nbcd(&cfg, &out, splits),
                Command::RunMais => commands::run_mais(&cfg, &out),
                Command::RunLatencySweep => commands::run_latency_sweep(&cfg, &out),
                Command::RunConvergence => commands::run_convergence(&cfg, &out),
                Command::ValidateConfig => unreachable!(),
            }
        }
    }
}
