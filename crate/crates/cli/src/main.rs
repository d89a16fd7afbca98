use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qdt_cli::commands::{self, BootstrapOverrides, FitOverrides};
use qdt_cli::{Result, StudyConfig};

#[derive(Debug, Parser)]
#[command(name = "qdt", version, about = "Joint state and measurement tomography for trapped-ion style readout")]
struct Cli {
    /// Master seed (simulate, bootstrap, run).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "qdt-run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the default two-ion study config.
    Config,
    /// Simulate reference and probing histograms from a study config.
    Simulate { config: PathBuf },
    /// Training split, greedy binning, and the maximum-likelihood fit.
    Fit {
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        t_sigma: Option<f64>,
        #[arg(long)]
        t_q: Option<f64>,
    },
    /// Upper and lower bounds of observables over the maximum-likelihood set.
    Bounds {
        /// `bell`, `second-ion-bright`, or a JSON `{label, matrix}` file. Repeatable.
        #[arg(long = "observable")]
        observables: Vec<String>,
    },
    /// Parametric bootstrap and likelihood-ratio test.
    Bootstrap {
        #[arg(long = "t")]
        t: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Result table and plot-data CSVs.
    Report,
    /// simulate, fit, bounds, bootstrap and report in one go.
    Run {
        config: PathBuf,
        #[arg(long = "t")]
        t: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Config => {
            print!("{}", StudyConfig::two_ion().to_json());
            Ok(())
        }
        Command::Simulate { config } => commands::cmd_simulate(&config, out, cli.seed),
        Command::Fit { bins, t_sigma, t_q } => commands::cmd_fit(out, &FitOverrides { bins, t_sigma, t_q }),
        Command::Bounds { observables } => commands::cmd_bounds(out, &observables),
        Command::Bootstrap { t, workers } => {
            commands::cmd_bootstrap(out, &BootstrapOverrides { t, workers, seed: cli.seed })
        }
        Command::Report => commands::cmd_report(out),
        Command::Run { config, t, workers } => {
            commands::cmd_run(&config, out, cli.seed, &BootstrapOverrides { t, workers, seed: None })
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
