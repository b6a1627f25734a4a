use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gk_girsanov::experiment::{
    reproduce, run_biased_campaign, run_oracle, run_reference_campaign, ExperimentConfig, Overrides,
};

#[derive(Parser)]
#[command(version, about = "Green-Kubo estimators with Girsanov reweighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the reference dynamics and estimate GK, F_T derivatives and alpha_hat.
    Reference(Common),
    /// Simulate the biased dynamics for every alpha of the config.
    Biased(Common),
    /// Evaluate the deterministic asymptotic constants.
    Oracle(Common),
    /// Run a preset desk-scale experiment and compare against target values.
    Reproduce {
        /// One of fig-1d-derivatives, fig-1d-alpha-scaling, fig-1d-reduction,
        /// fig-2d-autocorr, fig-2d-derivatives, fig-2d-alpha.
        figure: String,
        #[command(flatten)]
        common: OptionalConfig,
    },
}

#[derive(Args)]
struct Flags {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicas J.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads (0 = one per core); overrides GK_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            replicas: self.replicas,
            workers: self.workers,
            out: self.out.clone(),
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct OptionalConfig {
    /// JSON experiment config replacing the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

fn load(path: &PathBuf, flags: &Flags) -> gk_girsanov::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    flags.overrides().apply(&mut cfg)?;
    Ok(cfg)
}

fn run(cli: Cli) -> gk_girsanov::Result<()> {
    let manifest = match cli.command {
        Command::Reference(c) => run_reference_campaign(&load(&c.config, &c.flags)?)?,
        Command::Biased(c) => run_biased_campaign(&load(&c.config, &c.flags)?)?,
        Command::Oracle(c) => run_oracle(&load(&c.config, &c.flags)?)?,
        Command::Reproduce { figure, common } => {
            let mut cfg = match &common.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => gk_girsanov::experiment::figure_config(&figure)?,
            };
            common.flags.overrides().apply(&mut cfg)?;
            let (manifest, report) = reproduce(&figure, Some(cfg))?;
            for e in &report.entries {
                let status = match e.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "info",
                };
                println!("{status} {} = {:.6e} ({})", e.quantity, e.value, e.criterion);
            }
            manifest
        }
    };
    for o in &manifest.outputs {
        println!("wrote {}", o.file);
    }
    println!("wall time {:.2} s", manifest.wall_time_s);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
