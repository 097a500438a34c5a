use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pu_forge::commands::{cmd_ablate, cmd_diagnose_gap, cmd_gen_data, cmd_train, Method, Sweep};
use pu_forge::config::ExperimentConfig;
use pu_forge::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pu-forge",
    version,
    about = "Positive-unlabeled learning experiments: data generation, training, diagnostics, ablations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment config file (flat `key = value` format).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic training split and write it as CSV.
    GenData {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train across seeds and write metrics.csv, summary.json, model files.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// upu, nnpu, or pspu.
        #[arg(long, default_value = "pspu")]
        method: String,
    },
    /// PU-only run reporting the per-epoch risk gap decomposition.
    DiagnoseGap {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sweep one knob across its standard values, all seeds each.
    Ablate {
        #[command(flatten)]
        common: CommonOpts,
        /// ns_ratio, transfer_mode, or mixup_onoff.
        #[arg(long)]
        sweep: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            cmd_gen_data(&cfg, common.out.as_deref())
        }
        Cmd::Train { common, method } => {
            let method: Method = method.parse()?;
            let cfg = ExperimentConfig::load(&common.config)?;
            cmd_train(&cfg, method, common.out.as_deref())
        }
        Cmd::DiagnoseGap { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            cmd_diagnose_gap(&cfg, common.out.as_deref())
        }
        Cmd::Ablate { common, sweep } => {
            let sweep: Sweep = sweep.parse()?;
            let cfg = ExperimentConfig::load(&common.config)?;
            cmd_ablate(&cfg, sweep, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not failures; genuine usage errors exit 1.
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
