use std::path::PathBuf;
use std::process::ExitCode;

use cavity_soliton_cli::config::{load_spec, CliOverrides};
use cavity_soliton_cli::run_experiment;
use clap::Parser;
use log::{error, warn};

/// Run cavity-soliton experiments and write CSV/JSON result bundles.
#[derive(Debug, Parser)]
#[command(name = "cavity-soliton", version)]
struct Args {
    /// TOML or JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,

    /// fig2, fig3, fig4, detect, dissipation or dispersion.
    #[arg(long)]
    experiment: Option<String>,

    /// Output root; the bundle goes to <out>/<experiment>/.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Override a config key, e.g. `--set sigma_p=0.03` or `--set fig3.chi_points=81`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for `--set chiN=<value>`.
    #[arg(long = "chiN", allow_hyphen_values = true)]
    chi_n: Option<String>,

    /// Validate the configuration, print the resolved spec and exit.
    #[arg(long)]
    validate: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut set = args.set;
    if let Some(v) = args.chi_n {
        set.push(format!("chiN={v}"));
    }
    let cli = CliOverrides {
        experiment: args.experiment,
        output_dir: args.out,
        seed: args.seed,
        set,
    };
    let spec = match load_spec(args.config.as_deref(), &cli) {
        Ok(s) => s,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    for w in &spec.warnings {
        warn!("{w}");
    }
    if args.validate {
        match toml::to_string_pretty(&spec.config) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                error!("{e}");
                return ExitCode::from(1);
            }
        }
    }
    match run_experiment(&spec) {
        Ok(m) => {
            println!("{}", spec.bundle_dir().join("manifest.json").display());
            log::info!("wrote {} files", m.files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
