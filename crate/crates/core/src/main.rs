use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ib_distill::experiment::{
    figure_names, figure_text, resolve_output, run_experiment, ExperimentConfig, EXIT_CONFIG,
};
use ib_distill::Error;

#[derive(Parser)]
#[command(name = "ib-distill", version, about = "Rate-distortion sweeps for distilled training sets")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its data and metadata files.
    Run {
        config: PathBuf,
        /// Override the configured output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Run the built-in config for a named figure.
    Figures {
        /// Figure name; `list` prints the available names.
        name: String,
        /// Output directory.
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        /// Print the config instead of running it.
        #[arg(long)]
        print: bool,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    exit(EXIT_CONFIG)
}

fn execute(cfg: &ExperimentConfig, text: Option<&str>, path: PathBuf) -> ExitCode {
    match run_experiment(cfg, text, &path) {
        Ok(report) => {
            println!(
                "wrote {} rows to {} ({} flagged, {} audit violations)",
                report.rows.len(),
                report.data_path.display(),
                report.non_converged,
                report.violations.len()
            );
            exit(report.exit_code())
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match cli.command {
        Command::Run { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(Error::Config(format!("cannot read {}: {e}", config.display()))),
            };
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let path = out.unwrap_or_else(|| resolve_output(&cfg, config.parent()));
            execute(&cfg, Some(&text), path)
        }
        Command::Validate { config } => match ExperimentConfig::from_path(&config).and_then(|c| {
            c.validate().map(|_| c).map_err(|e| Error::Config(format!("{}: {e}", config.display())))
        }) {
            Ok(cfg) => {
                println!("{}: ok ({}, model {})", config.display(), cfg.experiment, cfg.model.label());
                exit(0)
            }
            Err(e) => fail(e),
        },
        Command::Figures { name, out, print } => {
            if name == "list" {
                for n in figure_names() {
                    println!("{n}");
                }
                return exit(0);
            }
            let text = match figure_text(&name) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            if print {
                print!("{text}");
                return exit(0);
            }
            let cfg = match ExperimentConfig::from_toml(text) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let file = format!("{name}.{}", cfg.output.format.extension());
            execute(&cfg, Some(text), out.join(file))
        }
    }
}
