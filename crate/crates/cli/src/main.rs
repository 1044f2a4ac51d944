use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qmh_cli::config::{load_config, load_scaling};
use qmh_cli::suite::{run_suite, Suite};
use qmh_cli::{output_root, run_experiment, ExperimentReport};

#[derive(Debug, Parser)]
#[command(name = "qmh-lab", version, about = "Run quantum Metropolis-Hastings experiments and write JSON/CSV reports")]
struct Cli {
    /// Output root; overrides $QMH_LAB_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in verification suites on the bundled models.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Query-count scaling study over GW instances.
    Scaling {
        /// Scaling config (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn print_report(label: &str, report: &ExperimentReport) {
    println!("{} {label}", if report.pass { "PASS" } else { "FAIL" });
    for c in report.failures() {
        println!("    {}: {} (limit {})", c.name, c.value, c.limit);
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let root = output_root(cli.out.as_deref());
    match cli.command {
        Command::Run { config, seed } => {
            let (mut cfg, base) = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let report = run_experiment(&cfg, &base)?;
            let dir = root.join(cfg.output_dir());
            report.write(&dir)?;
            print_report(&format!("{} -> {}", cfg.experiment, dir.display()), &report);
            Ok(report.pass)
        }
        Command::Verify { suite } => {
            let results = run_suite(suite, &root.join("verify"))?;
            let mut pass = true;
            for (cfg, report) in &results {
                print_report(&cfg.output_dir().display().to_string(), report);
                pass &= report.pass;
            }
            println!("{} of {} experiments passed", results.iter().filter(|(_, r)| r.pass).count(), results.len());
            Ok(pass)
        }
        Command::Scaling { config } => {
            let cfg = match config {
                Some(p) => load_scaling(&p)?,
                None => Default::default(),
            };
            let report = qmh_cli::scaling::run_scaling(&cfg, &[cfg.seed], &Default::default())?;
            let dir = root.join("scaling");
            report.write(&dir)?;
            print_report(&format!("scaling -> {}", dir.display()), &report);
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
