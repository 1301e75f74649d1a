use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use epiroom_core::runner::{self, envelope, BatchResult, EpidemicTimeSeries};
use epiroom_core::scenario::BUILTIN_SCENARIOS;
use epiroom_core::{CountryConfig, Error, Scenario, SimOptions};
use log::info;
use rayon::prelude::*;

/// Room-level agent-based epidemic simulator.
#[derive(Debug, Parser)]
#[command(name = "epiroom", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario for one or more seeds and write daily counts as CSV.
    Simulate(SimulateArgs),
    /// Inspect the built-in scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
    /// Check a country config file and print its digest.
    ValidateConfig { file: PathBuf },
    /// Print a config preset (`desk` or `country`) as JSON, ready for editing.
    ExportConfig { preset: String },
    /// Host the steering service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory for command logs; runs found there are restored at startup.
        #[arg(long)]
        persist_dir: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    /// Config preset name or path to a config file.
    #[arg(long, default_value = "desk")]
    config: String,
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds. Without --seed or --seeds the scenario's own
    /// seed list is used.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Also write every exposure event per seed.
    #[arg(long)]
    events: bool,
    /// Also write per-seed summaries and the active-case envelope.
    #[arg(long)]
    summary: bool,
    /// Worker threads for running seeds side by side (0 uses every core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Parallelise schedule planning and room mixing inside each run.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Subcommand)]
enum ScenariosAction {
    /// Name, horizon, seed count and action count of every built-in scenario.
    List {
        #[arg(long, default_value = "desk")]
        config: String,
    },
    /// Print one built-in scenario as JSON.
    Export {
        name: String,
        /// Config whose timeline compression scales the scenario's days.
        #[arg(long, default_value = "desk")]
        config: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EPIROOM_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Scenarios {
            action: ScenariosAction::List { config },
        } => {
            let compression = CountryConfig::load(&config)?.timeline_compression;
            println!("{:<22} {:>7} {:>5} {:>7}", "name", "horizon", "seeds", "actions");
            for name in BUILTIN_SCENARIOS {
                let s = Scenario::builtin(name, compression)?;
                println!(
                    "{:<22} {:>7} {:>5} {:>7}",
                    s.name,
                    s.horizon,
                    s.seeds.len(),
                    s.actions.len()
                );
            }
            Ok(())
        }
        Command::Scenarios {
            action: ScenariosAction::Export { name, config },
        } => {
            let compression = CountryConfig::load(&config)?.timeline_compression;
            println!("{}", Scenario::builtin(&name, compression)?.to_json());
            Ok(())
        }
        Command::ValidateConfig { file } => {
            let config = CountryConfig::from_path(&file)?;
            println!("ok {} ({} houses)", config.digest(), config.house_count);
            Ok(())
        }
        Command::ExportConfig { preset } => {
            let config = CountryConfig::preset(&preset).ok_or_else(|| {
                Error::Config(epiroom_core::ConfigError::new(
                    "preset",
                    format!("unknown preset `{preset}`"),
                ))
            })?;
            println!("{}", config.to_json());
            Ok(())
        }
        Command::Serve {
            port,
            host,
            persist_dir,
        } => Ok(epiroom_service::run_blocking(
            SocketAddr::new(host, port),
            persist_dir,
        )?),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = CountryConfig::load(&args.config)?;
    let scenario = Scenario::resolve(&args.scenario, config.timeline_compression)?;
    let seeds = match (args.seed, args.seeds.is_empty()) {
        (Some(seed), _) => vec![seed],
        (None, false) => args.seeds.clone(),
        (None, true) if !scenario.seeds.is_empty() => scenario.seeds.clone(),
        (None, true) => vec![1],
    };
    std::fs::create_dir_all(&args.out)?;
    let options = SimOptions {
        parallel: args.parallel,
        record_events: args.events,
    };
    let config = Arc::new(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    info!("running {} for {} seed(s)", scenario.name, seeds.len());
    let runs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<EpidemicTimeSeries, Error> {
                let (series, events) = runner::run_with(config.clone(), &scenario, seed, options)?;
                runner::write_series(&series, &series_path(&args.out, &scenario.name, seed))?;
                if args.events {
                    runner::write_events(
                        &events,
                        &args.out.join(format!("{}_seed{seed}_events.csv", scenario.name)),
                    )?;
                }
                info!("seed {seed}: {} days", series.days.len());
                Ok(series)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    if args.summary {
        let summaries = runs.iter().map(EpidemicTimeSeries::summary).collect();
        let batch = BatchResult {
            envelope: envelope(&runs, |d| d.active),
            summaries,
            runs,
        };
        runner::write_summaries(
            &batch.summaries,
            &args.out.join(format!("{}_summary.csv", scenario.name)),
        )?;
        write_envelope(&batch, &args.out.join(format!("{}_envelope.csv", scenario.name)))?;
        println!(
            "{}: {} seed(s), mean peak active {:.1}, mean dead {:.1}",
            scenario.name,
            batch.summaries.len(),
            batch.mean_peak(),
            batch.mean_dead()
        );
    }
    Ok(())
}

/// Per-seed CSV path inside the output directory.
fn series_path(dir: &Path, scenario: &str, seed: u64) -> PathBuf {
    dir.join(format!("{scenario}_seed{seed}.csv"))
}

fn write_envelope(batch: &BatchResult, path: &Path) -> Result<(), Error> {
    let mut text = String::from("day,mean_active,min_active,max_active\n");
    for row in &batch.envelope {
        text.push_str(&format!("{},{:.3},{},{}\n", row.day, row.mean, row.min, row.max));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
