use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use crowdreport::config::Config;
use crowdreport::oracle::score_tree;
use crowdreport::ptp::PredictorBinding;
use crowdreport::service::{http, read_log, system_clock, Platform};
use crowdreport::simulator::{render_table, run_scenario_file};

#[derive(Parser)]
#[command(version, about = "Crowdsourced event reporting service")]
struct Cli {
    /// TOML configuration file; CROWDREPORT_* variables override it.
    #[arg(long, global = true, env = "CROWDREPORT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// `reference` or `external:HOST:PORT`.
        #[arg(long)]
        predictor: Option<String>,
    },
    /// Rebuild state from a store and print a summary.
    Replay {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Score a task's tree against the exact maximum independent set.
    Oracle {
        #[arg(long)]
        task: String,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Generate a labelled stream from a scenario file and evaluate it.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<(), BoxError> {
    let mut config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve {
            store,
            port,
            predictor,
        } => {
            config.store = store.unwrap_or(config.store);
            config.port = port.unwrap_or(config.port);
            config.predictor = predictor.unwrap_or(config.predictor);
            serve(&config)
        }
        Command::Replay { store } => {
            config.store = store.unwrap_or(config.store);
            replay(&config)
        }
        Command::Oracle { task, store } => {
            config.store = store.unwrap_or(config.store);
            oracle(&config, &task)
        }
        Command::Simulate { scenario, out } => {
            let metrics = run_scenario_file(&scenario, &out, &config.classes()?)?;
            println!("{}", render_table(&[metrics]));
            Ok(())
        }
    }
}

fn offline_platform(config: &Config) -> Result<Platform, BoxError> {
    let settings = config.settings()?;
    let model = config.reference_model(&settings.classes)?;
    let contents = read_log(&config.store)?;
    if let Some(t) = &contents.truncation {
        println!(
            "log damaged at line {} (byte {}): {}",
            t.line, t.byte_offset, t.reason
        );
    }
    let (platform, _) =
        Platform::replay_records(contents.records, settings, Arc::new(model), system_clock())?;
    Ok(platform)
}

fn serve(config: &Config) -> Result<(), BoxError> {
    let settings = config.settings()?;
    let model = config.reference_model(&settings.classes)?;
    let predictor =
        PredictorBinding::parse(&config.predictor, model)?.into_predictor(&settings.classes)?;
    let (platform, recovery) = Platform::open(&config.store, settings, predictor, system_clock())?;
    log::info!(
        "recovered {} records, {} tasks from {}",
        recovery.records_applied,
        recovery.tasks,
        config.store.display()
    );
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(http::serve(Arc::new(platform), addr, config.tick()))?;
    Ok(())
}

fn replay(config: &Config) -> Result<(), BoxError> {
    let platform = offline_platform(config)?;
    for (id, state) in platform.state_snapshot() {
        let c = &state.counters;
        println!(
            "{id}\t{:?}\treceived={} accepted={} rejected_false={} deferred={} groups={}{}",
            state.task.state,
            c.received,
            c.accepted,
            c.rejected_false,
            c.deferred,
            state.tree.groups().len(),
            state
                .report
                .as_ref()
                .map(|r| format!(" redundancy={:.4}", r.redundancy_ratio))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn oracle(config: &Config, task: &str) -> Result<(), BoxError> {
    let platform = offline_platform(config)?;
    let summary = platform.with_task(task, |state| score_tree(&state.tree))??;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
