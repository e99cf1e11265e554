use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roadcast_bench::config::HarnessConfig;
use roadcast_bench::{report, stages, HarnessError};

/// Traffic forecasting and route re-ranking experiments.
#[derive(Debug, Parser)]
#[command(name = "roadcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Speed CSV (default: <out>/speeds.csv).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Graph CSV (default: <out>/graph.csv).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    horizon_min: Option<u32>,
    #[arg(long, global = true)]
    k_paths: Option<usize>,
    /// Window size h; the state vector holds h+1 readings.
    #[arg(long, global = true)]
    window_h: Option<usize>,
    /// key=value file; its entries override the flags above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Clean a raw speed CSV (and optional graph) into <out>.
    Ingest,
    /// Write a seeded synthetic corpus and graph into <out>.
    Synth,
    /// Train per-road speed and congestion models.
    TrainPredict,
    /// Speed and congestion tables for every model.
    EvalPredict,
    /// GBT errors across prediction horizons.
    SweepHorizon,
    /// Train and test RMSE after each boosting round.
    EpochCurve,
    /// Correlate SR and Bias factors with per-road errors.
    Usability,
    /// Train the path re-ranking network from served history.
    TrainEopf,
    /// Regret of naive, predicted and re-ranked routes.
    EvalNav,
    /// Tables, charts and summary from all results.
    Report,
}

fn config(cli: &Cli) -> Result<HarnessConfig, HarnessError> {
    let mut cfg = HarnessConfig::default();
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    cfg.data.clone_from(&cli.data);
    cfg.graph.clone_from(&cli.graph);
    if let Some(v) = &cli.out {
        cfg.out.clone_from(v);
    }
    if let Some(v) = cli.horizon_min {
        cfg.horizon_min = v;
    }
    if let Some(v) = cli.k_paths {
        cfg.k_paths = v;
    }
    if let Some(v) = cli.window_h {
        cfg.window_h = v;
    }
    if let Some(path) = &cli.config {
        cfg.apply_file(path).map_err(|e| match e {
            HarnessError::Io { .. } => HarnessError::Usage(e.to_string()),
            e => e,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Ingest => stages::ingest(&cfg),
        Command::Synth => stages::synth(&cfg),
        Command::TrainPredict => stages::train_predict(&cfg),
        Command::EvalPredict => stages::eval_predict(&cfg),
        Command::SweepHorizon => stages::sweep_horizon(&cfg),
        Command::EpochCurve => stages::epoch_curve(&cfg),
        Command::Usability => stages::usability(&cfg),
        Command::TrainEopf => stages::train_eopf_stage(&cfg),
        Command::EvalNav => stages::eval_nav(&cfg),
        Command::Report => report::report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
