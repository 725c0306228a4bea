//! Command-line front end: train agents, aggregate runs, dump configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cogngen::gridworld::Task;
use cogngen::harness::{
    format_table, report_dir, summarize, train, write_report, AgentKind, RunConfig, RunMeta,
    TrainOptions,
};

#[derive(Parser)]
#[command(name = "cogngen", version, about = "Cognitive-agent gridworld trainer")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on one task and write a metrics CSV.
    Train {
        /// Task id: r6x6 | mr | unl | dk | mem.
        #[arg(long)]
        task: Option<Task>,
        /// Agent id: cogngen | dqn | rnd | bebold.
        #[arg(long)]
        agent: Option<AgentKind>,
        /// Episode budget.
        #[arg(long)]
        episodes: Option<u32>,
        /// Run seed; all randomness derives from it.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON run config; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for the metrics CSV.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Save the trained agent here (cognitive agent only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Print the grid after every step.
        #[arg(long)]
        render: bool,
        /// Suppress the periodic progress line.
        #[arg(long)]
        quiet: bool,
    },
    /// Aggregate every metrics CSV in a directory into one table.
    Report {
        /// Directory holding metrics CSVs.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Also write the table as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a full default run configuration as JSON.
    DumpConfig {
        #[arg(long, default_value = "r6x6")]
        task: Task,
        #[arg(long, default_value = "cogngen")]
        agent: AgentKind,
    },
}

fn build_config(
    task: Option<Task>,
    agent: Option<AgentKind>,
    episodes: Option<u32>,
    seed: Option<u64>,
    config: Option<&PathBuf>,
) -> cogngen::Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => {
            let task = task.ok_or_else(|| {
                cogngen::Error::config("--task is required unless --config is given")
            })?;
            let agent = agent.ok_or_else(|| {
                cogngen::Error::config("--agent is required unless --config is given")
            })?;
            RunConfig::default_for(task, agent)
        }
    };
    if let Some(t) = task {
        cfg.task = t;
    }
    if let Some(a) = agent {
        cfg.agent = a;
    }
    if let Some(e) = episodes {
        cfg.episodes = e;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> cogngen::Result<()> {
    match cli.cmd {
        Command::Train {
            task,
            agent,
            episodes,
            seed,
            config,
            out,
            checkpoint,
            render,
            quiet,
        } => {
            let cfg = build_config(task, agent, episodes, seed, config.as_ref())?;
            let metrics = out.join(cfg.metrics_name());
            let opts = TrainOptions {
                out: Some(metrics.clone()),
                render,
                progress: !quiet,
                stop: None,
                checkpoint,
            };
            let records = train(&cfg, &opts)?;
            let meta = RunMeta {
                agent: cfg.agent,
                task: cfg.task,
                seed: cfg.seed,
            };
            let s = summarize(meta, &records);
            println!(
                "{} on {} (seed {}): {} episodes, last-{} success {:.1}%, mean length {:.1}% of budget",
                cfg.agent,
                cfg.task,
                cfg.seed,
                s.episodes,
                s.window,
                s.success_pct,
                100.0 * s.mean_norm_length
            );
            println!("metrics: {}", metrics.display());
            Ok(())
        }
        Command::Report { input, out } => {
            let (rows, warnings) = report_dir(&input)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", format_table(&rows));
            if let Some(path) = out {
                write_report(&rows, &path)?;
                println!("table: {}", path.display());
            }
            Ok(())
        }
        Command::DumpConfig { task, agent } => {
            let cfg = RunConfig::default_for(task, agent);
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
