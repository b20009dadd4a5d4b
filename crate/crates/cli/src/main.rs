use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use schedtune::experiment::{
    self, emit_plot_data, run_baseline, write_baseline_csv, Checkpoint, ExperimentError,
    RunOptions,
};
use schedtune::{ExperimentConfig, ExperimentReport};

/// Closed-loop tuning of simulated 5G downlink scheduler parameters.
#[derive(Parser)]
#[command(name = "schedtune", version)]
struct Cli {
    /// Overrides the experiment seed (and the environment base seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for candidate evaluation; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parses and checks a config without running anything.
    Validate { config: PathBuf },
    /// Runs the SME baseline sessions and writes baseline.csv.
    Baseline { config: PathBuf },
    /// Runs the baseline and the full optimisation loop.
    Run {
        config: PathBuf,
        /// Stops after this many epochs, leaving a resumable checkpoint.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Continues an interrupted run from its checkpoint.
    Resume { checkpoint: PathBuf },
    /// Writes gnuplot data files from a report.json.
    Plotdata { report: PathBuf },
    /// Prints a config with every field at its default value.
    Template,
}

/// Exit status categories.
enum Failure {
    Config(anyhow::Error),
    Infeasible(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn from_experiment(e: ExperimentError) -> Self {
        if e.is_infeasible() {
            return Failure::Infeasible(e.into());
        }
        match e {
            ExperimentError::Config(_)
            | ExperimentError::Json(_)
            | ExperimentError::Checkpoint(_)
            | ExperimentError::Action(_)
            | ExperimentError::Cem(schedtune::cem::CemError::Config(_)) => Failure::Config(e.into()),
            ExperimentError::Env(
                schedtune::env::EnvError::Config(_)
                | schedtune::env::EnvError::Objective(_)
                | schedtune::env::EnvError::Sim(_),
            ) => Failure::Config(e.into()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::from_experiment(e)
    }
}

fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| {
        Failure::Config(anyhow::Error::new(e).context(format!("loading {}", path.display())))
    })?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.env.base_seed = s;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(r: &ExperimentReport) {
    println!("epochs completed: {}", r.completed_epochs);
    println!("baseline: {:.6}", r.baseline);
    if let Some(last) = r.epochs.last() {
        println!(
            "last epoch: p25 {:.6} median {:.6} mean {:.6} p75 {:.6}",
            last.p25, last.median, last.mean, last.p75
        );
    }
    let show = |o: Option<u64>| o.map_or("never".to_string(), |e| e.to_string());
    println!(
        "first epoch with median >= baseline: {}",
        show(r.milestones.first_median_at_or_above_baseline)
    );
    println!(
        "first epoch with p25 >= baseline: {}",
        show(r.milestones.first_p25_at_or_above_baseline)
    );
    println!("final best: {}", r.final_best);
    println!("output: {}", r.output_dir.display());
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { config } => {
            let cfg = load_config(cli, config)?;
            println!(
                "ok: {} epochs x {} candidates, {} s sessions, {} baseline sessions",
                cfg.optimizer.epochs,
                cfg.optimizer.population,
                cfg.env.session_duration_s,
                cfg.baseline.n_sessions
            );
        }
        Command::Baseline { config } => {
            let cfg = load_config(cli, config)?;
            let env = cfg.environment()?;
            let b = run_baseline(&env, &cfg)?;
            write_baseline_csv(&cfg.output_dir, &b)?;
            let passed = b.constraint_ok.iter().filter(|&&ok| ok).count();
            println!("sessions passing constraints: {passed}/{}", b.rewards.len());
            println!("baseline: {:.6}", b.baseline_value);
        }
        Command::Run { config, stop_after } => {
            let cfg = load_config(cli, config)?;
            let opts = RunOptions {
                stop_after_epochs: *stop_after,
            };
            print_report(&experiment::run_experiment(&cfg, opts)?);
        }
        Command::Resume { checkpoint } => {
            if cli.seed.is_some() || cli.output_dir.is_some() {
                return Err(Failure::Config(anyhow::anyhow!(
                    "--seed and --output-dir cannot change a run being resumed"
                )));
            }
            Checkpoint::load(checkpoint)?;
            print_report(&experiment::resume(checkpoint, RunOptions::default())?);
        }
        Command::Plotdata { report } => {
            let text = std::fs::read_to_string(report)
                .with_context(|| format!("reading {}", report.display()))
                .map_err(Failure::Config)?;
            let r: ExperimentReport = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", report.display()))
                .map_err(Failure::Config)?;
            let dir = cli.output_dir.clone().unwrap_or_else(|| {
                report.parent().unwrap_or(Path::new(".")).join("plot")
            });
            for p in emit_plot_data(&r, &dir)? {
                println!("{}", p.display());
            }
        }
        Command::Template => {
            let text = serde_json::to_string_pretty(&ExperimentConfig::default())
                .map_err(|e| Failure::Other(e.into()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
