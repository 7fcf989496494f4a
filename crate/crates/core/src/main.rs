use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nitsche_dd::orchestrator::{
    run_study, run_task, Executor, OrchestratorError, RunConfig, StudyMode, WorkerOptions,
};

#[derive(Parser)]
#[command(
    version,
    about = "Hybrid Nitsche domain decomposition solver with reduced subdomain bases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Number of concurrent worker processes (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Conforming reference solve for the reduction error (overrides the config).
    #[arg(long, global = true)]
    oracle: Option<Switch>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every case of a convergence study.
    Study {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reduce a single subdomain task file.
    Worker {
        #[arg(long)]
        task: PathBuf,
    },
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<RunConfig, OrchestratorError> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(o) = cli.oracle {
        config.oracle = matches!(o, Switch::On);
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Box<dyn std::error::Error>> {
    let (path, single) = match &cli.command {
        Command::Worker { task } => {
            let out = run_task(task)?;
            println!("{}", out.display());
            return Ok(());
        }
        Command::Solve { config } => (config, true),
        Command::Study { config } => (config, false),
    };
    let mut config = load_config(cli, path)?;
    if single {
        config.study = StudyMode::Single;
        if config.cases().len() != 1 {
            return Err(
                "solve takes a single mesh and subdomain count; use study for sweeps".into(),
            );
        }
    }
    let workers = WorkerOptions {
        executor: Executor::Process(std::env::current_exe()?),
        workers: config.workers,
        inject_crash: None,
    };
    let report = run_study(&config, &workers)?;
    print!("{}", report.report_csv());
    for s in &report.slopes {
        println!(
            "slope eps={:e}: {:.3} over {} points",
            s.epsilon, s.slope, s.points
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // workers only report problems; the driver logs progress
    let level = if matches!(cli.command, Command::Worker { .. }) {
        "warn"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    nitsche_dd::linalg::use_sequential_kernels();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
