use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use polycircuit_cli::commands;
use polycircuit_cli::{AgentKind, RunConfig};

#[derive(Parser)]
#[command(
    name = "polycircuit",
    version,
    about = "Arithmetic circuit discovery over prime fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Single worker, fixed seed.
    #[arg(long)]
    deterministic: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.deterministic {
            cfg.workers = 1;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the game board and write board.txt and board_stats.txt.
    BoardBuild {
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain and run PPO or SAC iterations; writes metrics.csv and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Existing board file instead of building one.
        #[arg(long)]
        board: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on held-out targets; writes eval.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        board: Option<PathBuf>,
        #[arg(long, value_enum)]
        agent: Option<AgentKind>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Entropy temperature for SAC soft values (defaults to train.sac.alpha).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Exhaustive minimal gate count of one polynomial.
    Oracle {
        /// Polynomial text, e.g. "x0^2 + 2*x0*x1 + x1^2".
        #[arg(long)]
        target: String,
        #[arg(long)]
        n_vars: usize,
        #[arg(long, default_value_t = 5)]
        modulus: u32,
        #[arg(long, default_value_t = 4)]
        c_max: usize,
    },
    /// Summary statistics of a board file.
    Stats {
        #[arg(long)]
        board: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::BoardBuild { common } => {
            let board = commands::board_build(&common.resolve()?)?;
            print!("{}", board.stats());
        }
        Command::Train { common, board } => {
            let cfg = common.resolve()?;
            let out = commands::train(&cfg, board.as_deref())?;
            println!("checkpoint={}", out.checkpoint.display());
            if let Some(m) = out.metrics.last() {
                println!(
                    "{}\n{}",
                    polycircuit::trainer::IterationMetrics::CSV_HEADER,
                    m.csv_row()
                );
            }
        }
        Command::Eval {
            common,
            checkpoint,
            board,
            agent,
            episodes,
            alpha,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(a) = agent {
                cfg.eval.agent = a;
            }
            if let Some(e) = episodes {
                cfg.eval.episodes = e;
            }
            let out = commands::eval(&cfg, checkpoint.as_deref(), board.as_deref(), alpha)?;
            for r in out.agent.iter().chain(&out.baseline) {
                println!("{r}");
            }
        }
        Command::Oracle {
            target,
            n_vars,
            modulus,
            c_max,
        } => print!("{}", commands::oracle(&target, n_vars, modulus, c_max)?),
        Command::Stats { board } => print!("{}", commands::stats(&board)?),
    }
    Ok(())
}
