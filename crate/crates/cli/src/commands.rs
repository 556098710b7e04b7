use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;

use polycircuit::evaluator::{
    load_checkpoint, save_checkpoint, CheckpointHeader, NetEvaluator, ValueSource,
};
use polycircuit::oracle::brute_force_min_complexity;
use polycircuit::split::Split;
use polycircuit::trainer::episode::TargetPool;
use polycircuit::trainer::evaluate::{evaluate, Agent, EvalReport};
use polycircuit::trainer::{Algo, IterationMetrics, Trainer};
use polycircuit::{Dims, Env, FieldPolynomial, GameBoard, Mlp, Modulus};

use crate::config::{AgentKind, RunConfig};

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    fs::write(cfg.out.join("config.toml"), cfg.to_toml()?)?;
    Ok(cfg.out.clone())
}

pub fn load_board(path: &Path) -> Result<GameBoard> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading board {}", path.display()))?;
    Ok(GameBoard::from_text(&text)?)
}

/// Loads `board` when given, otherwise builds one from the config.
fn board_for(cfg: &RunConfig, board: Option<&Path>) -> Result<GameBoard> {
    match board {
        Some(p) => {
            let b = load_board(p)?;
            if b.config().n_vars != cfg.board.n_vars || b.config().modulus != cfg.board.modulus {
                bail!(
                    "board {} has n_vars={} p={}, config says n_vars={} p={}",
                    p.display(),
                    b.config().n_vars,
                    b.config().modulus,
                    cfg.board.n_vars,
                    cfg.board.modulus
                );
            }
            Ok(b)
        }
        None => Ok(GameBoard::build(&cfg.board)?),
    }
}

pub fn board_build(cfg: &RunConfig) -> Result<GameBoard> {
    let out = prepare_out(cfg)?;
    let board = GameBoard::build(&cfg.board)?;
    fs::write(out.join("board.txt"), board.to_text())?;
    fs::write(out.join("board_stats.txt"), board.stats().to_string())?;
    info!("built board with {} nodes", board.len());
    Ok(board)
}

pub fn stats(board: &Path) -> Result<String> {
    Ok(load_board(board)?.stats().to_string())
}

pub fn oracle(target: &str, n_vars: usize, modulus: u32, c_max: usize) -> Result<String> {
    let m = Modulus::new(modulus)?;
    let f = FieldPolynomial::parse(target, n_vars, m)?;
    Ok(match brute_force_min_complexity(&f, n_vars, m, c_max)? {
        Some(r) => {
            let w: Vec<String> = r.witness.iter().map(|a| a.to_string()).collect();
            format!("complexity={}\nwitness={}\n", r.complexity, w.join(" "))
        }
        None => format!("complexity=none\nbudget={c_max}\n"),
    })
}

pub struct TrainOutcome {
    pub metrics: Vec<IterationMetrics>,
    pub checkpoint: PathBuf,
    pub final_alpha: f64,
}

pub fn train(cfg: &RunConfig, board: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let board = board_for(cfg, board)?;
    fs::write(out.join("board.txt"), board.to_text())?;
    let env = Env::new(cfg.env_config())?;
    let mut trainer = Trainer::new(
        cfg.train.clone(),
        &cfg.net,
        cfg.mcts.clone(),
        env,
        &board,
        cfg.seed,
    )?;
    let header = CheckpointHeader {
        dims: trainer.mlp().dims(),
        seed: cfg.seed,
        config_hash: cfg.shape_hash()?,
    };
    if cfg.train.pretrain.enabled {
        let mut f = fs::File::create(out.join("pretrain.csv"))?;
        writeln!(f, "epoch,loss,accuracy")?;
        for e in trainer.pretrain()? {
            writeln!(f, "{},{:.6},{:.6}", e.epoch, e.loss, e.accuracy)?;
        }
    }
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let mut csv = fs::File::create(out.join("metrics.csv"))?;
    writeln!(csv, "{}", IterationMetrics::CSV_HEADER)?;
    let mut metrics = Vec::with_capacity(cfg.train.iterations);
    for it in 1..=cfg.train.iterations {
        let m = trainer.iteration()?;
        writeln!(csv, "{}", m.csv_row())?;
        info!(
            "iter {it}: level {} success {:.3} reward {:.3}",
            m.level, m.success_rate, m.avg_reward
        );
        metrics.push(m);
        if cfg.train.checkpoint_every > 0 && it % cfg.train.checkpoint_every == 0 {
            save_checkpoint(
                &ckpt_dir.join(format!("iter_{it:05}.ckpt")),
                &header,
                trainer.params(),
            )?;
        }
    }
    csv.flush()?;
    let checkpoint = out.join("model.ckpt");
    save_checkpoint(&checkpoint, &header, trainer.params())?;
    Ok(TrainOutcome {
        metrics,
        checkpoint,
        final_alpha: trainer.alpha(),
    })
}

/// Evaluation rows per complexity for the configured agent and, optionally, the random baseline.
pub struct EvalOutcome {
    pub agent: Vec<EvalReport>,
    pub baseline: Vec<EvalReport>,
}

pub fn eval(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    board: Option<&Path>,
    alpha: Option<f64>,
) -> Result<EvalOutcome> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let board = board_for(cfg, board)?;
    let env = Env::new(cfg.env_config())?;
    let dims = Dims::for_env(&env, cfg.net.hidden);
    let mlp = Mlp::new(dims)?;
    let params = match checkpoint {
        Some(p) => load_checkpoint(p, Some((dims, cfg.shape_hash()?)))?.1,
        None => {
            if matches!(cfg.eval.agent, AgentKind::Search | AgentKind::Policy) {
                bail!("the {:?} agent needs --checkpoint", cfg.eval.agent);
            }
            mlp.init(cfg.net.seed)
        }
    };
    let source = match cfg.train.algo {
        Algo::Ppo => ValueSource::Head,
        Algo::Sac => ValueSource::SoftQ {
            alpha: alpha.unwrap_or(cfg.train.sac.alpha),
        },
    };
    let net = NetEvaluator {
        mlp: &mlp,
        params: &params,
        source,
    };
    let mcts = polycircuit::MctsConfig {
        simulations: cfg.eval.simulations,
        ..cfg.mcts.clone()
    };
    let agent = match cfg.eval.agent {
        AgentKind::Search => Agent::Search {
            evaluator: &net,
            mcts: &mcts,
            tau: cfg.eval.tau,
        },
        AgentKind::Policy => Agent::Policy { evaluator: &net },
        AgentKind::Random => Agent::Random,
        AgentKind::Reference => Agent::Reference,
    };
    let complexities: Vec<usize> = if cfg.eval.complexities.is_empty() {
        (1..=board.config().max_complexity).collect()
    } else {
        cfg.eval.complexities.clone()
    };
    let split = if cfg.eval.held_out {
        Split::Eval
    } else {
        Split::Train
    };
    let mut result = EvalOutcome {
        agent: Vec::new(),
        baseline: Vec::new(),
    };
    for &c in &complexities {
        let pool = TargetPool::new(&board, c, split, cfg.seed, cfg.train.eval_fraction);
        let seed = cfg.seed ^ (c as u64) << 32;
        let r = evaluate(
            &env,
            &board,
            &agent,
            c,
            &pool,
            cfg.eval.episodes,
            seed,
            cfg.workers,
        )?;
        info!("{:?}: {r}", cfg.eval.agent);
        result.agent.push(r);
        if cfg.eval.baseline {
            let b = evaluate(
                &env,
                &board,
                &Agent::Random,
                c,
                &pool,
                cfg.eval.episodes,
                seed,
                cfg.workers,
            )?;
            info!("random: {b}");
            result.baseline.push(b);
        }
    }
    write_eval(&out.join("eval.csv"), &result.agent)?;
    if cfg.eval.baseline {
        write_eval(&out.join("eval_random.csv"), &result.baseline)?;
    }
    Ok(result)
}

fn write_eval(path: &Path, rows: &[EvalReport]) -> Result<()> {
    let mut text = String::from(EvalReport::CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
