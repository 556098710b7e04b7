//! Held-out evaluation: success rate, average return and average policy entropy.

use std::fmt;

use crate::board::GameBoard;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::evaluator::{PolicyValue, UniformEvaluator};
use crate::mcts::MctsConfig;
use crate::trainer::episode::{run_episode, Policy, Streams, TargetPool};

/// Selection temperature used for evaluation.
pub const EVAL_TAU: f64 = 0.1;

pub enum Agent<'a> {
    /// Search guided by an evaluator, executing the search action at `tau`.
    Search {
        evaluator: &'a (dyn PolicyValue + Sync),
        mcts: &'a MctsConfig,
        tau: f64,
    },
    /// Samples the evaluator policy directly.
    Policy {
        evaluator: &'a (dyn PolicyValue + Sync),
    },
    /// Uniform over valid actions.
    Random,
    /// Replays the episode's reference construction.
    Reference,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub complexity: usize,
    pub episodes: usize,
    pub success_pct: f64,
    pub avg_reward: f64,
    pub avg_entropy: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "complexity,success_pct,avg_reward,avg_entropy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6}",
            self.complexity, self.success_pct, self.avg_reward, self.avg_entropy
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C={} episodes={} success={:.2}% avg_reward={:.4} avg_entropy={:.4}",
            self.complexity, self.episodes, self.success_pct, self.avg_reward, self.avg_entropy
        )
    }
}

/// Runs `episodes` episodes on targets drawn uniformly from `pool`.
///
/// Episode `e` draws from its own streams, so results do not depend on `workers`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    env: &Env,
    board: &GameBoard,
    agent: &Agent<'_>,
    complexity: usize,
    pool: &TargetPool,
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<EvalReport> {
    if pool.all.is_empty() {
        return Err(Error::Sampling(format!(
            "no held-out targets at complexity {complexity}: need at least 1, have 0"
        )));
    }
    let workers = workers.clamp(1, episodes.max(1));
    let mut slots: Vec<Option<(bool, f64, f64)>> = vec![None; episodes];
    if workers == 1 {
        for (e, slot) in slots.iter_mut().enumerate() {
            *slot = Some(play(env, board, agent, pool, seed, e)?);
        }
    } else {
        let chunks = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..episodes)
                            .step_by(workers)
                            .map(|e| Ok((e, play(env, board, agent, pool, seed, e)?)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Search("evaluation worker panicked".into())))
                })
                .collect::<Vec<_>>()
        });
        for chunk in chunks {
            for (e, r) in chunk? {
                slots[e] = Some(r);
            }
        }
    }
    // summed in episode order so the report does not depend on `workers`
    let (mut succ, mut reward, mut ent) = (0usize, 0.0, 0.0);
    for (success, total, entropy) in slots.into_iter().flatten() {
        succ += usize::from(success);
        reward += total;
        ent += entropy;
    }
    let n = episodes.max(1) as f64;
    Ok(EvalReport {
        complexity,
        episodes,
        success_pct: 100.0 * succ as f64 / n,
        avg_reward: reward / n,
        avg_entropy: ent / n,
    })
}

fn episode_streams(seed: u64, e: usize) -> Streams {
    Streams::new(seed ^ (e as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn play(
    env: &Env,
    board: &GameBoard,
    agent: &Agent<'_>,
    pool: &TargetPool,
    seed: u64,
    e: usize,
) -> Result<(bool, f64, f64)> {
    let mut streams = episode_streams(seed, e);
    let target = pool.sample(&mut streams.targets)?;
    let state = env.reset_from_board(board, target, &mut streams.targets)?;
    if let Agent::Reference = agent {
        let mut s = state;
        let space = env.action_space();
        let reference = s.reference.clone();
        let mut total = 0.0;
        for a in reference.iter() {
            if s.done {
                break;
            }
            total += env.step(&mut s, space.to_index(*a)?)?.reward;
        }
        return Ok((s.success, total, 0.0));
    }
    let policy = match agent {
        Agent::Search {
            evaluator,
            mcts,
            tau,
        } => Policy {
            evaluator: *evaluator,
            mcts: Some(mcts),
            tau: Some(*tau),
            p_mix: 1.0,
            record: false,
        },
        Agent::Policy { evaluator } => Policy {
            evaluator: *evaluator,
            mcts: None,
            tau: None,
            p_mix: 0.0,
            record: false,
        },
        _ => Policy {
            evaluator: &UniformEvaluator,
            mcts: None,
            tau: None,
            p_mix: 0.0,
            record: false,
        },
    };
    let ep = run_episode(env, target, state, &policy, &mut streams)?;
    Ok((ep.success, ep.total_reward, ep.mean_entropy()))
}
