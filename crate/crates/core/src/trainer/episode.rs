//! Episode rollouts shared by data collection and evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::board::GameBoard;
use crate::env::{Env, EnvState};
use crate::error::{Error, Result};
use crate::evaluator::{entropy, PolicyValue};
use crate::mcts::{
    mix_action, sample_categorical, select_with_temperature, temperature, Mcts, MctsConfig,
    SearchTree,
};
use crate::split::{split_of, Split};

/// Independent generator streams derived from one seed.
#[derive(Clone, Debug)]
pub struct Streams {
    pub targets: ChaCha8Rng,
    pub policy: ChaCha8Rng,
    pub mcts: ChaCha8Rng,
    pub mix: ChaCha8Rng,
    pub batches: ChaCha8Rng,
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl Streams {
    pub fn new(seed: u64) -> Streams {
        Streams {
            targets: stream(seed, 10),
            policy: stream(seed, 11),
            mcts: stream(seed, 12),
            mix: stream(seed, 13),
            batches: stream(seed, 14),
        }
    }
}

/// Candidate targets at one complexity level.
#[derive(Clone, Debug, Default)]
pub struct TargetPool {
    pub interesting: Vec<usize>,
    pub all: Vec<usize>,
}

impl TargetPool {
    pub fn new(
        board: &GameBoard,
        level: usize,
        split: Split,
        seed: u64,
        eval_fraction: f64,
    ) -> TargetPool {
        let mut pool = TargetPool::default();
        for id in board.nodes_at_depth(level) {
            let node = &board.nodes()[id];
            if split_of(&node.polynomial, seed, eval_fraction) != split {
                continue;
            }
            pool.all.push(id);
            if node.optimal_circuit_count > 1 {
                pool.interesting.push(id);
            }
        }
        pool
    }

    /// Uniform over interesting nodes, or over all nodes when none is interesting.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let from = if self.interesting.is_empty() {
            if !self.all.is_empty() {
                log::warn!("no interesting targets at this level; sampling any node");
            }
            &self.all
        } else {
            &self.interesting
        };
        if from.is_empty() {
            return Err(Error::Sampling("no targets at this level".into()));
        }
        Ok(from[rng.random_range(0..from.len())])
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob_old: f64,
    pub value_old: f64,
    pub reward: f64,
    pub done: bool,
    pub entropy: f64,
    pub mcts: Option<Vec<f64>>,
    pub next_x: Vec<f64>,
    pub next_mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub target: usize,
    pub steps: Vec<StepRecord>,
    pub success: bool,
    pub total_reward: f64,
    pub actions: Vec<usize>,
}

impl Episode {
    pub fn mean_entropy(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.entropy).sum::<f64>() / self.steps.len() as f64
    }
}

/// How actions are chosen during a rollout.
pub struct Policy<'a> {
    pub evaluator: &'a dyn PolicyValue,
    /// Search configuration; `None` samples from the evaluator policy.
    pub mcts: Option<&'a MctsConfig>,
    /// Fixed selection temperature; `None` uses the annealing schedule.
    pub tau: Option<f64>,
    /// Probability of executing the search action (ignored without search).
    pub p_mix: f64,
    /// Whether to keep features for learning.
    pub record: bool,
}

/// Plays one episode from `state`, recording the evaluator's own
/// log-probability of every executed action.
pub fn run_episode(
    env: &Env,
    target: usize,
    mut state: EnvState,
    policy: &Policy<'_>,
    streams: &mut Streams,
) -> Result<Episode> {
    let mut tree = policy.mcts.map(|_| SearchTree::new(state.clone()));
    let mut ep = Episode {
        target,
        steps: Vec::new(),
        success: false,
        total_reward: 0.0,
        actions: Vec::new(),
    };
    let horizon = state.horizon;
    while !state.done {
        let eval = policy.evaluator.evaluate(env, &state)?;
        let mask = env.action_mask(&state);
        let x = if policy.record {
            env.features(&state)?
        } else {
            Vec::new()
        };
        let policy_action = sample_categorical(&eval.policy, &mut streams.policy);
        let (action, visits) = match (policy.mcts, tree.as_mut()) {
            (Some(cfg), Some(tree)) => {
                let mcts = Mcts {
                    env,
                    evaluator: policy.evaluator,
                    config: cfg,
                };
                let visits = mcts.search(tree)?;
                let tau = policy.tau.unwrap_or_else(|| {
                    temperature(
                        state.step_count,
                        cfg.tau_init,
                        cfg.tau_final,
                        cfg.t_decay.unwrap_or(horizon),
                    )
                });
                let search_action = select_with_temperature(&visits, tau, &mut streams.mcts)?;
                let a = mix_action(policy_action, search_action, policy.p_mix, &mut streams.mix);
                let total: f64 = visits.iter().map(|v| *v as f64).sum();
                (
                    a,
                    Some(
                        visits
                            .iter()
                            .map(|v| *v as f64 / total)
                            .collect::<Vec<f64>>(),
                    ),
                )
            }
            _ => (policy_action, None),
        };
        if !mask[action] {
            return Err(Error::InvalidAction {
                action,
                reason: "selected action is masked".into(),
            });
        }
        let log_prob_old = eval.log_policy[action];
        if !log_prob_old.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite log-probability for executed action {action}"
            )));
        }
        let h = entropy(&eval.policy, &eval.log_policy);
        let out = env.step(&mut state, action)?;
        if let Some(tree) = tree.as_mut() {
            if !out.done {
                tree.advance(env, action)?;
            }
        }
        ep.total_reward += out.reward;
        ep.actions.push(action);
        let (next_x, next_mask) = if policy.record {
            (env.features(&state)?, env.action_mask(&state))
        } else {
            (Vec::new(), Vec::new())
        };
        ep.steps.push(StepRecord {
            x,
            mask,
            action,
            log_prob_old,
            value_old: eval.value,
            reward: out.reward,
            done: out.done,
            entropy: h,
            mcts: visits,
            next_x,
            next_mask,
        });
    }
    ep.success = state.success;
    Ok(ep)
}
