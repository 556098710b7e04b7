//! Supervised pretraining, PPO and discrete SAC over the circuit game.

pub mod curriculum;
pub mod episode;
pub mod evaluate;
pub mod gae;
pub mod losses;
pub mod replay;

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::board::GameBoard;
use crate::env::Env;
use crate::error::{config_err, Error, Result};
use crate::evaluator::{Adam, Mlp, NetConfig, NetEvaluator, ValueSource};
use crate::mcts::MctsConfig;
use crate::split::Split;

use curriculum::{Curriculum, CurriculumConfig};
use episode::{run_episode, Episode, Policy, Streams, TargetPool};
use losses::{
    ppo_loss, sac_loss, supervised_loss, PpoCoeffs, PpoItem, RatioBaseline, SacCoeffs, SacItem,
    SupervisedItem,
};
use replay::ReplayBuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ppo,
    Sac,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ppo => "ppo",
            Algo::Sac => "sac",
        })
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Algo> {
        match s {
            "ppo" => Ok(Algo::Ppo),
            "sac" => Ok(Algo::Sac),
            _ => Err(Error::Parse(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub eps: f64,
    pub c_v: f64,
    pub c_e: f64,
    pub epochs: usize,
    pub minibatch: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            eps: 0.2,
            c_v: 0.5,
            c_e: 0.01,
            epochs: 4,
            minibatch: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub alpha: f64,
    pub learnable_alpha: bool,
    pub alpha_lr: f64,
    /// Target entropy as a fraction of `ln(valid actions)`.
    pub target_entropy_scale: f64,
    pub gamma: f64,
    pub lambda_mcts: f64,
    pub tau_soft: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps per environment step.
    pub updates_per_step: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            alpha: 0.2,
            learnable_alpha: false,
            alpha_lr: 3e-4,
            target_entropy_scale: 0.6,
            gamma: 0.99,
            lambda_mcts: 0.5,
            tau_soft: 0.005,
            buffer_capacity: 100_000,
            batch_size: 64,
            updates_per_step: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub enabled: bool,
    pub epochs: usize,
    pub batch_size: usize,
    /// Reference constructions used per board node.
    pub sequences_per_node: usize,
    pub value_coef: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            enabled: true,
            epochs: 40,
            batch_size: 64,
            sequences_per_node: 4,
            value_coef: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub algo: Algo,
    pub iterations: usize,
    /// Transitions collected per iteration.
    pub steps_per_iteration: usize,
    /// Run search during collection.
    pub use_mcts: bool,
    pub eval_fraction: f64,
    pub checkpoint_every: usize,
    pub curriculum: CurriculumConfig,
    pub ppo: PpoConfig,
    pub sac: SacConfig,
    pub pretrain: PretrainConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Ppo,
            iterations: 200,
            steps_per_iteration: 256,
            use_mcts: true,
            eval_fraction: 0.2,
            checkpoint_every: 50,
            curriculum: CurriculumConfig::default(),
            ppo: PpoConfig::default(),
            sac: SacConfig::default(),
            pretrain: PretrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PretrainEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One row of the training metrics file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub level: usize,
    pub episodes: usize,
    pub transitions: usize,
    pub success_rate: f64,
    pub avg_reward: f64,
    pub entropy: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub q_loss: f64,
    pub ce_loss: f64,
    pub clip_fraction: f64,
    pub alpha: f64,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str = "iteration,level,episodes,transitions,success_rate,avg_reward,entropy,policy_loss,value_loss,q_loss,ce_loss,clip_fraction,alpha";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.iteration,
            self.level,
            self.episodes,
            self.transitions,
            self.success_rate,
            self.avg_reward,
            self.entropy,
            self.policy_loss,
            self.value_loss,
            self.q_loss,
            self.ce_loss,
            self.clip_fraction,
            self.alpha
        )
    }
}

/// Training session state: network, optimizer, curriculum and data streams.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    mcts_cfg: MctsConfig,
    env: Env,
    board: &'a GameBoard,
    mlp: Mlp,
    params: Vec<f64>,
    target_params: Vec<f64>,
    opt: Adam,
    log_alpha: f64,
    curriculum: Curriculum,
    buffer: ReplayBuffer<SacItem>,
    streams: Streams,
    pools: Vec<TargetPool>,
    split_seed: u64,
    iteration: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: TrainConfig,
        net: &NetConfig,
        mcts_cfg: MctsConfig,
        env: Env,
        board: &'a GameBoard,
        seed: u64,
    ) -> Result<Trainer<'a>> {
        mcts_cfg.validate()?;
        if cfg.steps_per_iteration == 0 || cfg.ppo.minibatch == 0 || cfg.sac.batch_size == 0 {
            return config_err("batch sizes must be positive");
        }
        if cfg.curriculum.max_level > board.config().max_complexity {
            return config_err(format!(
                "curriculum reaches level {} but the board stops at {}",
                cfg.curriculum.max_level,
                board.config().max_complexity
            ));
        }
        if board.config().n_vars != env.config().n_vars || board.modulus() != env.modulus() {
            return config_err("board and environment disagree on variables or modulus");
        }
        let mut curriculum_cfg = cfg.curriculum.clone();
        curriculum_cfg.allow_demotion = cfg.algo == Algo::Sac;
        let curriculum = Curriculum::new(curriculum_cfg)?;
        let mlp = Mlp::new(crate::evaluator::Dims::for_env(&env, net.hidden))?;
        let params = mlp.init(net.seed ^ seed);
        let pools = (0..=cfg.curriculum.max_level)
            .map(|c| TargetPool::new(board, c, Split::Train, seed, cfg.eval_fraction))
            .collect();
        Ok(Trainer {
            opt: Adam::new(net, mlp.num_params()),
            target_params: params.clone(),
            params,
            mlp,
            log_alpha: cfg.sac.alpha.ln(),
            buffer: ReplayBuffer::new(cfg.sac.buffer_capacity)?,
            streams: Streams::new(seed),
            curriculum,
            pools,
            split_seed: seed,
            iteration: 0,
            cfg,
            mcts_cfg,
            env,
            board,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.mlp.num_params() {
            return config_err("parameter count mismatch");
        }
        self.target_params = params.clone();
        self.params = params;
        Ok(())
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn level(&self) -> usize {
        self.curriculum.level()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed
    }

    pub fn value_source(&self) -> ValueSource {
        match self.cfg.algo {
            Algo::Ppo => ValueSource::Head,
            Algo::Sac => ValueSource::SoftQ {
                alpha: self.alpha(),
            },
        }
    }

    /// Supervised (state, next action, return-to-go) examples from board constructions.
    pub fn pretrain_examples(&self) -> Result<Vec<SupervisedItem>> {
        let gamma = match self.cfg.algo {
            Algo::Ppo => self.cfg.ppo.gamma,
            Algo::Sac => self.cfg.sac.gamma,
        };
        let mut items = Vec::new();
        let space = self.env.action_space();
        for level in 1..self.pools.len() {
            for &id in &self.pools[level].all {
                let seqs = self
                    .board
                    .extract_optimal_action_sequences(id, self.cfg.pretrain.sequences_per_node)?;
                for seq in seqs {
                    let target = self.board.nodes()[id].polynomial.clone();
                    let mut state = self.env.reset(target, seq.clone())?;
                    let mut rows = Vec::new();
                    for a in &seq {
                        if state.done {
                            break;
                        }
                        let idx = space.to_index(*a)?;
                        let x = self.env.features(&state)?;
                        let mask = self.env.action_mask(&state);
                        let r = self.env.step(&mut state, idx)?.reward;
                        rows.push((x, mask, idx, r));
                    }
                    let mut g = 0.0;
                    let mut tail = Vec::with_capacity(rows.len());
                    for (x, mask, action, r) in rows.into_iter().rev() {
                        g = r + gamma * g;
                        tail.push(SupervisedItem {
                            x,
                            mask,
                            action,
                            value_target: g,
                        });
                    }
                    tail.reverse();
                    items.extend(tail);
                }
            }
        }
        if items.is_empty() {
            return Err(Error::Data("board yields no pretraining examples".into()));
        }
        Ok(items)
    }

    pub fn pretrain(&mut self) -> Result<Vec<PretrainEpoch>> {
        let items = self.pretrain_examples()?;
        let bs = self.cfg.pretrain.batch_size.max(1);
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut out = Vec::new();
        for epoch in 0..self.cfg.pretrain.epochs {
            order.shuffle(&mut self.streams.batches);
            for chunk in order.chunks(bs) {
                let batch: Vec<SupervisedItem> = chunk.iter().map(|&i| items[i].clone()).collect();
                let (_, g) = supervised_loss(
                    &self.mlp,
                    &self.params,
                    &batch,
                    self.cfg.pretrain.value_coef,
                )?;
                self.opt.step(&mut self.params, &g)?;
            }
            let (rep, _) = supervised_loss(
                &self.mlp,
                &self.params,
                &items,
                self.cfg.pretrain.value_coef,
            )?;
            log::info!(
                "pretrain epoch {epoch}: loss {:.4} acc {:.3}",
                rep.loss,
                rep.accuracy
            );
            out.push(PretrainEpoch {
                epoch,
                loss: rep.loss,
                accuracy: rep.accuracy,
            });
        }
        self.target_params = self.params.clone();
        Ok(out)
    }

    fn collect_episode(&mut self) -> Result<Episode> {
        let level = self.curriculum.level();
        let pool = self
            .pools
            .get(level)
            .ok_or_else(|| Error::Sampling(format!("no pool for level {level}")))?;
        let target = pool.sample(&mut self.streams.targets)?;
        let state = self
            .env
            .reset_from_board(self.board, target, &mut self.streams.targets)?;
        let evaluator = NetEvaluator {
            mlp: &self.mlp,
            params: &self.params,
            source: self.value_source(),
        };
        let policy = Policy {
            evaluator: &evaluator,
            mcts: self.cfg.use_mcts.then_some(&self.mcts_cfg),
            tau: None,
            p_mix: self.mcts_cfg.p_mix,
            record: true,
        };
        let ep = run_episode(&self.env, target, state, &policy, &mut self.streams)?;
        self.curriculum.step(ep.success);
        Ok(ep)
    }

    /// Collects at least `steps_per_iteration` transitions and updates the network once.
    pub fn iteration(&mut self) -> Result<IterationMetrics> {
        self.iteration += 1;
        let mut m = match self.cfg.algo {
            Algo::Ppo => self.ppo_iteration()?,
            Algo::Sac => self.sac_iteration()?,
        };
        m.iteration = self.iteration;
        m.level = self.curriculum.level();
        m.alpha = match self.cfg.algo {
            Algo::Ppo => 0.0,
            Algo::Sac => self.alpha(),
        };
        Ok(m)
    }

    fn summarize(episodes: &[Episode], m: &mut IterationMetrics) {
        let n = episodes.len().max(1) as f64;
        m.episodes = episodes.len();
        m.transitions = episodes.iter().map(|e| e.steps.len()).sum();
        m.success_rate = episodes.iter().filter(|e| e.success).count() as f64 / n;
        m.avg_reward = episodes.iter().map(|e| e.total_reward).sum::<f64>() / n;
        m.entropy = episodes.iter().map(|e| e.mean_entropy()).sum::<f64>() / n;
    }

    fn ppo_iteration(&mut self) -> Result<IterationMetrics> {
        let c = self.cfg.ppo.clone();
        let mut episodes = Vec::new();
        let mut items: Vec<PpoItem> = Vec::new();
        while items.len() < self.cfg.steps_per_iteration {
            let ep = self.collect_episode()?;
            let rewards: Vec<f64> = ep.steps.iter().map(|s| s.reward).collect();
            let values: Vec<f64> = ep.steps.iter().map(|s| s.value_old).collect();
            let (adv, ret) = gae::compute_gae(&rewards, &values, 0.0, c.gamma, c.lambda)?;
            for ((s, a), r) in ep.steps.iter().zip(adv).zip(ret) {
                items.push(PpoItem {
                    x: s.x.clone(),
                    mask: s.mask.clone(),
                    action: s.action,
                    log_prob_old: s.log_prob_old,
                    advantage: a,
                    ret: r,
                });
            }
            episodes.push(ep);
        }
        let mut adv: Vec<f64> = items.iter().map(|i| i.advantage).collect();
        gae::normalize(&mut adv);
        for (it, a) in items.iter_mut().zip(adv) {
            it.advantage = a;
        }
        let k = PpoCoeffs {
            eps: c.eps,
            c_v: c.c_v,
            c_e: c.c_e,
        };
        let mut m = IterationMetrics::default();
        Self::summarize(&episodes, &mut m);
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut updates = 0.0;
        for _ in 0..c.epochs {
            order.shuffle(&mut self.streams.batches);
            for chunk in order.chunks(c.minibatch) {
                let batch: Vec<PpoItem> = chunk.iter().map(|&i| items[i].clone()).collect();
                let (rep, g) =
                    ppo_loss(&self.mlp, &self.params, &batch, k, RatioBaseline::Recorded)?;
                self.opt.step(&mut self.params, &g)?;
                m.policy_loss += rep.policy_loss;
                m.value_loss += rep.value_loss;
                m.clip_fraction += rep.clip_fraction;
                updates += 1.0;
            }
        }
        if updates > 0.0 {
            m.policy_loss /= updates;
            m.value_loss /= updates;
            m.clip_fraction /= updates;
        }
        Ok(m)
    }

    fn sac_iteration(&mut self) -> Result<IterationMetrics> {
        let c = self.cfg.sac.clone();
        let mut episodes = Vec::new();
        let mut m = IterationMetrics::default();
        let mut updates = 0.0;
        let mut collected = 0;
        while collected < self.cfg.steps_per_iteration {
            let ep = self.collect_episode()?;
            collected += ep.steps.len();
            for s in &ep.steps {
                self.buffer.push(SacItem {
                    x: s.x.clone(),
                    mask: s.mask.clone(),
                    action: s.action,
                    reward: s.reward,
                    done: s.done,
                    next_x: s.next_x.clone(),
                    next_mask: s.next_mask.clone(),
                    mcts: s.mcts.clone(),
                });
            }
            // one gradient step per collected environment step
            for _ in 0..ep.steps.len() * c.updates_per_step {
                if self.buffer.len() < c.batch_size {
                    break;
                }
                let batch: Vec<SacItem> = self
                    .buffer
                    .sample(c.batch_size, &mut self.streams.batches)?
                    .into_iter()
                    .cloned()
                    .collect();
                let k = SacCoeffs {
                    alpha: self.alpha(),
                    gamma: c.gamma,
                    lambda_mcts: c.lambda_mcts,
                };
                let (rep, g) = sac_loss(
                    &self.mlp,
                    &self.params,
                    &self.params,
                    &self.target_params,
                    &batch,
                    k,
                )?;
                self.opt.step(&mut self.params, &g)?;
                crate::evaluator::polyak_update(&mut self.target_params, &self.params, c.tau_soft)?;
                if c.learnable_alpha {
                    let gap: f64 = batch
                        .iter()
                        .map(|it| {
                            let valid = it.mask.iter().filter(|v| **v).count().max(1) as f64;
                            c.target_entropy_scale * valid.ln()
                        })
                        .sum::<f64>()
                        / batch.len() as f64;
                    let grad = self.alpha() * (rep.entropy - gap);
                    self.log_alpha -= c.alpha_lr * grad;
                }
                m.q_loss += rep.q_loss;
                m.policy_loss += rep.policy_loss;
                m.ce_loss += rep.ce_loss;
                updates += 1.0;
            }
            episodes.push(ep);
        }
        Self::summarize(&episodes, &mut m);
        if updates > 0.0 {
            m.q_loss /= updates;
            m.policy_loss /= updates;
            m.ce_loss /= updates;
        }
        Ok(m)
    }
}
