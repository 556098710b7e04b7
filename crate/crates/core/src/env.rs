//! The circuit-building game: states, masked flat actions, encodings and rewards.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::board::GameBoard;
use crate::circuit::{Action, Circuit, Gate, Op};
use crate::error::{config_err, Error, Result};
use crate::field::Modulus;
use crate::poly::FieldPolynomial;

/// Width of one node-feature row.
pub const NODE_FEATURES: usize = 4;
/// Structural columns per node in the flat network input.
pub const STRUCT_FEATURES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub success_bonus: f64,
    pub step_penalty: f64,
    pub failure_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            success_bonus: 10.0,
            step_penalty: 0.1,
            failure_penalty: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_vars: usize,
    pub modulus: u32,
    /// Hard upper bound on episode length.
    pub max_steps: usize,
    pub max_nodes: usize,
    pub reward: RewardConfig,
    /// Steps granted beyond the reference length of the target.
    pub horizon_slack: usize,
    /// Episode horizon equals the reference length exactly.
    pub strict: bool,
}

impl EnvConfig {
    /// Configuration able to host every target of complexity up to `c_max`.
    pub fn for_complexity(n_vars: usize, modulus: u32, c_max: usize) -> EnvConfig {
        let horizon_slack = 2;
        let max_steps = c_max + horizon_slack;
        EnvConfig {
            n_vars,
            modulus,
            max_steps,
            max_nodes: n_vars + 1 + max_steps,
            reward: RewardConfig::default(),
            horizon_slack,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<Modulus> {
        let m = Modulus::new(self.modulus)?;
        if self.n_vars == 0 {
            return config_err("environment needs at least one variable");
        }
        if self.max_steps == 0 {
            return config_err("max_steps must be at least 1");
        }
        if self.max_nodes < self.n_vars + 1 + self.max_steps {
            return config_err(format!(
                "max_nodes {} < n_vars + 1 + max_steps = {}",
                self.max_nodes,
                self.n_vars + 1 + self.max_steps
            ));
        }
        Ok(m)
    }
}

/// Flat indexing of `(op, i, j)` with `i <= j < max_nodes`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    max_nodes: usize,
}

impl ActionSpace {
    pub fn new(max_nodes: usize) -> Self {
        ActionSpace { max_nodes }
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn pairs(&self) -> usize {
        self.max_nodes * (self.max_nodes + 1) / 2
    }

    pub fn size(&self) -> usize {
        2 * self.pairs()
    }

    pub fn to_index(&self, a: Action) -> Result<usize> {
        if a.left > a.right || a.right >= self.max_nodes {
            return Err(Error::Domain(format!(
                "action {a} outside {} nodes",
                self.max_nodes
            )));
        }
        Ok(a.op.index() * self.pairs() + a.right * (a.right + 1) / 2 + a.left)
    }

    pub fn from_index(&self, index: usize) -> Result<Action> {
        if index >= self.size() {
            return Err(Error::Domain(format!(
                "action index {index} outside [0, {})",
                self.size()
            )));
        }
        let op = Op::ALL[index / self.pairs()];
        let rank = index % self.pairs();
        let mut j = (((8 * rank + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
        while (j + 1) * (j + 2) / 2 <= rank {
            j += 1;
        }
        while j * (j + 1) / 2 > rank {
            j -= 1;
        }
        Ok(Action::new(op, rank - j * (j + 1) / 2, j))
    }

    /// Number of flat indices valid when `nodes` nodes exist, per op.
    pub fn valid_pairs(nodes: usize) -> usize {
        nodes * (nodes + 1) / 2
    }
}

#[derive(Clone, Debug)]
pub struct EnvState {
    pub circuit: Circuit,
    pub target: Arc<FieldPolynomial>,
    pub reference: Arc<Vec<Action>>,
    pub step_count: usize,
    /// Steps allowed in this episode.
    pub horizon: usize,
    pub done: bool,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Graph view of a state: padded node rows and operand/self-loop edges.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEncoding {
    pub node_features: Vec<[f64; NODE_FEATURES]>,
    pub padding_mask: Vec<bool>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Env {
    config: EnvConfig,
    modulus: Modulus,
    space: ActionSpace,
    probe: Vec<u32>,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Env> {
        let modulus = config.validate()?;
        let probe = (0..config.n_vars)
            .map(|i| modulus.reduce(i as u64 + 2))
            .collect();
        Ok(Env {
            space: ActionSpace::new(config.max_nodes),
            config,
            modulus,
            probe,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn num_actions(&self) -> usize {
        self.space.size()
    }

    pub fn horizon_for(&self, reference_len: usize) -> usize {
        let slack = if self.config.strict {
            0
        } else {
            self.config.horizon_slack
        };
        (reference_len + slack).clamp(1, self.config.max_steps)
    }

    pub fn reset(&self, target: FieldPolynomial, reference: Vec<Action>) -> Result<EnvState> {
        let circuit = Circuit::new(self.config.n_vars, self.modulus)?;
        if target.n_vars() != self.config.n_vars || target.modulus() != self.modulus {
            return Err(Error::Domain(format!(
                "target over {} variables mod {} does not fit the environment",
                target.n_vars(),
                target.modulus()
            )));
        }
        if circuit.find(&target).is_some() {
            return Err(Error::DegenerateEpisode(format!(
                "target {target} is a seed polynomial"
            )));
        }
        if reference.len() > self.config.max_steps {
            return Err(Error::Capacity(format!(
                "reference of {} steps exceeds max_steps {}",
                reference.len(),
                self.config.max_steps
            )));
        }
        Ok(EnvState {
            circuit,
            target: Arc::new(target),
            horizon: self.horizon_for(reference.len()),
            reference: Arc::new(reference),
            step_count: 0,
            done: false,
            success: false,
        })
    }

    /// Resets on a board node with one of its extracted sequences, chosen uniformly.
    pub fn reset_from_board<R: Rng + ?Sized>(
        &self,
        board: &GameBoard,
        node: usize,
        rng: &mut R,
    ) -> Result<EnvState> {
        let target = board.node(node)?.polynomial.clone();
        let mut seqs = board.extract_optimal_action_sequences(node, 16)?;
        if seqs.is_empty() {
            return Err(Error::Reference(format!(
                "board node {node} has no sequence"
            )));
        }
        let pick = rng.random_range(0..seqs.len());
        self.reset(target, seqs.swap_remove(pick))
    }

    pub fn step(&self, state: &mut EnvState, action: usize) -> Result<StepOutcome> {
        if state.done {
            return Err(Error::InvalidAction {
                action,
                reason: "episode is over".into(),
            });
        }
        let a = self.space.from_index(action)?;
        if a.right >= state.circuit.len() {
            return Err(Error::InvalidAction {
                action,
                reason: format!(
                    "{a} references a node that does not exist ({} nodes)",
                    state.circuit.len()
                ),
            });
        }
        let id = state.circuit.apply(a)?;
        state.step_count += 1;
        let r = &self.config.reward;
        let mut reward = -r.step_penalty;
        if state.circuit.poly(id)? == state.target.as_ref() {
            state.success = true;
            state.done = true;
            reward += r.success_bonus;
        } else if state.step_count >= state.horizon {
            state.done = true;
            reward -= r.failure_penalty;
        }
        Ok(StepOutcome {
            reward,
            done: state.done,
            success: state.success,
        })
    }

    /// Pure transition for search.
    pub fn transition(&self, state: &EnvState, action: usize) -> Result<(EnvState, StepOutcome)> {
        let mut next = state.clone();
        let out = self.step(&mut next, action)?;
        Ok((next, out))
    }

    pub fn action_mask(&self, state: &EnvState) -> Vec<bool> {
        let mut mask = vec![false; self.space.size()];
        if state.done {
            return mask;
        }
        let valid = ActionSpace::valid_pairs(state.circuit.len());
        for op in 0..2 {
            let base = op * self.space.pairs();
            mask[base..base + valid].fill(true);
        }
        mask
    }

    pub fn valid_actions(&self, state: &EnvState) -> Vec<usize> {
        if state.done {
            return Vec::new();
        }
        let valid = ActionSpace::valid_pairs(state.circuit.len());
        (0..2)
            .flat_map(|op| {
                let base = op * self.space.pairs();
                base..base + valid
            })
            .collect()
    }

    fn node_row(&self, circuit: &Circuit, id: usize) -> [f64; NODE_FEATURES] {
        let kind = match circuit.gates()[id] {
            Gate::Input(_) => 0,
            Gate::ConstantOne => 1,
            Gate::Operation { .. } => 2,
        };
        let mut row = [0.0; NODE_FEATURES];
        row[kind] = 1.0;
        let v = circuit
            .poly(id)
            .map(|f| f.eval_residues(&self.probe))
            .unwrap_or(0);
        row[3] = v as f64 / self.modulus.get() as f64;
        row
    }

    pub fn encode_state(&self, state: &EnvState) -> StateEncoding {
        let m = self.config.max_nodes;
        let c = &state.circuit;
        let mut node_features = vec![[0.0; NODE_FEATURES]; m];
        let mut padding_mask = vec![true; m];
        let mut edges = Vec::new();
        for id in 0..c.len() {
            node_features[id] = self.node_row(c, id);
            padding_mask[id] = false;
            if let Gate::Operation { left, right, .. } = c.gates()[id] {
                edges.push((left, id));
                edges.push((right, id));
            }
            edges.push((id, id));
        }
        StateEncoding {
            node_features,
            padding_mask,
            edges,
        }
    }

    pub fn target_dim(&self) -> usize {
        self.config.max_steps * (2 + 2 * self.config.max_nodes + 1)
    }

    pub fn encode_target(&self, state: &EnvState) -> Result<Vec<f64>> {
        encode_reference(
            &state.reference,
            self.config.max_steps,
            self.config.max_nodes,
        )
    }

    /// Length of [`Env::features`].
    pub fn feature_dim(&self) -> usize {
        self.config.max_nodes * (NODE_FEATURES + STRUCT_FEATURES) + self.target_dim()
    }

    /// Flat network input: node rows, per-node structure, then the target encoding.
    pub fn features(&self, state: &EnvState) -> Result<Vec<f64>> {
        let m = self.config.max_nodes;
        let c = &state.circuit;
        let mut out = Vec::with_capacity(self.feature_dim());
        for id in 0..m {
            if id < c.len() {
                out.extend_from_slice(&self.node_row(c, id));
            } else {
                out.extend_from_slice(&[0.0; NODE_FEATURES]);
            }
        }
        for id in 0..m {
            let s = match c.gates().get(id) {
                Some(Gate::Operation { left, right, .. }) => [
                    1.0,
                    (*left + 1) as f64 / m as f64,
                    (*right + 1) as f64 / m as f64,
                ],
                _ => [0.0; STRUCT_FEATURES],
            };
            out.extend_from_slice(&s);
        }
        out.extend(self.encode_target(state)?);
        Ok(out)
    }
}

pub fn encode_reference(
    reference: &[Action],
    max_steps: usize,
    max_nodes: usize,
) -> Result<Vec<f64>> {
    if reference.len() > max_steps {
        return Err(Error::Capacity(format!(
            "reference of {} steps exceeds {max_steps}",
            reference.len()
        )));
    }
    let block = 2 + 2 * max_nodes + 1;
    let mut out = vec![0.0; max_steps * block];
    for (t, a) in reference.iter().enumerate() {
        if a.right >= max_nodes {
            return Err(Error::Capacity(format!(
                "reference action {a} exceeds {max_nodes} nodes"
            )));
        }
        let b = &mut out[t * block..(t + 1) * block];
        b[a.op.index()] = 1.0;
        b[2 + a.left] = 1.0;
        b[2 + max_nodes + a.right] = 1.0;
        if t + 1 == reference.len() {
            b[block - 1] = 1.0;
        }
    }
    Ok(out)
}

/// Line-oriented `step<TAB>action<TAB>reward<TAB>done` records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<(usize, f64, bool)>,
}

impl EpisodeTrace {
    pub fn push(&mut self, action: usize, outcome: &StepOutcome) {
        self.records.push((action, outcome.reward, outcome.done));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, (a, r, d)) in self.records.iter().enumerate() {
            let _ = writeln!(s, "{t}\t{a}\t{r:.6}\t{d}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<EpisodeTrace> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse(format!("bad trace line {line:?}"));
            if cols.len() != 4 {
                return Err(bad());
            }
            records.push((
                cols[1].parse().map_err(|_| bad())?,
                cols[2].parse().map_err(|_| bad())?,
                cols[3].parse().map_err(|_| bad())?,
            ));
        }
        Ok(EpisodeTrace { records })
    }

    /// Replays the recorded actions from `state`, checking rewards and termination.
    pub fn replay(&self, env: &Env, mut state: EnvState) -> Result<EnvState> {
        for &(a, r, d) in &self.records {
            let out = env.step(&mut state, a)?;
            if out.done != d || (out.reward - r).abs() > 1e-6 {
                return Err(Error::Data(format!(
                    "trace diverges at action {a}: got ({}, {}), recorded ({r}, {d})",
                    out.reward, out.done
                )));
            }
        }
        Ok(state)
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.1).sum()
    }
}
