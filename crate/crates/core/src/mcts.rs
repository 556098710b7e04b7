//! Tree search over the circuit game with evaluator priors and leaf values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvState};
use crate::error::{config_err, Error, Result};
use crate::evaluator::PolicyValue;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MctsConfig {
    pub simulations: usize,
    pub c: f64,
    pub tau_init: f64,
    pub tau_final: f64,
    /// Annealing length in steps; `None` uses the episode horizon.
    pub t_decay: Option<usize>,
    pub p_mix: f64,
    pub gamma: f64,
    /// Prior-weighted exploration instead of the logarithmic bonus.
    pub puct: bool,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            simulations: 64,
            c: 1.414,
            tau_init: 1.0,
            tau_final: 0.1,
            t_decay: None,
            p_mix: 0.5,
            gamma: 0.99,
            puct: false,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            return config_err("simulations must be at least 1");
        }
        if !(self.c > 0.0) {
            return config_err("exploration constant must be positive");
        }
        if !(self.tau_final > 0.0 && self.tau_final <= self.tau_init) {
            return config_err("need 0 < tau_final <= tau_init");
        }
        if !(0.0..=1.0).contains(&self.p_mix) {
            return config_err("p_mix outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return config_err("gamma outside [0, 1]");
        }
        Ok(())
    }
}

/// `total / n + c sqrt(ln parent / n)`, where `total` is the summed value.
pub fn ucb_score(total: f64, n: u64, parent: u64, c: f64) -> f64 {
    let n = n as f64;
    total / n + c * ((parent as f64).ln() / n).sqrt()
}

pub fn puct_score(total: f64, n: u64, parent: u64, prior: f64, c: f64) -> f64 {
    let q = if n == 0 { 0.0 } else { total / n as f64 };
    q + c * prior * (parent as f64).sqrt() / (1.0 + n as f64)
}

/// Linear annealing from `tau_init` to `tau_final` over `t_decay` steps.
pub fn temperature(t: usize, tau_init: f64, tau_final: f64, t_decay: usize) -> f64 {
    if t_decay == 0 {
        return tau_final;
    }
    tau_final + (tau_init - tau_final) * (1.0 - t as f64 / t_decay as f64).max(0.0)
}

/// Probabilities proportional to `visits^(1/tau)`; `tau <= 0.01` is argmax.
pub fn temperature_distribution(visits: &[u32], tau: f64) -> Result<Vec<f64>> {
    let max = visits.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::Search("all visit counts are zero".into()));
    }
    let mut probs = vec![0.0; visits.len()];
    if tau <= 0.01 {
        let best = visits.iter().position(|v| *v == max).unwrap();
        probs[best] = 1.0;
        return Ok(probs);
    }
    let lmax = (max as f64).ln();
    let mut sum = 0.0;
    for (p, &v) in probs.iter_mut().zip(visits) {
        if v > 0 {
            *p = (((v as f64).ln() - lmax) / tau).exp();
            sum += *p;
        }
    }
    for p in &mut probs {
        *p /= sum;
    }
    Ok(probs)
}

pub fn select_with_temperature<R: Rng + ?Sized>(
    visits: &[u32],
    tau: f64,
    rng: &mut R,
) -> Result<usize> {
    let probs = temperature_distribution(visits, tau)?;
    Ok(sample_categorical(&probs, rng))
}

/// Inverse-CDF draw; falls back to the last positive entry on rounding.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

pub fn mix_action<R: Rng + ?Sized>(
    policy_action: usize,
    mcts_action: usize,
    p_mix: f64,
    rng: &mut R,
) -> usize {
    if rng.random_bool(p_mix.clamp(0.0, 1.0)) {
        mcts_action
    } else {
        policy_action
    }
}

#[derive(Clone, Debug)]
struct Child {
    action: usize,
    prior: f64,
    n: u64,
    w: f64,
    reward: f64,
    node: Option<usize>,
}

#[derive(Clone, Debug)]
struct Node {
    state: EnvState,
    expanded: bool,
    children: Vec<Child>,
}

impl Node {
    fn new(state: EnvState) -> Node {
        Node {
            state,
            expanded: false,
            children: Vec::new(),
        }
    }

    fn parent_visits(&self) -> u64 {
        self.children.iter().map(|c| c.n).sum::<u64>() + 1
    }
}

/// Arena-allocated search tree rooted at the current episode state.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<Node>,
    root: usize,
}

impl SearchTree {
    pub fn new(state: EnvState) -> SearchTree {
        SearchTree {
            nodes: vec![Node::new(state)],
            root: 0,
        }
    }

    pub fn root_state(&self) -> &EnvState {
        &self.nodes[self.root].state
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Root visit counts over the flat action space.
    pub fn root_visits(&self, num_actions: usize) -> Vec<u32> {
        let mut v = vec![0u32; num_actions];
        for c in &self.nodes[self.root].children {
            v[c.action] = c.n as u32;
        }
        v
    }

    /// Moves the root to the child reached by `action`, keeping its subtree.
    pub fn advance(&mut self, env: &Env, action: usize) -> Result<()> {
        let root = self.root;
        if let Some(c) = self.nodes[root]
            .children
            .iter()
            .find(|c| c.action == action)
        {
            if let Some(id) = c.node {
                self.root = id;
                return Ok(());
            }
        }
        let (next, _) = env.transition(&self.nodes[root].state, action)?;
        self.nodes.push(Node::new(next));
        self.root = self.nodes.len() - 1;
        Ok(())
    }
}

pub struct Mcts<'a, E: PolicyValue + ?Sized> {
    pub env: &'a Env,
    pub evaluator: &'a E,
    pub config: &'a MctsConfig,
}

impl<E: PolicyValue + ?Sized> Mcts<'_, E> {
    fn expand(&self, tree: &mut SearchTree, id: usize) -> Result<f64> {
        let node = &tree.nodes[id];
        let eval = self.evaluator.evaluate(self.env, &node.state)?;
        let children = self
            .env
            .valid_actions(&node.state)
            .into_iter()
            .map(|a| Child {
                action: a,
                prior: eval.policy[a],
                n: 0,
                w: 0.0,
                reward: 0.0,
                node: None,
            })
            .collect();
        let node = &mut tree.nodes[id];
        node.children = children;
        node.expanded = true;
        Ok(eval.value)
    }

    fn select(&self, node: &Node) -> usize {
        let mut best = None::<(usize, f64)>;
        let unvisited = node.children.iter().any(|c| c.n == 0);
        let parent = node.parent_visits();
        for (i, c) in node.children.iter().enumerate() {
            let key = if self.config.puct {
                puct_score(c.w, c.n, parent, c.prior, self.config.c)
            } else if unvisited {
                if c.n > 0 {
                    continue;
                }
                c.prior
            } else {
                ucb_score(c.w, c.n, parent, self.config.c)
            };
            // strict comparison keeps the lowest action index on ties
            if best.is_none_or(|(_, k)| key > k) {
                best = Some((i, key));
            }
        }
        best.expect("expanded non-terminal node has children").0
    }

    /// Runs the configured number of simulations from the tree root and
    /// returns root visit counts.
    pub fn search(&self, tree: &mut SearchTree) -> Result<Vec<u32>> {
        let root = tree.root;
        if tree.nodes[root].state.done {
            return Err(Error::Search("search started from a terminal state".into()));
        }
        if !tree.nodes[root].expanded {
            self.expand(tree, root)?;
        }
        let mut path: Vec<(usize, usize)> = Vec::new();
        for _ in 0..self.config.simulations {
            path.clear();
            let mut cur = root;
            let leaf_value = loop {
                if tree.nodes[cur].state.done {
                    break 0.0;
                }
                if !tree.nodes[cur].expanded {
                    break self.expand(tree, cur)?;
                }
                let ci = self.select(&tree.nodes[cur]);
                path.push((cur, ci));
                let child = &tree.nodes[cur].children[ci];
                cur = match child.node {
                    Some(id) => id,
                    None => {
                        let (next, out) =
                            self.env.transition(&tree.nodes[cur].state, child.action)?;
                        tree.nodes.push(Node::new(next));
                        let id = tree.nodes.len() - 1;
                        let c = &mut tree.nodes[cur].children[ci];
                        c.node = Some(id);
                        c.reward = out.reward;
                        id
                    }
                };
            };
            let mut g = leaf_value;
            for &(id, ci) in path.iter().rev() {
                let c = &mut tree.nodes[id].children[ci];
                g = c.reward + self.config.gamma * g;
                c.n += 1;
                c.w += g;
            }
        }
        Ok(tree.root_visits(self.env.num_actions()))
    }
}
