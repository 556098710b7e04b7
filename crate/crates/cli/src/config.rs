use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use polycircuit::trainer::TrainConfig;
use polycircuit::{BoardConfig, EnvConfig, MctsConfig, NetConfig, RewardConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub reward: RewardConfig,
    pub horizon_slack: usize,
    pub strict: bool,
}

impl Default for EnvSection {
    fn default() -> Self {
        let base = EnvConfig::for_complexity(1, 5, 1);
        EnvSection {
            reward: base.reward,
            horizon_slack: base.horizon_slack,
            strict: base.strict,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Search,
    Policy,
    Random,
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub episodes: usize,
    pub tau: f64,
    /// Search simulations per move at evaluation time.
    pub simulations: usize,
    /// Complexities to evaluate; empty means every board level from 1.
    pub complexities: Vec<usize>,
    pub agent: AgentKind,
    /// Also evaluate the uniform-random agent on the same targets.
    pub baseline: bool,
    /// Draw evaluation targets from the held-out split.
    pub held_out: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            episodes: 1000,
            tau: polycircuit::trainer::evaluate::EVAL_TAU,
            simulations: 128,
            complexities: Vec::new(),
            agent: AgentKind::Search,
            baseline: true,
            held_out: true,
        }
    }
}

/// Everything a command needs, read from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub board: BoardConfig,
    pub env: EnvSection,
    pub net: NetConfig,
    pub mcts: MctsConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("runs/default"),
            workers: 1,
            board: BoardConfig::default(),
            env: EnvSection::default(),
            net: NetConfig::default(),
            mcts: MctsConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Environment sized for every target up to the board's complexity.
    pub fn env_config(&self) -> EnvConfig {
        let max_steps = self.board.max_complexity + self.env.horizon_slack;
        EnvConfig {
            n_vars: self.board.n_vars,
            modulus: self.board.modulus,
            max_steps: max_steps.max(1),
            max_nodes: self.board.n_vars + 1 + max_steps.max(1),
            reward: self.env.reward,
            horizon_slack: self.env.horizon_slack,
            strict: self.env.strict,
        }
    }

    /// Digest of the settings that fix the network's input and output shape.
    pub fn shape_hash(&self) -> Result<u64> {
        #[derive(Serialize)]
        struct Shape<'a> {
            env: &'a EnvConfig,
            hidden: usize,
        }
        let text = toml::to_string(&Shape {
            env: &self.env_config(),
            hidden: self.net.hidden,
        })?;
        Ok(polycircuit::evaluator::config_hash(&text))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.board.include_constant {
            bail!("training and evaluation need the constant seed node (board.include_constant)");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        self.env_config().validate()?;
        self.mcts.validate()?;
        Ok(())
    }
}
