//! Arithmetic circuit discovery over prime fields as a single-player game.

pub mod board;
pub mod circuit;
pub mod env;
pub mod error;
pub mod evaluator;
pub mod families;
pub mod field;
pub mod mcts;
pub mod oracle;
pub mod poly;
pub mod split;
pub mod trainer;

pub use board::{BoardConfig, BoardNode, BoardStats, DedupPolicy, GameBoard, Layering};
pub use circuit::{Action, Circuit, Gate, Op};
pub use env::{ActionSpace, Env, EnvConfig, EnvState, RewardConfig, StepOutcome};
pub use error::{Error, Result};
pub use evaluator::{Dims, Mlp, NetConfig, PolicyValue};
pub use field::{FieldElement, Modulus};
pub use mcts::{Mcts, MctsConfig, SearchTree};
pub use poly::{FieldPolynomial, Monomial};
