//! Command implementations behind the `polycircuit` binary.

pub mod commands;
pub mod config;

pub use config::{AgentKind, RunConfig};
