//! One module per verb. Commands return a process exit code; anything
//! worth reporting goes to stdout (or stderr for failures) before that.
//!
//! Exit codes: 0 success, 1 configuration or environment problem,
//! 2 journal corruption (run-gateway), 3 unknown or unprintable document,
//! 4 simulation invariant violation.

pub mod counts;
pub mod dacte;
pub mod errors;
pub mod run_gateway;
pub mod serve_authority;
pub mod simulate;
pub mod status;

use std::path::Path;

use anyhow::{bail, Context};

use cte_gateway::GatewayConfig;
use cte_store::State;

/// Rebuilds the materialized state by replaying the journal, touching
/// nothing on disk: inspection commands must leave no trace.
pub fn load_state(config: &GatewayConfig) -> anyhow::Result<State> {
    let path = &config.journal_path;
    if !path.exists() {
        bail!(
            "journal {} does not exist; has the gateway run against this config?",
            path.display()
        );
    }
    let events = cte_store::read_all(path)
        .with_context(|| format!("reading journal {}", path.display()))?;
    let mut state = State::default();
    for event in &events {
        state
            .apply(event)
            .with_context(|| format!("replaying journal event {}", event.seq))?;
    }
    Ok(state)
}

pub fn load_config(path: &Path) -> anyhow::Result<GatewayConfig> {
    GatewayConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))
}
