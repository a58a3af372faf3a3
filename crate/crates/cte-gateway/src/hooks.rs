//! Interception points for external effects.
//!
//! Every journal append, network send, output write, and input rename is
//! announced through [`EffectHooks::before_effect`] immediately before it
//! happens. A hook that returns `Err` aborts the tick at that exact point,
//! which is how recovery tests kill the process between any two effects.

/// Raised by a hook to abort the tick before the announced effect runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interrupted {
    pub label: String,
}

impl std::fmt::Display for Interrupted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "interrupted before {}", self.label)
    }
}

impl std::error::Error for Interrupted {}

pub trait EffectHooks: Send + Sync {
    /// Called immediately before the named effect. `Err` aborts the tick
    /// and the effect never runs.
    fn before_effect(&self, label: &str) -> Result<(), Interrupted>;
}

/// Production hooks: never interrupt.
pub struct NoHooks;

impl EffectHooks for NoHooks {
    fn before_effect(&self, _label: &str) -> Result<(), Interrupted> {
        Ok(())
    }
}
