//! Transport abstraction between the gateway and the authority.
//!
//! One request, one response, no streaming. Implementations carry encoded
//! envelopes; they never interpret them. `Unavailable` models the endpoint
//! being down (connection refused, 503), distinct from a coded failure
//! response which travels inside the response envelope.

use super::ServiceKind;

pub trait Transport: Send + Sync {
    fn call(&self, service: ServiceKind, request: &[u8]) -> Result<Vec<u8>, TransportError>;
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("service unavailable: {0}")]
    Unavailable(String),
    #[error("transport I/O: {0}")]
    Io(String),
}
