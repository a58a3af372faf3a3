//! Simulated issuing authority for electronic transport documents.
//!
//! Implements the receiving side of the batch protocol: envelope and
//! certificate validation, a FIFO input queue, asynchronous batch
//! processing, a 24-hour output queue, and the five synchronous services
//! (withdrawal, numbering withdrawal, status tracking, correction, service
//! status). State is in-memory only; durability belongs to the client side.

mod authority;
mod metrics;
mod registry;
mod server;

pub use authority::{Authority, AuthorityConfig, Environment, OutputEntry, RETENTION_MS};
pub use metrics::{ReceiptMint, ResponseWindow, WINDOW_MS};
pub use registry::{DocState, Registry, VoidedRange};
pub use server::{AuthorityServer, InProcessTransport};
