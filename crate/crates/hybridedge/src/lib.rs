//! Hybrid container/unikernel edge orchestrator.
//!
//! This crate carries everything that talks to the outside world: the
//! manager service (control API over HTTP, agent protocol over TCP), the
//! per-node agent daemon, the execution backends, file formats, the
//! deterministic scenario harness, and the operator CLI. The decision logic
//! itself lives in `hybridedge-core`.

pub mod agentd;
pub mod backends;
pub mod cli;
pub mod configio;
pub mod kernels;
pub mod manager;
pub mod protocol;
pub mod sim;

pub use hybridedge_core as core;
