//! Decision core for the hybridedge orchestrator.
//!
//! Everything in this crate is a pure function over immutable values: domain
//! types and validation, application-aware classification, resource-aware
//! placement and rebalancing, heartbeat-driven health tracking, calibrated
//! metric sampling, the two workload kernels, the manager/agent protocol
//! messages, and the cluster state machine that ties them together.
//!
//! The crate is `no_std` + `alloc` compatible; IO, transports, clocks, and
//! file formats live in the `hybridedge` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agent;
pub mod calibration;
pub mod classify;
pub mod cluster;
pub mod kernel;
pub mod model;
pub mod monitor;
pub mod proto;
pub mod sampling;
pub mod sched;

pub use model::{
    AppClass, ClusterConfig, MetricsRecord, NodeHealth, NodeRole, NodeState, Outcome,
    PayloadKind, PlacementDecision, PlacementReason, ResourceProfile, RuntimeClass, RuntimeKind,
    TimestampMs, ValidatedSpec, WorkloadSpec,
};
