//! Manager/agent protocol messages.
//!
//! The wire format is newline-delimited JSON envelopes
//! `{"v": 1, "type": "...", "payload": {...}}`; framing and transport live in
//! the std companion crate. Unknown fields are ignored for forward
//! compatibility.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{AppClass, MetricsRecord, ResourceProfile, RuntimeClass};
use crate::monitor::HeartbeatSnapshot;

/// Current protocol version; mismatches close the connection after an Error
/// reply.
pub const PROTOCOL_VERSION: u32 = 1;

/// Everything an agent needs to start one instance. The seed is fixed at
/// placement time so re-execution of the same attempt is reproducible; the
/// estimates are the admission reservation the agent reports back in
/// heartbeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchRequest {
    pub instance_id: String,
    pub workload_id: String,
    pub runtime_class: RuntimeClass,
    pub app_class: AppClass,
    pub payload_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_override: Option<ResourceProfile>,
    pub seed: u64,
    #[serde(default)]
    pub attempt: u32,
    pub est_mem_mb: f64,
    pub est_cpu_pct: f64,
}

/// First message an agent sends on every (re)connect; `running` re-advertises
/// instances that survived a reconnect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub node_id: String,
    pub mem_capacity_mb: f64,
    pub cpu_cores: u32,
    #[serde(default)]
    pub running: Vec<String>,
}

/// Machine-readable error codes carried by Error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCode {
    Busy,
    NotFound,
    DuplicateInstance,
    UnsupportedType,
    UnexpectedType,
    ProtocolVersionMismatch,
    Malformed,
    Internal,
}

/// The protocol messages, in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "kebab-case")]
pub enum Message {
    Register(Register),
    Heartbeat(HeartbeatSnapshot),
    Launch(LaunchRequest),
    Terminate { instance_id: String },
    MetricsReport { record: MetricsRecord, attempt: u32 },
    Ack { r#ref: String },
    Error { r#ref: String, code: ErrorCode, detail: String },
}

impl Message {
    pub fn ack(r#ref: &str) -> Self {
        Message::Ack { r#ref: r#ref.into() }
    }

    pub fn error(r#ref: &str, code: ErrorCode, detail: &str) -> Self {
        Message::Error { r#ref: r#ref.into(), code, detail: detail.into() }
    }

    /// Dedup key the manager acks MetricsReports with.
    pub fn report_ref(instance_id: &str, attempt: u32) -> String {
        alloc::format!("{instance_id}#{attempt}")
    }
}
