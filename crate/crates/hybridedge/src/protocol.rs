//! Newline-delimited JSON framing for the manager/agent protocol.
//!
//! One envelope per line: `{"v": 1, "type": "...", "payload": {...}}`.
//! Unknown fields are ignored; an unknown type or a version mismatch is
//! reported to the peer, and a version mismatch additionally closes the
//! connection.

use hybridedge_core::proto::{Message, PROTOCOL_VERSION};
use serde_json::{json, Value};

const KNOWN_TYPES: [&str; 7] = [
    "register",
    "heartbeat",
    "launch",
    "terminate",
    "metrics-report",
    "ack",
    "error",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0} (expected {PROTOCOL_VERSION})")]
    VersionMismatch(u64),
    #[error("unsupported message type `{0}`")]
    UnsupportedType(String),
}

/// Encodes one message as a single line (no trailing newline).
pub fn encode(msg: &Message) -> String {
    let mut value = serde_json::to_value(msg).expect("protocol messages always serialize");
    let obj = value.as_object_mut().expect("tagged enum serializes to an object");
    obj.insert("v".to_string(), json!(PROTOCOL_VERSION));
    // `type` before `payload` comes from the enum representation; v is merged
    // into the same object.
    serde_json::to_string(&value).expect("json value serializes")
}

/// Decodes one line into a message, tolerating unknown fields.
pub fn decode(line: &str) -> Result<Message, DecodeError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| {
        DecodeError::Malformed("message must be a JSON object".to_string())
    })?;
    let v = obj
        .get("v")
        .and_then(Value::as_u64)
        .ok_or_else(|| DecodeError::Malformed("missing protocol version field `v`".to_string()))?;
    if v != u64::from(PROTOCOL_VERSION) {
        return Err(DecodeError::VersionMismatch(v));
    }
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| DecodeError::Malformed("missing `type` field".to_string()))?;
    if !KNOWN_TYPES.contains(&kind) {
        return Err(DecodeError::UnsupportedType(kind.to_string()));
    }
    serde_json::from_value(value).map_err(|e| DecodeError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridedge_core::monitor::HeartbeatSnapshot;
    use hybridedge_core::proto::ErrorCode;
    use std::collections::BTreeSet;

    fn heartbeat() -> Message {
        Message::Heartbeat(HeartbeatSnapshot {
            node_id: "w1".to_string(),
            mem_allocated_mb: 71.0,
            cpu_allocated_pct: 0.29,
            running_instances: BTreeSet::from(["s1-0".to_string()]),
            sent_at: 1000,
        })
    }

    #[test]
    fn round_trip_carries_the_version() {
        let line = encode(&heartbeat());
        assert!(line.contains("\"v\":1"));
        assert!(!line.contains('\n'));
        assert_eq!(decode(&line).unwrap(), heartbeat());
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let line = r#"{"v":1,"type":"ack","payload":{"ref":"i1","extra":"future"},"trace":42}"#;
        assert_eq!(decode(line).unwrap(), Message::ack("i1"));
    }

    #[test]
    fn unknown_type_is_reported_as_unsupported() {
        let line = r#"{"v":1,"type":"snapshot","payload":{}}"#;
        assert_eq!(decode(line), Err(DecodeError::UnsupportedType("snapshot".to_string())));
    }

    #[test]
    fn version_mismatch_is_detected() {
        let line = r#"{"v":2,"type":"ack","payload":{"ref":"x"}}"#;
        assert_eq!(decode(line), Err(DecodeError::VersionMismatch(2)));
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(decode("not json"), Err(DecodeError::Malformed(_))));
        assert!(matches!(decode(r#"{"type":"ack"}"#), Err(DecodeError::Malformed(_))));
    }

    #[test]
    fn error_round_trip_keeps_the_code() {
        let msg = Message::error("i9", ErrorCode::Busy, "all execution slots in use");
        assert_eq!(decode(&encode(&msg)).unwrap(), msg);
    }
}
