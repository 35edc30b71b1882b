//! Resource-awareness: per-node snapshots from heartbeats, health
//! transitions, and orphan surfacing for rescheduling.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ClusterConfig, NodeHealth, NodeState, TimestampMs};

/// What an agent reports about itself on every heartbeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatSnapshot {
    pub node_id: String,
    pub mem_allocated_mb: f64,
    pub cpu_allocated_pct: f64,
    pub running_instances: BTreeSet<String>,
    pub sent_at: TimestampMs,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeartbeatError {
    /// `sent_at` is older than the last applied snapshot; the snapshot is
    /// ignored and the state unchanged.
    #[error("stale snapshot: sent_at {sent_at} < last applied {last_applied}")]
    StaleSnapshot { sent_at: TimestampMs, last_applied: TimestampMs },
    #[error("snapshot for node `{snapshot}` applied to state of node `{state}`")]
    NodeMismatch { snapshot: String, state: String },
}

/// Applies a heartbeat: allocation figures and the running set are replaced
/// by the snapshot (the agent is closest to ground truth, so the snapshot
/// wins over manager-side bookkeeping), and health resets to Healthy.
pub fn apply_heartbeat(
    state: &NodeState,
    snap: &HeartbeatSnapshot,
    now: TimestampMs,
) -> Result<NodeState, HeartbeatError> {
    if snap.node_id != state.node_id {
        return Err(HeartbeatError::NodeMismatch {
            snapshot: snap.node_id.clone(),
            state: state.node_id.clone(),
        });
    }
    if let Some(last) = state.last_snapshot_at {
        if snap.sent_at < last {
            return Err(HeartbeatError::StaleSnapshot { sent_at: snap.sent_at, last_applied: last });
        }
    }
    let mut next = state.clone();
    next.mem_allocated_mb = snap.mem_allocated_mb;
    next.cpu_allocated_pct = snap.cpu_allocated_pct;
    next.running_instances = snap.running_instances.clone();
    next.last_heartbeat = now;
    next.last_snapshot_at = Some(snap.sent_at);
    next.health = NodeHealth::Healthy;
    Ok(next)
}

/// Health is a pure function of the heartbeat gap and the config thresholds.
pub fn health_for_gap(gap_ms: u64, config: &ClusterConfig) -> NodeHealth {
    if gap_ms >= config.unhealthy_gap_ms() {
        NodeHealth::Unhealthy
    } else if gap_ms >= config.suspect_gap_ms() {
        NodeHealth::Suspect
    } else {
        NodeHealth::Healthy
    }
}

/// Recomputes every node's health from its heartbeat gap. On the transition
/// into Unhealthy the node's running instances are emitted exactly once as
/// orphans and cleared from the node (together with their allocations).
pub fn sweep_health(
    nodes: &[NodeState],
    now: TimestampMs,
    config: &ClusterConfig,
) -> (Vec<NodeState>, Vec<String>) {
    let mut updated = Vec::with_capacity(nodes.len());
    let mut orphans = Vec::new();
    for node in nodes {
        let gap = now.saturating_sub(node.last_heartbeat);
        let health = health_for_gap(gap, config);
        let mut next = node.clone();
        if health == NodeHealth::Unhealthy && node.health != NodeHealth::Unhealthy {
            orphans.extend(next.running_instances.iter().cloned());
            next.running_instances.clear();
            next.mem_allocated_mb = 0.0;
            next.cpu_allocated_pct = 0.0;
        }
        next.health = health;
        updated.push(next);
    }
    (updated, orphans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn snapshot(node_id: &str, running: &[&str], sent_at: TimestampMs) -> HeartbeatSnapshot {
        HeartbeatSnapshot {
            node_id: node_id.to_string(),
            mem_allocated_mb: 100.0 * running.len() as f64,
            cpu_allocated_pct: 0.0,
            running_instances: running.iter().map(|s| s.to_string()).collect(),
            sent_at,
        }
    }

    #[test]
    fn fresh_snapshot_recovers_an_unhealthy_node() {
        let mut node = NodeState::worker("w1", 0);
        node.health = NodeHealth::Unhealthy;
        let next = apply_heartbeat(&node, &snapshot("w1", &[], 10), 12).unwrap();
        assert_eq!(next.health, NodeHealth::Healthy);
        assert_eq!(next.last_heartbeat, 12);
    }

    #[test]
    fn stale_snapshot_is_ignored() {
        let node = NodeState::worker("w1", 0);
        let node = apply_heartbeat(&node, &snapshot("w1", &["i1"], 10), 10).unwrap();
        let err = apply_heartbeat(&node, &snapshot("w1", &[], 5), 11).unwrap_err();
        assert_eq!(err, HeartbeatError::StaleSnapshot { sent_at: 5, last_applied: 10 });
        assert_eq!(node.running_instances.len(), 1);
    }

    #[test]
    fn snapshot_replaces_the_running_set() {
        let node = NodeState::worker("w1", 0);
        let next = apply_heartbeat(&node, &snapshot("w1", &["a", "b", "c"], 10), 10).unwrap();
        assert_eq!(next.running_instances.len(), 3);
        assert_eq!(next.mem_allocated_mb, 300.0);
    }

    #[test]
    fn mismatched_node_id_is_rejected() {
        let node = NodeState::worker("w1", 0);
        assert!(apply_heartbeat(&node, &snapshot("w2", &[], 10), 10).is_err());
    }

    #[test]
    fn one_interval_gap_stays_healthy() {
        let config = ClusterConfig::default();
        let node = NodeState::worker("w1", 0);
        let (nodes, orphans) = sweep_health(&[node], config.heartbeat_interval_ms, &config);
        assert_eq!(nodes[0].health, NodeHealth::Healthy);
        assert!(orphans.is_empty());
    }

    #[test]
    fn three_interval_gap_goes_unhealthy_and_orphans_running_instances() {
        let config = ClusterConfig::default();
        let mut node = NodeState::worker("w1", 0);
        node.running_instances.insert("i1".to_string());
        node.running_instances.insert("i2".to_string());
        node.mem_allocated_mb = 200.0;
        let (nodes, orphans) = sweep_health(&[node], 3 * config.heartbeat_interval_ms, &config);
        assert_eq!(nodes[0].health, NodeHealth::Unhealthy);
        assert_eq!(orphans, alloc::vec!["i1".to_string(), "i2".to_string()]);
        assert!(nodes[0].running_instances.is_empty());
        assert_eq!(nodes[0].mem_allocated_mb, 0.0);
    }

    #[test]
    fn repeated_sweep_emits_no_additional_orphans() {
        let config = ClusterConfig::default();
        let mut node = NodeState::worker("w1", 0);
        node.running_instances.insert("i1".to_string());
        let (nodes, first) = sweep_health(&[node], 3000, &config);
        assert_eq!(first.len(), 1);
        let (_, second) = sweep_health(&nodes, 4000, &config);
        assert!(second.is_empty());
    }

    #[test]
    fn two_interval_gap_is_suspect() {
        let config = ClusterConfig::default();
        let node = NodeState::worker("w1", 0);
        let (nodes, _) = sweep_health(&[node], 2 * config.heartbeat_interval_ms, &config);
        assert_eq!(nodes[0].health, NodeHealth::Suspect);
    }

    #[test]
    fn heartbeat_then_sweep_at_same_timestamp_never_orphans() {
        let config = ClusterConfig::default();
        let node = NodeState::worker("w1", 0);
        let node = apply_heartbeat(&node, &snapshot("w1", &["i1"], 500), 500).unwrap();
        let (nodes, orphans) = sweep_health(&[node], 500, &config);
        assert_eq!(nodes[0].health, NodeHealth::Healthy);
        assert!(orphans.is_empty());
    }
}
