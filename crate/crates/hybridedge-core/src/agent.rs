//! The agent's protocol state machine.
//!
//! `handle_message` is deterministic and side-effect-free: side effects are
//! returned as commands and executed by the service loop in the companion
//! crate. That keeps the slot accounting exhaustively testable.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::proto::{ErrorCode, LaunchRequest, Message};

/// Slot accounting plus the launch requests currently running, keyed by
/// instance id (so a re-register can re-advertise them).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSlots {
    pub max_slots: u32,
    pub running: BTreeMap<String, LaunchRequest>,
}

impl AgentSlots {
    pub fn new(max_slots: u32) -> Self {
        AgentSlots { max_slots, running: BTreeMap::new() }
    }

    pub fn used(&self) -> u32 {
        self.running.len() as u32
    }

    pub fn is_full(&self) -> bool {
        self.used() >= self.max_slots
    }

    /// Frees the slot when an execution finishes; returns the request if it
    /// was known.
    pub fn complete(&mut self, instance_id: &str) -> Option<LaunchRequest> {
        self.running.remove(instance_id)
    }

    /// Reservation totals for the heartbeat snapshot.
    pub fn allocation(&self) -> (f64, f64) {
        self.running
            .values()
            .fold((0.0, 0.0), |(mem, cpu), req| (mem + req.est_mem_mb, cpu + req.est_cpu_pct))
    }
}

/// Side effects the loop must execute after a transition.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentCommand {
    StartExecution(LaunchRequest),
    CancelExecution(String),
    /// The manager acknowledged something we sent (metrics delivery).
    ManagerAcked(String),
}

/// One transition of the agent state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: AgentSlots,
    pub outbound: Vec<Message>,
    pub commands: Vec<AgentCommand>,
}

impl Transition {
    fn unchanged(state: &AgentSlots) -> Self {
        Transition { state: state.clone(), outbound: Vec::new(), commands: Vec::new() }
    }
}

/// Pure transition function over inbound protocol messages.
///
/// Launch with a free slot acks and starts the execution; Launch at capacity
/// is rejected with Busy (the manager owns all queueing). Terminate of a
/// running instance acks and cancels; of an unknown one errors with NotFound.
/// Messages only a manager should receive answer with UnexpectedType.
pub fn handle_message(state: &AgentSlots, msg: &Message) -> Transition {
    match msg {
        Message::Launch(req) => {
            if state.running.contains_key(&req.instance_id) {
                let mut t = Transition::unchanged(state);
                t.outbound.push(Message::error(
                    &req.instance_id,
                    ErrorCode::DuplicateInstance,
                    "instance already running",
                ));
                return t;
            }
            if state.is_full() {
                let mut t = Transition::unchanged(state);
                t.outbound.push(Message::error(
                    &req.instance_id,
                    ErrorCode::Busy,
                    "all execution slots in use",
                ));
                return t;
            }
            let mut next = state.clone();
            next.running.insert(req.instance_id.clone(), req.clone());
            Transition {
                state: next,
                outbound: alloc::vec![Message::ack(&req.instance_id)],
                commands: alloc::vec![AgentCommand::StartExecution(req.clone())],
            }
        }
        Message::Terminate { instance_id } => {
            let mut next = state.clone();
            if next.running.remove(instance_id).is_some() {
                Transition {
                    state: next,
                    outbound: alloc::vec![Message::ack(instance_id)],
                    commands: alloc::vec![AgentCommand::CancelExecution(instance_id.clone())],
                }
            } else {
                let mut t = Transition::unchanged(state);
                t.outbound.push(Message::error(
                    instance_id,
                    ErrorCode::NotFound,
                    "no such running instance",
                ));
                t
            }
        }
        Message::Ack { r#ref } => {
            let mut t = Transition::unchanged(state);
            t.commands.push(AgentCommand::ManagerAcked(r#ref.clone()));
            t
        }
        // Errors from the manager carry no state transition for the agent.
        Message::Error { .. } => Transition::unchanged(state),
        // Agent-to-manager messages arriving at an agent are a peer bug.
        Message::Register(_) | Message::Heartbeat(_) | Message::MetricsReport { .. } => {
            let mut t = Transition::unchanged(state);
            t.outbound.push(Message::error(
                "",
                ErrorCode::UnexpectedType,
                "message is only valid toward the manager",
            ));
            t
        }
    }
}
