//! The configuration manager's state machine: submit pipeline
//! (validate -> classify -> admit -> place -> dispatch), cluster state
//! ownership, the append-only metrics log, and comparison reports.
//!
//! `ClusterCore` is pure: transitions take the current time as an argument
//! and return the messages to send as [`Effect`]s. One owner loop (the tokio
//! service or the scenario harness) serializes all mutations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationRegistry;
use crate::classify::{classify, RuleTable};
use crate::model::{
    mem_saving_pct, validate_workload, AppClass, ClusterConfig, MathError, MetricsRecord,
    NodeState, PlacementDecision, PlacementReason, RuntimeClass, TimestampMs, ValidatedSpec,
    Violation, WorkloadSpec,
};
use crate::monitor::{self, HeartbeatSnapshot};
use crate::proto::LaunchRequest;
use crate::sampling::derive_seed;
use crate::sched::{self, Admission, Footprint, Migration, OrphanInstance};

/// Lifecycle of one instance as the manager tracks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceStatus {
    Queued,
    Dispatched,
    Running,
    Completed,
    Failed,
    Migrating,
}

impl InstanceStatus {
    /// Whether the instance still occupies capacity somewhere.
    pub fn is_active(&self) -> bool {
        matches!(self, InstanceStatus::Dispatched | InstanceStatus::Running | InstanceStatus::Migrating)
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, InstanceStatus::Completed | InstanceStatus::Failed)
    }
}

/// Everything the manager knows about one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementInfo {
    pub workload_id: String,
    /// None while the instance sits in the admission queue as an orphan.
    pub node_id: Option<String>,
    pub runtime_class: RuntimeClass,
    pub status: InstanceStatus,
    pub footprint: Footprint,
    pub attempt: u32,
    pub priority: i32,
}

/// Messages the owner loop must send after a transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Launch { node_id: String, request: LaunchRequest },
    Terminate { node_id: String, instance_id: String },
}

#[derive(Debug, Clone, PartialEq)]
enum QueueEntry {
    Fresh(ValidatedSpec),
    Orphan(OrphanInstance),
}

impl QueueEntry {
    fn priority(&self) -> i32 {
        match self {
            QueueEntry::Fresh(spec) => spec.priority(),
            QueueEntry::Orphan(o) => o.priority,
        }
    }

    fn workload_id(&self) -> &str {
        match self {
            QueueEntry::Fresh(spec) => spec.id(),
            QueueEntry::Orphan(o) => &o.workload_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct QueueItem {
    entry: QueueEntry,
    seq: u64,
}

/// Result of a submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum SubmitOutcome {
    Placed { decision: PlacementDecision },
    Queued { position: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SubmitError {
    #[error("workload failed validation: {0:?}")]
    ValidationFailed(Vec<Violation>),
    #[error("workload id `{0}` already exists among non-terminated workloads")]
    DuplicateWorkloadId(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("node `{0}` is not registered")]
    UnknownNode(String),
    #[error(transparent)]
    Heartbeat(#[from] monitor::HeartbeatError),
}

/// One line of the append-only metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLogEntry {
    pub record: MetricsRecord,
    pub attempt: u32,
}

/// Record sets for summaries and comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsFilter {
    All,
    Workload(String),
    Flavor(String),
    AppClassIs(AppClass),
    Node(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown filter field `{0}` (expected workload, flavor, app_class, or node)")]
pub struct UnknownFilterField(pub String);

/// Parses `field:value` filters; a bare value filters by workload id and the
/// empty string matches everything.
pub fn parse_filter(input: &str) -> Result<MetricsFilter, UnknownFilterField> {
    let input = input.trim();
    if input.is_empty() {
        return Ok(MetricsFilter::All);
    }
    match input.split_once(':') {
        None => Ok(MetricsFilter::Workload(input.to_string())),
        Some((field, value)) => match field {
            "workload" | "workload_id" => Ok(MetricsFilter::Workload(value.to_string())),
            "flavor" => Ok(MetricsFilter::Flavor(value.to_string())),
            "app_class" | "app-class" => {
                Ok(MetricsFilter::AppClassIs(value.parse().expect("infallible")))
            }
            "node" | "node_id" => Ok(MetricsFilter::Node(value.to_string())),
            other => Err(UnknownFilterField(other.to_string())),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// count/mean/min/max per metric over matching Success records; failures are
/// excluded from the means but included in the count breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub success_count: usize,
    pub failure_count: usize,
    pub cpu_avg_pct: Option<MetricStats>,
    pub mem_peak_mb: Option<MetricStats>,
    pub proc_time_ms: Option<MetricStats>,
    pub boot_ms: Option<MetricStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideMeans {
    pub label: String,
    pub records: usize,
    pub cpu_avg_pct: f64,
    pub mem_peak_mb: f64,
    pub proc_time_ms: f64,
    pub boot_ms: f64,
}

/// Hybrid-vs-baseline comparison: memory saving of B over A and the
/// processing-time delta, with a verdict naming the lighter and faster side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: SideMeans,
    pub b: SideMeans,
    pub mem_saving_pct: f64,
    pub proc_time_delta_ms: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl core::fmt::Display for Side {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Side::A => f.write_str("A"),
            Side::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("side {0} has no successful records")]
    EmptySet(Side),
    #[error(transparent)]
    Math(#[from] MathError),
}

/// Per-instance view for the workload status API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub instance_id: String,
    pub node_id: Option<String>,
    pub runtime_class: RuntimeClass,
    pub status: InstanceStatus,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadView {
    pub spec: ValidatedSpec,
    pub queued: bool,
    pub instances: Vec<InstanceView>,
}

/// Diagnostics counters surfaced by the status API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub duplicate_reports: u64,
    pub stale_snapshots: u64,
    pub orphaned_instances: u64,
}

/// The manager's entire state and its serialized transitions.
#[derive(Debug, Clone)]
pub struct ClusterCore {
    config: ClusterConfig,
    rules: RuleTable,
    registry: CalibrationRegistry,
    nodes: BTreeMap<String, NodeState>,
    placements: BTreeMap<String, PlacementInfo>,
    specs: BTreeMap<String, ValidatedSpec>,
    queue: Vec<QueueItem>,
    queue_seq: u64,
    metrics_log: Vec<MetricsLogEntry>,
    placement_log: Vec<PlacementDecision>,
    migration_log: Vec<Migration>,
    seen_reports: BTreeSet<(String, u32)>,
    diagnostics: Diagnostics,
}

impl ClusterCore {
    pub fn new(config: ClusterConfig, rules: RuleTable, registry: CalibrationRegistry) -> Self {
        ClusterCore {
            config,
            rules,
            registry,
            nodes: BTreeMap::new(),
            placements: BTreeMap::new(),
            specs: BTreeMap::new(),
            queue: Vec::new(),
            queue_seq: 0,
            metrics_log: Vec::new(),
            placement_log: Vec::new(),
            migration_log: Vec::new(),
            seen_reports: BTreeSet::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    pub fn registry(&self) -> &CalibrationRegistry {
        &self.registry
    }

    pub fn nodes(&self) -> &BTreeMap<String, NodeState> {
        &self.nodes
    }

    pub fn placements(&self) -> &BTreeMap<String, PlacementInfo> {
        &self.placements
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn metrics_log(&self) -> &[MetricsLogEntry] {
        &self.metrics_log
    }

    pub fn placement_log(&self) -> &[PlacementDecision] {
        &self.placement_log
    }

    pub fn migration_log(&self) -> &[Migration] {
        &self.migration_log
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    fn node_list(&self) -> Vec<NodeState> {
        self.nodes.values().cloned().collect()
    }

    /// Whether a workload id is taken by a non-terminated workload.
    fn workload_active(&self, id: &str) -> bool {
        if self.queue.iter().any(|item| item.entry.workload_id() == id) {
            return true;
        }
        self.placements
            .values()
            .any(|p| p.workload_id == id && !p.status.is_terminal())
    }

    /// Registers a node or refreshes it after a reconnect. Instances the
    /// agent re-advertises but the manager no longer maps there are told to
    /// terminate; new capacity triggers a queue retry.
    pub fn register_node(
        &mut self,
        node_id: &str,
        mem_capacity_mb: f64,
        cpu_cores: u32,
        running: &[String],
        now: TimestampMs,
    ) -> Vec<Effect> {
        let node = self
            .nodes
            .entry(node_id.to_string())
            .or_insert_with(|| NodeState::with_capacity(node_id, mem_capacity_mb, cpu_cores, now));
        node.mem_capacity_mb = mem_capacity_mb;
        node.cpu_cores = cpu_cores;
        node.last_heartbeat = now;
        node.health = crate::model::NodeHealth::Healthy;

        let mut effects = self.reconcile_running(node_id, running);
        effects.extend(self.retry_queue(now));
        effects
    }

    /// Terminate orders for instances a node claims to run but the manager
    /// maps elsewhere (or not at all).
    fn reconcile_running(&mut self, node_id: &str, running: &[String]) -> Vec<Effect> {
        let mut effects = Vec::new();
        for iid in running {
            let stale = match self.placements.get(iid) {
                None => true,
                Some(p) => p.status.is_terminal() || p.node_id.as_deref() != Some(node_id),
            };
            if stale {
                effects.push(Effect::Terminate {
                    node_id: node_id.to_string(),
                    instance_id: iid.clone(),
                });
            }
        }
        effects
    }

    /// Ingests a heartbeat snapshot. Allocation figures and the running set
    /// replace the manager's bookkeeping (the snapshot wins); instances the
    /// snapshot confirms move Dispatched -> Running.
    pub fn heartbeat(
        &mut self,
        snap: &HeartbeatSnapshot,
        now: TimestampMs,
    ) -> Result<Vec<Effect>, ClusterError> {
        let node = self
            .nodes
            .get(&snap.node_id)
            .ok_or_else(|| ClusterError::UnknownNode(snap.node_id.clone()))?;
        let updated = monitor::apply_heartbeat(node, snap, now).inspect_err(|e| {
            if matches!(e, monitor::HeartbeatError::StaleSnapshot { .. }) {
                self.diagnostics.stale_snapshots += 1;
            }
        })?;
        self.nodes.insert(snap.node_id.clone(), updated);

        for iid in &snap.running_instances {
            if let Some(p) = self.placements.get_mut(iid) {
                if p.node_id.as_deref() == Some(snap.node_id.as_str())
                    && matches!(p.status, InstanceStatus::Dispatched | InstanceStatus::Migrating)
                {
                    p.status = InstanceStatus::Running;
                }
            }
        }
        let running: Vec<String> = snap.running_instances.iter().cloned().collect();
        Ok(self.reconcile_running(&snap.node_id, &running))
    }

    /// The submit pipeline: validate -> classify -> admit -> place ->
    /// dispatch. On insufficient capacity the workload is queued.
    pub fn submit(
        &mut self,
        spec: WorkloadSpec,
        now: TimestampMs,
    ) -> Result<(SubmitOutcome, Vec<Effect>), SubmitError> {
        let validated =
            validate_workload(spec, &self.config).map_err(SubmitError::ValidationFailed)?;
        if self.workload_active(validated.id()) {
            return Err(SubmitError::DuplicateWorkloadId(validated.id().to_string()));
        }
        self.specs.insert(validated.id().to_string(), validated.clone());

        let rc = classify(&validated, &self.rules);
        let nodes = self.node_list();
        if admitted(&validated, &nodes, &self.config) {
            if let Ok(decision) =
                sched::place(&validated, &rc, &nodes, &self.config, now, PlacementReason::Fresh)
            {
                let effects = self.apply_decision(&decision, &validated, 0);
                return Ok((SubmitOutcome::Placed { decision }, effects));
            }
        }
        self.queue.push(QueueItem { entry: QueueEntry::Fresh(validated), seq: self.queue_seq });
        self.queue_seq += 1;
        Ok((SubmitOutcome::Queued { position: self.queue.len() }, Vec::new()))
    }

    /// Books a fresh placement decision into nodes and placements and emits
    /// the Launch effects.
    fn apply_decision(
        &mut self,
        decision: &PlacementDecision,
        spec: &ValidatedSpec,
        attempt: u32,
    ) -> Vec<Effect> {
        let fp = Footprint { mem_mb: spec.est_mem_mb(), cpu_pct: spec.est_cpu_pct() };
        let mut effects = Vec::new();
        for assignment in &decision.assignments {
            self.placements.insert(
                assignment.instance_id.clone(),
                PlacementInfo {
                    workload_id: decision.workload_id.clone(),
                    node_id: Some(assignment.node_id.clone()),
                    runtime_class: assignment.runtime_class.clone(),
                    status: InstanceStatus::Dispatched,
                    footprint: fp,
                    attempt,
                    priority: spec.priority(),
                },
            );
            self.debit_node(&assignment.node_id, &assignment.instance_id, &fp);
            effects.push(self.launch_effect(&assignment.instance_id));
        }
        self.placement_log.push(decision.clone());
        effects
    }

    fn debit_node(&mut self, node_id: &str, instance_id: &str, fp: &Footprint) {
        if let Some(node) = self.nodes.get_mut(node_id) {
            if node.running_instances.insert(instance_id.to_string()) {
                node.mem_allocated_mb += fp.mem_mb;
                node.cpu_allocated_pct += fp.cpu_pct;
            }
        }
    }

    fn credit_node(&mut self, node_id: &str, instance_id: &str, fp: &Footprint) {
        if let Some(node) = self.nodes.get_mut(node_id) {
            if node.running_instances.remove(instance_id) {
                node.mem_allocated_mb = (node.mem_allocated_mb - fp.mem_mb).max(0.0);
                node.cpu_allocated_pct = (node.cpu_allocated_pct - fp.cpu_pct).max(0.0);
            }
        }
    }

    fn launch_effect(&self, instance_id: &str) -> Effect {
        let p = &self.placements[instance_id];
        let spec = &self.specs[&p.workload_id];
        Effect::Launch {
            node_id: p.node_id.clone().expect("launch effect needs a bound node"),
            request: LaunchRequest {
                instance_id: instance_id.to_string(),
                workload_id: p.workload_id.clone(),
                runtime_class: p.runtime_class.clone(),
                app_class: spec.app_class.clone(),
                payload_ref: spec.payload_ref.clone(),
                profile_override: None,
                seed: derive_seed(self.config.rng_seed, instance_id, p.attempt),
                attempt: p.attempt,
                est_mem_mb: p.footprint.mem_mb,
                est_cpu_pct: p.footprint.cpu_pct,
            },
        }
    }

    /// Appends a metrics report exactly once per (instance_id, attempt).
    /// A report for the instance's current attempt completes or fails it,
    /// frees its capacity, and retries the admission queue.
    pub fn record(&mut self, record: MetricsRecord, attempt: u32, now: TimestampMs) -> (bool, Vec<Effect>) {
        let key = (record.instance_id.clone(), attempt);
        if !self.seen_reports.insert(key) {
            self.diagnostics.duplicate_reports += 1;
            return (false, Vec::new());
        }
        self.metrics_log.push(MetricsLogEntry { record: record.clone(), attempt });

        let transition = self.placements.get(&record.instance_id).is_some_and(|p| {
            p.attempt == attempt
                && p.status.is_active()
                && p.node_id.as_deref() == Some(record.node_id.as_str())
        });
        if !transition {
            return (true, Vec::new());
        }
        let (node_id, fp) = {
            let p = self.placements.get_mut(&record.instance_id).unwrap();
            p.status = if record.outcome.is_success() {
                InstanceStatus::Completed
            } else {
                InstanceStatus::Failed
            };
            (p.node_id.clone().unwrap(), p.footprint)
        };
        self.credit_node(&node_id, &record.instance_id, &fp);
        (true, self.retry_queue(now))
    }

    /// Retries queued entries in priority-then-FIFO order, admitting any that
    /// now fit.
    fn retry_queue(&mut self, now: TimestampMs) -> Vec<Effect> {
        if self.queue.is_empty() {
            return Vec::new();
        }
        let mut order: Vec<usize> = (0..self.queue.len()).collect();
        order.sort_by(|&a, &b| {
            let (ia, ib) = (&self.queue[a], &self.queue[b]);
            ib.entry.priority().cmp(&ia.entry.priority()).then(ia.seq.cmp(&ib.seq))
        });

        let mut effects = Vec::new();
        let mut admitted_idx: BTreeSet<usize> = BTreeSet::new();
        for idx in order {
            let nodes = self.node_list();
            match self.queue[idx].entry.clone() {
                QueueEntry::Fresh(spec) => {
                    if !admitted(&spec, &nodes, &self.config) {
                        continue;
                    }
                    let rc = classify(&spec, &self.rules);
                    if let Ok(decision) = sched::place(
                        &spec,
                        &rc,
                        &nodes,
                        &self.config,
                        now,
                        PlacementReason::DequeuedFromAdmissionQueue,
                    ) {
                        effects.extend(self.apply_decision(&decision, &spec, 0));
                        admitted_idx.insert(idx);
                    }
                }
                QueueEntry::Orphan(orphan) => {
                    let (decisions, unplaced) =
                        sched::requeue_orphans(&[orphan.clone()], &nodes, &self.config, now);
                    if !unplaced.is_empty() {
                        continue;
                    }
                    for decision in decisions {
                        effects.extend(self.apply_orphan_decision(&decision, &orphan));
                    }
                    admitted_idx.insert(idx);
                }
            }
        }
        let mut keep = Vec::with_capacity(self.queue.len() - admitted_idx.len());
        for (idx, item) in core::mem::take(&mut self.queue).into_iter().enumerate() {
            if !admitted_idx.contains(&idx) {
                keep.push(item);
            }
        }
        self.queue = keep;
        effects
    }

    /// Books a single-orphan decision: the instance keeps its id, bumps its
    /// attempt, and dispatches to the new node.
    fn apply_orphan_decision(
        &mut self,
        decision: &PlacementDecision,
        orphan: &OrphanInstance,
    ) -> Vec<Effect> {
        let assignment = &decision.assignments[0];
        let attempt = self
            .placements
            .get(&orphan.instance_id)
            .map(|p| p.attempt + 1)
            .unwrap_or(0);
        self.placements.insert(
            orphan.instance_id.clone(),
            PlacementInfo {
                workload_id: orphan.workload_id.clone(),
                node_id: Some(assignment.node_id.clone()),
                runtime_class: orphan.runtime_class.clone(),
                status: InstanceStatus::Dispatched,
                footprint: orphan.footprint,
                attempt,
                priority: orphan.priority,
            },
        );
        self.debit_node(&assignment.node_id, &orphan.instance_id, &orphan.footprint);
        self.placement_log.push(decision.clone());
        alloc::vec![self.launch_effect(&orphan.instance_id)]
    }

    /// Health sweep: recompute health from heartbeat gaps, orphan the
    /// instances of nodes that just turned Unhealthy, and re-place them on
    /// the remaining workers (or queue them).
    pub fn sweep(&mut self, now: TimestampMs) -> Vec<Effect> {
        let nodes = self.node_list();
        let (updated, orphan_ids) = monitor::sweep_health(&nodes, now, &self.config);
        for node in updated {
            self.nodes.insert(node.node_id.clone(), node);
        }
        if orphan_ids.is_empty() {
            return Vec::new();
        }
        self.diagnostics.orphaned_instances += orphan_ids.len() as u64;

        let mut orphans = Vec::new();
        for iid in &orphan_ids {
            if let Some(p) = self.placements.get_mut(iid) {
                if p.status.is_active() {
                    p.status = InstanceStatus::Queued;
                    p.node_id = None;
                    orphans.push(OrphanInstance {
                        instance_id: iid.clone(),
                        workload_id: p.workload_id.clone(),
                        runtime_class: p.runtime_class.clone(),
                        footprint: p.footprint,
                        priority: p.priority,
                    });
                }
            }
        }

        let nodes = self.node_list();
        let (decisions, unplaced) = sched::requeue_orphans(&orphans, &nodes, &self.config, now);
        let mut effects = Vec::new();
        for decision in &decisions {
            let iid = &decision.assignments[0].instance_id;
            let orphan = orphans.iter().find(|o| &o.instance_id == iid).unwrap().clone();
            effects.extend(self.apply_orphan_decision(decision, &orphan));
        }
        for orphan in unplaced {
            self.queue.push(QueueItem { entry: QueueEntry::Orphan(orphan), seq: self.queue_seq });
            self.queue_seq += 1;
        }
        effects
    }

    /// Count-based rebalance across healthy workers, modeled as
    /// terminate-and-relaunch (instances are stateless tasks).
    pub fn rebalance(&mut self, now: TimestampMs) -> (Vec<Migration>, Vec<Effect>) {
        let footprints: BTreeMap<String, Footprint> = self
            .placements
            .iter()
            .filter(|(_, p)| p.status.is_active())
            .map(|(iid, p)| (iid.clone(), p.footprint))
            .collect();
        let nodes = self.node_list();
        let migrations = sched::rebalance(&nodes, &footprints, &self.config);

        let mut effects = Vec::new();
        for m in &migrations {
            let Some(p) = self.placements.get(&m.instance_id) else { continue };
            let fp = p.footprint;
            let workload_id = p.workload_id.clone();
            let rc = p.runtime_class.clone();
            self.credit_node(&m.from_node, &m.instance_id, &fp);
            effects.push(Effect::Terminate {
                node_id: m.from_node.clone(),
                instance_id: m.instance_id.clone(),
            });
            let p = self.placements.get_mut(&m.instance_id).unwrap();
            p.node_id = Some(m.to_node.clone());
            p.attempt += 1;
            p.status = InstanceStatus::Dispatched;
            self.debit_node(&m.to_node, &m.instance_id, &fp);
            self.placement_log.push(PlacementDecision {
                workload_id,
                assignments: alloc::vec![crate::model::Assignment {
                    instance_id: m.instance_id.clone(),
                    node_id: m.to_node.clone(),
                    runtime_class: rc,
                }],
                decided_at: now,
                reason: PlacementReason::Rebalance,
            });
            effects.push(self.launch_effect(&m.instance_id));
        }
        self.migration_log.extend(migrations.iter().cloned());
        (migrations, effects)
    }

    /// Periodic admission-queue retry (also runs on every capacity release).
    pub fn queue_tick(&mut self, now: TimestampMs) -> Vec<Effect> {
        self.retry_queue(now)
    }

    /// An agent rejected a Launch (Busy or similar): free the booking and
    /// queue the instance for a later retry.
    pub fn launch_rejected(&mut self, instance_id: &str) {
        let Some(p) = self.placements.get_mut(instance_id) else { return };
        if !p.status.is_active() {
            return;
        }
        p.status = InstanceStatus::Queued;
        let node_id = p.node_id.take();
        let orphan = OrphanInstance {
            instance_id: instance_id.to_string(),
            workload_id: p.workload_id.clone(),
            runtime_class: p.runtime_class.clone(),
            footprint: p.footprint,
            priority: p.priority,
        };
        if let Some(node_id) = node_id {
            let fp = orphan.footprint;
            self.credit_node(&node_id, instance_id, &fp);
        }
        self.queue.push(QueueItem { entry: QueueEntry::Orphan(orphan), seq: self.queue_seq });
        self.queue_seq += 1;
    }

    pub fn workload(&self, id: &str) -> Option<WorkloadView> {
        let spec = self.specs.get(id)?.clone();
        let queued = self.queue.iter().any(|item| item.entry.workload_id() == id);
        let instances = self
            .placements
            .iter()
            .filter(|(_, p)| p.workload_id == id)
            .map(|(iid, p)| InstanceView {
                instance_id: iid.clone(),
                node_id: p.node_id.clone(),
                runtime_class: p.runtime_class.clone(),
                status: p.status,
                attempt: p.attempt,
            })
            .collect();
        Some(WorkloadView { spec, queued, instances })
    }

    fn matches(&self, entry: &MetricsLogEntry, filter: &MetricsFilter) -> bool {
        match filter {
            MetricsFilter::All => true,
            MetricsFilter::Workload(id) => entry.record.workload_id == *id,
            MetricsFilter::Flavor(flavor) => entry.record.runtime_class.flavor == *flavor,
            MetricsFilter::Node(node) => entry.record.node_id == *node,
            MetricsFilter::AppClassIs(class) => self
                .specs
                .get(&entry.record.workload_id)
                .is_some_and(|s| s.app_class == *class),
        }
    }

    pub fn records(&self, filter: &MetricsFilter) -> Vec<&MetricsLogEntry> {
        self.metrics_log.iter().filter(|e| self.matches(e, filter)).collect()
    }

    /// Arithmetic over matching Success records; empty match gives count 0
    /// and no means.
    pub fn summarize(&self, filter: &MetricsFilter) -> Summary {
        let matching = self.records(filter);
        let failures = matching.iter().filter(|e| !e.record.outcome.is_success()).count();
        let successes: Vec<&MetricsRecord> = matching
            .iter()
            .filter(|e| e.record.outcome.is_success())
            .map(|e| &e.record)
            .collect();
        let stats = |get: &dyn Fn(&MetricsRecord) -> f64| -> Option<MetricStats> {
            if successes.is_empty() {
                return None;
            }
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for r in &successes {
                let v = get(r);
                sum += v;
                if v < min {
                    min = v;
                }
                if v > max {
                    max = v;
                }
            }
            Some(MetricStats { mean: sum / successes.len() as f64, min, max })
        };
        Summary {
            success_count: successes.len(),
            failure_count: failures,
            cpu_avg_pct: stats(&|r| r.cpu_avg_pct),
            mem_peak_mb: stats(&|r| r.mem_peak_mb),
            proc_time_ms: stats(&|r| r.proc_time_ms),
            boot_ms: stats(&|r| r.boot_ms),
        }
    }

    /// Compares two record sets: memory saving of B relative to A, processing
    /// time delta (B - A), and which side is lighter/faster.
    pub fn compare(
        &self,
        label_a: &str,
        filter_a: &MetricsFilter,
        label_b: &str,
        filter_b: &MetricsFilter,
    ) -> Result<ComparisonReport, CompareError> {
        let side = |label: &str, filter: &MetricsFilter, which: Side| -> Result<SideMeans, CompareError> {
            let successes: Vec<&MetricsLogEntry> = self
                .records(filter)
                .into_iter()
                .filter(|e| e.record.outcome.is_success())
                .collect();
            if successes.is_empty() {
                return Err(CompareError::EmptySet(which));
            }
            let n = successes.len() as f64;
            let mean = |get: &dyn Fn(&MetricsRecord) -> f64| {
                successes.iter().map(|e| get(&e.record)).sum::<f64>() / n
            };
            Ok(SideMeans {
                label: label.to_string(),
                records: successes.len(),
                cpu_avg_pct: mean(&|r| r.cpu_avg_pct),
                mem_peak_mb: mean(&|r| r.mem_peak_mb),
                proc_time_ms: mean(&|r| r.proc_time_ms),
                boot_ms: mean(&|r| r.boot_ms),
            })
        };
        let a = side(label_a, filter_a, Side::A)?;
        let b = side(label_b, filter_b, Side::B)?;
        let saving = mem_saving_pct(a.mem_peak_mb, b.mem_peak_mb)?;
        let delta = b.proc_time_ms - a.proc_time_ms;
        let verdict = verdict_text(&a, &b);
        Ok(ComparisonReport { a, b, mem_saving_pct: saving, proc_time_delta_ms: delta, verdict })
    }
}

fn verdict_text(a: &SideMeans, b: &SideMeans) -> String {
    let lighter = if b.mem_peak_mb < a.mem_peak_mb {
        Some("B")
    } else if a.mem_peak_mb < b.mem_peak_mb {
        Some("A")
    } else {
        None
    };
    let faster = if a.proc_time_ms < b.proc_time_ms {
        Some("A")
    } else if b.proc_time_ms < a.proc_time_ms {
        Some("B")
    } else {
        None
    };
    match (lighter, faster) {
        (None, None) => "A and B equivalent".to_string(),
        (Some(l), None) => format!("{l} lighter, equal time"),
        (None, Some(f)) => format!("equal memory, {f} faster"),
        (Some(l), Some(f)) => format!("{l} lighter, {f} faster"),
    }
}

fn admitted(spec: &ValidatedSpec, nodes: &[NodeState], config: &ClusterConfig) -> bool {
    sched::admit(spec, nodes, config) == Admission::Admit
}
