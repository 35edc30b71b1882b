//! Shared domain types, validation, and the arithmetic helpers every other
//! module uses.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Milliseconds on whatever clock drives the cluster (virtual in scenarios,
/// UNIX epoch in a live deployment).
pub type TimestampMs = u64;

/// What kind of payload a workload carries. Anything that is not an image or
/// a stream is a named custom kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PayloadKind {
    Image,
    Stream,
    Custom(String),
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadKind::Image => f.write_str("image"),
            PayloadKind::Stream => f.write_str("stream"),
            PayloadKind::Custom(name) => f.write_str(name),
        }
    }
}

impl FromStr for PayloadKind {
    type Err = core::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "image" => PayloadKind::Image,
            "stream" => PayloadKind::Stream,
            other => PayloadKind::Custom(other.to_string()),
        })
    }
}

/// Application class of a workload; drives classification, calibration
/// lookup, and kernel selection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AppClass {
    FaceDetect,
    CarDetect,
    BodyDetect,
    ObjectDetect,
    StreamAggregate,
    Other(String),
}

impl AppClass {
    /// The classes shipped with calibration defaults.
    pub const DEFAULTS: [AppClass; 5] = [
        AppClass::FaceDetect,
        AppClass::CarDetect,
        AppClass::BodyDetect,
        AppClass::ObjectDetect,
        AppClass::StreamAggregate,
    ];
}

impl fmt::Display for AppClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppClass::FaceDetect => f.write_str("face-detect"),
            AppClass::CarDetect => f.write_str("car-detect"),
            AppClass::BodyDetect => f.write_str("body-detect"),
            AppClass::ObjectDetect => f.write_str("object-detect"),
            AppClass::StreamAggregate => f.write_str("stream-aggregate"),
            AppClass::Other(name) => f.write_str(name),
        }
    }
}

impl FromStr for AppClass {
    type Err = core::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "face-detect" => AppClass::FaceDetect,
            "car-detect" => AppClass::CarDetect,
            "body-detect" => AppClass::BodyDetect,
            "object-detect" => AppClass::ObjectDetect,
            "stream-aggregate" => AppClass::StreamAggregate,
            other => AppClass::Other(other.to_string()),
        })
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(|_| D::Error::custom("unreachable"))
            }
        }
    };
}

string_serde!(PayloadKind);
string_serde!(AppClass);

/// Container-vs-unikernel decision target.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeKind {
    Container,
    Unikernel,
}

impl fmt::Display for RuntimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuntimeKind::Container => f.write_str("container"),
            RuntimeKind::Unikernel => f.write_str("unikernel"),
        }
    }
}

/// A runtime kind plus a concrete flavor ("docker", "unikraft", ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuntimeClass {
    pub kind: RuntimeKind,
    pub flavor: String,
}

impl RuntimeClass {
    pub fn container(flavor: &str) -> Self {
        RuntimeClass { kind: RuntimeKind::Container, flavor: flavor.to_string() }
    }

    pub fn unikernel(flavor: &str) -> Self {
        RuntimeClass { kind: RuntimeKind::Unikernel, flavor: flavor.to_string() }
    }
}

impl fmt::Display for RuntimeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.flavor)
    }
}

/// A submitted task: payload kind, application class, resource estimate,
/// instance count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub id: String,
    pub payload_kind: PayloadKind,
    /// Path or URI to the input data.
    pub payload_ref: String,
    pub app_class: AppClass,
    /// Estimated memory demand per instance; filled from config defaults when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_mem_mb: Option<f64>,
    /// Estimated CPU demand per instance, percent of one core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub est_cpu_pct: Option<f64>,
    #[serde(default = "default_instances")]
    pub instances: u32,
    /// Higher is scheduled first when queued.
    #[serde(default)]
    pub priority: i32,
}

fn default_instances() -> u32 {
    1
}

impl WorkloadSpec {
    /// Minimal spec with per-field defaults; handy for tests and the CLI.
    pub fn new(id: &str, payload_kind: PayloadKind, payload_ref: &str, app_class: AppClass) -> Self {
        WorkloadSpec {
            id: id.to_string(),
            payload_kind,
            payload_ref: payload_ref.to_string(),
            app_class,
            est_mem_mb: None,
            est_cpu_pct: None,
            instances: 1,
            priority: 0,
        }
    }
}

/// A `WorkloadSpec` that passed validation: defaults are filled in and the
/// invariants hold. Obtained only through [`validate_workload`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedSpec(WorkloadSpec);

impl ValidatedSpec {
    pub fn spec(&self) -> &WorkloadSpec {
        &self.0
    }

    pub fn id(&self) -> &str {
        &self.0.id
    }

    pub fn est_mem_mb(&self) -> f64 {
        self.0.est_mem_mb.unwrap_or(0.0)
    }

    pub fn est_cpu_pct(&self) -> f64 {
        self.0.est_cpu_pct.unwrap_or(0.0)
    }

    pub fn instances(&self) -> u32 {
        self.0.instances
    }

    pub fn priority(&self) -> i32 {
        self.0.priority
    }
}

impl core::ops::Deref for ValidatedSpec {
    type Target = WorkloadSpec;

    fn deref(&self) -> &WorkloadSpec {
        &self.0
    }
}

/// One violated `WorkloadSpec` invariant; each names the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "violation", content = "field")]
pub enum Violation {
    #[error("workload id must not be empty")]
    EmptyId,
    #[error("instances must be >= 1")]
    ZeroInstances,
    #[error("estimate `{0}` must be >= 0")]
    NegativeEstimate(String),
}

/// The calibrated cost model of one (flavor, app_class) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceProfile {
    pub cpu_pct_mean: f64,
    pub cpu_pct_spread: f64,
    pub mem_mb_mean: f64,
    pub mem_mb_spread: f64,
    pub proc_time_ms_mean: f64,
    pub proc_time_ms_spread: f64,
    pub boot_ms: f64,
}

impl ResourceProfile {
    /// Point profile with zero spread and zero boot cost.
    pub fn point(cpu_pct: f64, mem_mb: f64, proc_time_ms: f64) -> Self {
        ResourceProfile {
            cpu_pct_mean: cpu_pct,
            cpu_pct_spread: 0.0,
            mem_mb_mean: mem_mb,
            mem_mb_spread: 0.0,
            proc_time_ms_mean: proc_time_ms,
            proc_time_ms_spread: 0.0,
            boot_ms: 0.0,
        }
    }

    pub fn with_boot_ms(mut self, boot_ms: f64) -> Self {
        self.boot_ms = boot_ms;
        self
    }

    /// Checks the profile invariants: spreads non-negative, memory and time
    /// means strictly positive, cpu mean non-negative.
    pub fn validate(&self) -> Result<(), String> {
        if self.cpu_pct_spread < 0.0 || self.mem_mb_spread < 0.0 || self.proc_time_ms_spread < 0.0 {
            return Err("spread values must be >= 0".to_string());
        }
        if self.mem_mb_mean <= 0.0 {
            return Err("mem_mb_mean must be > 0".to_string());
        }
        if self.proc_time_ms_mean <= 0.0 {
            return Err("proc_time_ms_mean must be > 0".to_string());
        }
        if self.cpu_pct_mean < 0.0 {
            return Err("cpu_pct_mean must be >= 0".to_string());
        }
        if self.boot_ms < 0.0 {
            return Err("boot_ms must be >= 0".to_string());
        }
        Ok(())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Manager,
    Worker,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum NodeHealth {
    Healthy,
    Suspect,
    Unhealthy,
}

/// A worker's capacity, allocations, running instances, and heartbeat health
/// as the manager sees them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub node_id: String,
    pub role: NodeRole,
    pub cpu_cores: u32,
    pub mem_capacity_mb: f64,
    pub mem_allocated_mb: f64,
    /// Sum of instance estimates; 100 = one full core.
    pub cpu_allocated_pct: f64,
    pub running_instances: BTreeSet<String>,
    pub last_heartbeat: TimestampMs,
    /// `sent_at` of the last applied snapshot; used to discard stale ones.
    #[serde(default)]
    pub last_snapshot_at: Option<TimestampMs>,
    pub health: NodeHealth,
}

impl NodeState {
    /// Worker with the default capacity of the reference hardware: quad core,
    /// 4096 MB.
    pub fn worker(node_id: &str, now: TimestampMs) -> Self {
        NodeState::with_capacity(node_id, 4096.0, 4, now)
    }

    pub fn with_capacity(node_id: &str, mem_capacity_mb: f64, cpu_cores: u32, now: TimestampMs) -> Self {
        NodeState {
            node_id: node_id.to_string(),
            role: NodeRole::Worker,
            cpu_cores,
            mem_capacity_mb,
            mem_allocated_mb: 0.0,
            cpu_allocated_pct: 0.0,
            running_instances: BTreeSet::new(),
            last_heartbeat: now,
            last_snapshot_at: None,
            health: NodeHealth::Healthy,
        }
    }

    pub fn free_mem_mb(&self) -> f64 {
        self.mem_capacity_mb - self.mem_allocated_mb
    }

    /// Total CPU budget in percent-of-one-core units (4 cores -> 400).
    pub fn cpu_budget_pct(&self) -> f64 {
        100.0 * self.cpu_cores as f64
    }

    pub fn free_cpu_pct(&self) -> f64 {
        self.cpu_budget_pct() - self.cpu_allocated_pct
    }
}

/// Why a placement was made.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementReason {
    Fresh,
    Rebalance,
    RequeueAfterFailure,
    DequeuedFromAdmissionQueue,
}

/// One instance bound to a node under a runtime class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub instance_id: String,
    pub node_id: String,
    pub runtime_class: RuntimeClass,
}

/// The scheduler's binding of a workload's instances to (node, runtime class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub workload_id: String,
    pub assignments: Vec<Assignment>,
    pub decided_at: TimestampMs,
    pub reason: PlacementReason,
}

/// Terminal outcome of one instance execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Failure(String),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }
}

/// Per-instance resource usage and timing; the unit of all reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub instance_id: String,
    pub workload_id: String,
    pub node_id: String,
    pub runtime_class: RuntimeClass,
    pub cpu_avg_pct: f64,
    pub mem_peak_mb: f64,
    pub proc_time_ms: f64,
    pub boot_ms: f64,
    pub started_at: TimestampMs,
    pub finished_at: TimestampMs,
    pub outcome: Outcome,
}

impl MetricsRecord {
    /// Checks the record invariants: finished_at >= started_at, all numeric
    /// metrics >= 0.
    pub fn validate(&self) -> Result<(), String> {
        if self.finished_at < self.started_at {
            return Err("finished_at must be >= started_at".to_string());
        }
        if self.cpu_avg_pct < 0.0
            || self.mem_peak_mb < 0.0
            || self.proc_time_ms < 0.0
            || self.boot_ms < 0.0
        {
            return Err("numeric metrics must be >= 0".to_string());
        }
        Ok(())
    }
}

/// Cluster-wide tunables. The paper names no thresholds; these defaults are
/// the artifact's, every one overridable via the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub heartbeat_interval_ms: u64,
    pub missed_heartbeats_suspect: u32,
    pub missed_heartbeats_unhealthy: u32,
    /// Instance-count delta tolerated between the most and least loaded
    /// workers before rebalancing kicks in.
    pub rebalance_threshold: u32,
    pub weight_mem: f64,
    pub weight_cpu: f64,
    pub rng_seed: u64,
    /// Real-time divisor for simulated durations; `None` means the fully
    /// virtual clock of the scenario harness.
    pub time_scale: Option<f64>,
    /// Admission-queue retry cadence (also retried on every capacity release).
    pub queue_tick_ms: u64,
    /// Whether the manager node also accepts workloads.
    pub manager_schedulable: bool,
    /// Per-app-class memory demand assumed when a spec carries no estimate.
    pub default_est_mem_mb: BTreeMap<AppClass, f64>,
    /// Demand assumed for app classes missing from the table above.
    pub fallback_est_mem_mb: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let mut default_est_mem_mb = BTreeMap::new();
        default_est_mem_mb.insert(AppClass::FaceDetect, 93.0);
        default_est_mem_mb.insert(AppClass::CarDetect, 93.0);
        default_est_mem_mb.insert(AppClass::BodyDetect, 82.0);
        default_est_mem_mb.insert(AppClass::ObjectDetect, 200.0);
        default_est_mem_mb.insert(AppClass::StreamAggregate, 71.0);
        ClusterConfig {
            heartbeat_interval_ms: 1000,
            missed_heartbeats_suspect: 2,
            missed_heartbeats_unhealthy: 3,
            rebalance_threshold: 1,
            weight_mem: 0.7,
            weight_cpu: 0.3,
            rng_seed: 42,
            time_scale: None,
            queue_tick_ms: 1000,
            manager_schedulable: false,
            default_est_mem_mb,
            fallback_est_mem_mb: 128.0,
        }
    }
}

impl ClusterConfig {
    /// Memory demand default for one app class.
    pub fn default_mem_for(&self, app_class: &AppClass) -> f64 {
        self.default_est_mem_mb
            .get(app_class)
            .copied()
            .unwrap_or(self.fallback_est_mem_mb)
    }

    pub fn suspect_gap_ms(&self) -> u64 {
        self.heartbeat_interval_ms * self.missed_heartbeats_suspect as u64
    }

    pub fn unhealthy_gap_ms(&self) -> u64 {
        self.heartbeat_interval_ms * self.missed_heartbeats_unhealthy as u64
    }

    /// Checks the per-field invariants stated for the config.
    pub fn validate(&self) -> Result<(), String> {
        if self.heartbeat_interval_ms == 0 {
            return Err("heartbeat_interval_ms must be > 0".to_string());
        }
        if self.missed_heartbeats_suspect == 0
            || self.missed_heartbeats_unhealthy < self.missed_heartbeats_suspect
        {
            return Err("missed-heartbeat thresholds must satisfy 1 <= suspect <= unhealthy".to_string());
        }
        if self.rebalance_threshold == 0 {
            return Err("rebalance_threshold must be >= 1".to_string());
        }
        if self.weight_mem < 0.0 || self.weight_cpu < 0.0 {
            return Err("scheduler weights must be >= 0".to_string());
        }
        if self.weight_mem + self.weight_cpu <= 0.0 {
            return Err("weight_mem + weight_cpu must be > 0".to_string());
        }
        if self.queue_tick_ms == 0 {
            return Err("queue_tick_ms must be > 0".to_string());
        }
        Ok(())
    }
}

/// Errors from the arithmetic helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MathError {
    #[error("baseline must be > 0")]
    NonPositiveBaseline,
    #[error("node capacity fields must be > 0")]
    ZeroCapacity,
}

/// Validates a spec against its invariants and fills defaults (memory demand
/// from the per-app-class table). Returns every violated invariant, not just
/// the first. Idempotent: a `ValidatedSpec` re-validates to itself.
pub fn validate_workload(
    spec: WorkloadSpec,
    config: &ClusterConfig,
) -> Result<ValidatedSpec, Vec<Violation>> {
    let mut violations = Vec::new();
    if spec.id.is_empty() {
        violations.push(Violation::EmptyId);
    }
    if spec.instances == 0 {
        violations.push(Violation::ZeroInstances);
    }
    if spec.est_mem_mb.is_some_and(|v| v < 0.0) {
        violations.push(Violation::NegativeEstimate("est_mem_mb".to_string()));
    }
    if spec.est_cpu_pct.is_some_and(|v| v < 0.0) {
        violations.push(Violation::NegativeEstimate("est_cpu_pct".to_string()));
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut filled = spec;
    if filled.est_mem_mb.is_none() {
        filled.est_mem_mb = Some(config.default_mem_for(&filled.app_class));
    }
    if filled.est_cpu_pct.is_none() {
        filled.est_cpu_pct = Some(0.0);
    }
    Ok(ValidatedSpec(filled))
}

/// Relative memory saving of `alternative` over `baseline`, in percent:
/// (baseline - alternative) / baseline * 100. Negative when the alternative
/// is heavier.
pub fn mem_saving_pct(baseline_mb: f64, alternative_mb: f64) -> Result<f64, MathError> {
    if baseline_mb <= 0.0 {
        return Err(MathError::NonPositiveBaseline);
    }
    Ok((baseline_mb - alternative_mb) / baseline_mb * 100.0)
}

/// Fractions of the node's CPU and memory budget currently allocated, each
/// clamped to [0, 1]. Returned as (cpu_fraction, mem_fraction).
pub fn node_utilization(node: &NodeState) -> Result<(f64, f64), MathError> {
    if node.mem_capacity_mb <= 0.0 || node.cpu_cores == 0 {
        return Err(MathError::ZeroCapacity);
    }
    let mem = (node.mem_allocated_mb / node.mem_capacity_mb).clamp(0.0, 1.0);
    let cpu = (node.cpu_allocated_pct / node.cpu_budget_pct()).clamp(0.0, 1.0);
    Ok((cpu, mem))
}
