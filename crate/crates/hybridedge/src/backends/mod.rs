//! Execution backends: the deterministic simulation and the external-process
//! hook, behind one dispatch type the agent drives.

mod process;
mod simulated;

pub use process::{run_process, ProcessBackend, ProcessError, ProcessOutput};
pub use simulated::{epoch_ms, SimulatedBackend};

use std::path::{Path, PathBuf};

use hybridedge_core::calibration::{CalibrationRegistry, UnknownProfile};
use hybridedge_core::kernel::is_detection_class;
use hybridedge_core::model::{AppClass, MetricsRecord, Outcome, TimestampMs};
use hybridedge_core::proto::LaunchRequest;
use hybridedge_core::sampling::{sample_metrics, SampledMetrics};

use crate::kernels;

/// Metrics plus the artifacts one execution produced.
#[derive(Debug, Clone)]
pub struct ExecutionResult {
    pub metrics: MetricsRecord,
    pub artifacts: Vec<(String, PathBuf)>,
}

/// What a simulated execution will cost, decided up front from the
/// calibration profile and the request seed.
#[derive(Debug, Clone, Copy)]
pub struct ExecutionPlan {
    pub metrics: SampledMetrics,
    /// Boot plus processing time, rounded up to whole clock milliseconds.
    pub duration_ms: u64,
}

/// Samples the execution cost for a launch request. The profile override
/// wins; otherwise the registry must know the (flavor, app_class) pair.
pub fn plan_execution(
    req: &LaunchRequest,
    registry: &CalibrationRegistry,
) -> Result<ExecutionPlan, UnknownProfile> {
    let profile = match &req.profile_override {
        Some(p) => p,
        None => registry.profile(&req.runtime_class.flavor, &req.app_class)?,
    };
    let metrics = sample_metrics(profile, req.seed);
    let duration_ms = (metrics.boot_ms + metrics.proc_time_ms).ceil() as u64;
    Ok(ExecutionPlan { metrics, duration_ms })
}

/// Runs the workload kernel for the request and collects artifacts.
/// Detection classes copy the payload under its category name; the stream
/// class aggregates the activity CSV; anything else succeeds without
/// artifacts.
pub fn run_kernels(
    req: &LaunchRequest,
    artifacts_dir: &Path,
) -> (Outcome, Vec<(String, PathBuf)>) {
    if req.app_class == AppClass::StreamAggregate {
        match kernels::run_stream_aggregate(Path::new(&req.payload_ref)).and_then(|report| {
            kernels::write_aggregate_artifact(&report, &req.instance_id, artifacts_dir)
        }) {
            Ok(artifact) => (Outcome::Success, vec![artifact]),
            Err(e) => (Outcome::Failure(e.to_string()), Vec::new()),
        }
    } else if is_detection_class(&req.app_class) {
        match kernels::image_tag(
            Path::new(&req.payload_ref),
            &req.app_class,
            &req.instance_id,
            artifacts_dir,
        ) {
            Ok(artifact) => (Outcome::Success, vec![artifact]),
            Err(e) => (Outcome::Failure(e.to_string()), Vec::new()),
        }
    } else {
        (Outcome::Success, Vec::new())
    }
}

/// Completes a simulated execution: runs the kernel, stamps the sampled
/// metrics with the clock readings, and assembles the record.
pub fn finish_execution(
    req: &LaunchRequest,
    node_id: &str,
    plan: &ExecutionPlan,
    started_at: TimestampMs,
    finished_at: TimestampMs,
    artifacts_dir: &Path,
) -> ExecutionResult {
    let (outcome, artifacts) = run_kernels(req, artifacts_dir);
    ExecutionResult {
        metrics: MetricsRecord {
            instance_id: req.instance_id.clone(),
            workload_id: req.workload_id.clone(),
            node_id: node_id.to_string(),
            runtime_class: req.runtime_class.clone(),
            cpu_avg_pct: plan.metrics.cpu_avg_pct,
            mem_peak_mb: plan.metrics.mem_peak_mb,
            proc_time_ms: plan.metrics.proc_time_ms,
            boot_ms: plan.metrics.boot_ms,
            started_at,
            finished_at,
            outcome,
        },
        artifacts,
    }
}

/// A record for a launch that could not even start (unknown profile, spawn
/// failure before any work happened).
pub fn failed_result(
    req: &LaunchRequest,
    node_id: &str,
    now: TimestampMs,
    reason: String,
) -> ExecutionResult {
    ExecutionResult {
        metrics: MetricsRecord {
            instance_id: req.instance_id.clone(),
            workload_id: req.workload_id.clone(),
            node_id: node_id.to_string(),
            runtime_class: req.runtime_class.clone(),
            cpu_avg_pct: 0.0,
            mem_peak_mb: 0.0,
            proc_time_ms: 0.0,
            boot_ms: 0.0,
            started_at: now,
            finished_at: now,
            outcome: Outcome::Failure(reason),
        },
        artifacts: Vec::new(),
    }
}

/// The backend an agent runs launches on.
#[derive(Debug, Clone)]
pub enum Backend {
    Simulated(SimulatedBackend),
    Process(ProcessBackend),
}

impl Backend {
    pub async fn execute(&self, req: &LaunchRequest, node_id: &str) -> ExecutionResult {
        match self {
            Backend::Simulated(b) => b.execute(req, node_id).await,
            Backend::Process(b) => b.execute(req, node_id).await,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridedge_core::model::RuntimeClass;

    fn request(flavor: &str, app_class: AppClass, seed: u64) -> LaunchRequest {
        LaunchRequest {
            instance_id: "i1".to_string(),
            workload_id: "w1".to_string(),
            runtime_class: if flavor == "unikraft" {
                RuntimeClass::unikernel(flavor)
            } else {
                RuntimeClass::container(flavor)
            },
            app_class,
            payload_ref: "payload".to_string(),
            profile_override: None,
            seed,
            attempt: 0,
            est_mem_mb: 71.0,
            est_cpu_pct: 0.0,
        }
    }

    #[test]
    fn unknown_profile_is_an_error() {
        let registry = CalibrationRegistry::paper_defaults();
        let req = request("xyz", AppClass::StreamAggregate, 0);
        assert!(plan_execution(&req, &registry).is_err());
    }

    #[test]
    fn profile_override_wins_over_the_registry() {
        let registry = CalibrationRegistry::paper_defaults();
        let mut req = request("xyz", AppClass::StreamAggregate, 0);
        req.profile_override =
            Some(hybridedge_core::ResourceProfile::point(0.17, 45.0, 2.05).with_boot_ms(50.0));
        let plan = plan_execution(&req, &registry).unwrap();
        assert_eq!(plan.metrics.cpu_avg_pct, 0.17);
        assert_eq!(plan.metrics.mem_peak_mb, 45.0);
        assert_eq!(plan.duration_ms, 53); // ceil(50 + 2.05)
    }

    #[test]
    fn zero_spread_docker_profile_reproduces_the_calibrated_point() {
        let registry = CalibrationRegistry::paper_defaults();
        let req = request("docker", AppClass::StreamAggregate, 123);
        let plan = plan_execution(&req, &registry).unwrap();
        assert_eq!(plan.metrics.cpu_avg_pct, 0.29);
        assert_eq!(plan.metrics.mem_peak_mb, 71.0);
        assert_eq!(plan.metrics.proc_time_ms, 1.7);
    }

    #[test]
    fn different_seeds_same_metrics_under_zero_spread() {
        let registry = CalibrationRegistry::paper_defaults();
        let a = plan_execution(&request("docker", AppClass::StreamAggregate, 1), &registry).unwrap();
        let b = plan_execution(&request("docker", AppClass::StreamAggregate, 2), &registry).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn kernel_failure_is_reported_in_the_outcome() {
        let dir = tempfile::tempdir().unwrap();
        let mut req = request("docker", AppClass::CarDetect, 0);
        req.payload_ref = "/nonexistent/img.jpg".to_string();
        let (outcome, artifacts) = run_kernels(&req, dir.path());
        assert!(matches!(outcome, Outcome::Failure(_)));
        assert!(artifacts.is_empty());
    }

    #[test]
    fn custom_classes_succeed_without_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let req = request("docker", AppClass::Other("telemetry".to_string()), 0);
        let (outcome, artifacts) = run_kernels(&req, dir.path());
        assert_eq!(outcome, Outcome::Success);
        assert!(artifacts.is_empty());
    }
}
