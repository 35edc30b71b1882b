//! Calibration-driven simulated backend for live (wall-clock) agents.
//!
//! The scenario harness does not use this type: it drives the same
//! [`plan_execution`]/[`finish_execution`] pair on its virtual clock instead.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use hybridedge_core::calibration::CalibrationRegistry;
use hybridedge_core::model::TimestampMs;
use hybridedge_core::proto::LaunchRequest;

use super::{failed_result, finish_execution, plan_execution, ExecutionResult};

pub fn epoch_ms() -> TimestampMs {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    registry: Arc<CalibrationRegistry>,
    /// Real-time divisor: simulated durations sleep duration/time_scale.
    time_scale: f64,
    artifacts_dir: PathBuf,
}

impl SimulatedBackend {
    pub fn new(registry: CalibrationRegistry, time_scale: f64, artifacts_dir: PathBuf) -> Self {
        SimulatedBackend {
            registry: Arc::new(registry),
            time_scale: if time_scale > 0.0 { time_scale } else { 1.0 },
            artifacts_dir,
        }
    }

    pub async fn execute(&self, req: &LaunchRequest, node_id: &str) -> ExecutionResult {
        let plan = match plan_execution(req, &self.registry) {
            Ok(plan) => plan,
            Err(e) => return failed_result(req, node_id, epoch_ms(), e.to_string()),
        };
        let started_at = epoch_ms();
        let scaled = Duration::from_secs_f64(plan.duration_ms as f64 / 1000.0 / self.time_scale);
        tokio::time::sleep(scaled).await;
        finish_execution(req, node_id, &plan, started_at, epoch_ms(), &self.artifacts_dir)
    }
}
