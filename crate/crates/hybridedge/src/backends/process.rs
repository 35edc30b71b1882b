//! External-process backend: the hook for real container/unikernel runtimes.
//!
//! The command template expands per launch and runs on the agent host; wall
//! clock is the processing time and peak memory is sampled best-effort from
//! /proc while the child runs. Artifact production is the command's own
//! responsibility.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use hybridedge_core::model::Outcome;
use hybridedge_core::proto::LaunchRequest;

use super::{epoch_ms, ExecutionResult};
use hybridedge_core::model::MetricsRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProcessError {
    #[error("spawn failed: {0}")]
    SpawnFailure(String),
    #[error("command exited with status {0}")]
    NonZeroExit(i32),
    #[error("command exceeded the {0} ms ceiling")]
    Timeout(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOutput {
    pub outcome: Result<(), ProcessError>,
    pub proc_time_ms: f64,
    pub peak_mem_mb: f64,
}

/// Expands `{payload}`, `{instance_id}`, `{workload_id}`, `{app_class}`,
/// `{flavor}`, `{seed}`, and `{attempt}` in every whitespace-separated token.
/// No shell is involved.
pub fn expand_template(template: &str, req: &LaunchRequest) -> Vec<String> {
    template
        .split_whitespace()
        .map(|token| {
            token
                .replace("{payload}", &req.payload_ref)
                .replace("{instance_id}", &req.instance_id)
                .replace("{workload_id}", &req.workload_id)
                .replace("{app_class}", &req.app_class.to_string())
                .replace("{flavor}", &req.runtime_class.flavor)
                .replace("{seed}", &req.seed.to_string())
                .replace("{attempt}", &req.attempt.to_string())
        })
        .collect()
}

#[cfg(target_os = "linux")]
fn vm_hwm_mb(pid: u32) -> Option<f64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

#[cfg(not(target_os = "linux"))]
fn vm_hwm_mb(_pid: u32) -> Option<f64> {
    None
}

/// Spawns the command, waits up to `timeout_ms`, and reports exit status,
/// wall-clock processing time, and best-effort peak memory.
pub async fn run_process(command: &[String], timeout_ms: u64) -> ProcessOutput {
    let start = Instant::now();
    let elapsed_ms = |start: Instant| (start.elapsed().as_secs_f64() * 1000.0).max(f64::MIN_POSITIVE);
    let Some((program, args)) = command.split_first() else {
        return ProcessOutput {
            outcome: Err(ProcessError::SpawnFailure("empty command template".to_string())),
            proc_time_ms: elapsed_ms(start),
            peak_mem_mb: 0.0,
        };
    };
    let mut child = match tokio::process::Command::new(program)
        .args(args)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
    {
        Ok(child) => child,
        Err(e) => {
            return ProcessOutput {
                outcome: Err(ProcessError::SpawnFailure(e.to_string())),
                proc_time_ms: elapsed_ms(start),
                peak_mem_mb: 0.0,
            }
        }
    };
    let pid = child.id();
    let deadline = start + Duration::from_millis(timeout_ms);
    let mut peak_mem_mb: f64 = 0.0;
    let status = loop {
        if Instant::now() >= deadline {
            let _ = child.kill().await;
            return ProcessOutput {
                outcome: Err(ProcessError::Timeout(timeout_ms)),
                proc_time_ms: elapsed_ms(start),
                peak_mem_mb,
            };
        }
        tokio::select! {
            status = child.wait() => break status,
            _ = tokio::time::sleep(Duration::from_millis(10)) => {
                if let Some(pid) = pid {
                    if let Some(mb) = vm_hwm_mb(pid) {
                        peak_mem_mb = peak_mem_mb.max(mb);
                    }
                }
            }
        }
    };
    let proc_time_ms = elapsed_ms(start);
    let outcome = match status {
        Ok(status) if status.success() => Ok(()),
        Ok(status) => Err(ProcessError::NonZeroExit(status.code().unwrap_or(-1))),
        Err(e) => Err(ProcessError::SpawnFailure(e.to_string())),
    };
    ProcessOutput { outcome, proc_time_ms, peak_mem_mb }
}

#[derive(Debug, Clone)]
pub struct ProcessBackend {
    pub command_template: String,
    pub timeout_ms: u64,
    pub artifacts_dir: PathBuf,
}

impl ProcessBackend {
    pub fn new(command_template: String, timeout_ms: u64, artifacts_dir: PathBuf) -> Self {
        ProcessBackend { command_template, timeout_ms, artifacts_dir }
    }

    pub async fn execute(&self, req: &LaunchRequest, node_id: &str) -> ExecutionResult {
        let command = expand_template(&self.command_template, req);
        let started_at = epoch_ms();
        let output = run_process(&command, self.timeout_ms).await;
        let outcome = match output.outcome {
            Ok(()) => Outcome::Success,
            Err(e) => Outcome::Failure(e.to_string()),
        };
        ExecutionResult {
            metrics: MetricsRecord {
                instance_id: req.instance_id.clone(),
                workload_id: req.workload_id.clone(),
                node_id: node_id.to_string(),
                runtime_class: req.runtime_class.clone(),
                cpu_avg_pct: 0.0, // not sampled for external commands
                mem_peak_mb: output.peak_mem_mb,
                proc_time_ms: output.proc_time_ms,
                boot_ms: 0.0,
                started_at,
                finished_at: epoch_ms(),
                outcome,
            },
            artifacts: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridedge_core::model::{AppClass, RuntimeClass};

    fn request() -> LaunchRequest {
        LaunchRequest {
            instance_id: "i1".to_string(),
            workload_id: "w1".to_string(),
            runtime_class: RuntimeClass::container("docker"),
            app_class: AppClass::CarDetect,
            payload_ref: "/tmp/img.jpg".to_string(),
            profile_override: None,
            seed: 7,
            attempt: 2,
            est_mem_mb: 93.0,
            est_cpu_pct: 26.0,
        }
    }

    #[test]
    fn template_expansion_fills_every_placeholder() {
        let cmd = expand_template(
            "run-{flavor} --in {payload} --tag {workload_id}/{instance_id} --seed {seed} --attempt {attempt}",
            &request(),
        );
        assert_eq!(
            cmd,
            vec![
                "run-docker",
                "--in",
                "/tmp/img.jpg",
                "--tag",
                "w1/i1",
                "--seed",
                "7",
                "--attempt",
                "2"
            ]
        );
    }

    #[tokio::test]
    async fn true_succeeds_with_positive_wall_time() {
        let out = run_process(&["true".to_string()], 5000).await;
        assert_eq!(out.outcome, Ok(()));
        assert!(out.proc_time_ms > 0.0);
    }

    #[tokio::test]
    async fn false_is_a_nonzero_exit() {
        let out = run_process(&["false".to_string()], 5000).await;
        assert_eq!(out.outcome, Err(ProcessError::NonZeroExit(1)));
    }

    #[tokio::test]
    async fn missing_binary_is_a_spawn_failure() {
        let out = run_process(&["definitely-not-a-binary-9f2e".to_string()], 5000).await;
        assert!(matches!(out.outcome, Err(ProcessError::SpawnFailure(_))));
    }

    #[tokio::test]
    async fn slow_command_times_out() {
        let out = run_process(&["sleep".to_string(), "5".to_string()], 100).await;
        assert_eq!(out.outcome, Err(ProcessError::Timeout(100)));
        assert!(out.proc_time_ms < 2000.0);
    }
}
