//! The two workload kernels: stream aggregation over activity records, and
//! the categorized image artifact naming.
//!
//! Detection kernels are stubs with calibrated cost; the system under test is
//! orchestration, not vision. File IO for both kernels lives in the std
//! companion crate.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::model::AppClass;

/// One parsed row of the daily-activity dataset; extra columns are dropped at
/// parse time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityRow {
    pub user_id: String,
    pub total_steps: u64,
}

/// Average steps per user plus the maximum average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_user_mean_steps: BTreeMap<String, f64>,
    pub max_user: String,
    pub max_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("activity dataset is empty")]
    EmptyDataset,
    #[error("malformed activity row at line {0}")]
    MalformedRow(usize),
    #[error("payload `{0}` is not readable")]
    UnreadablePayload(String),
    #[error("app class `{0}` has no image category")]
    UnsupportedAppClass(AppClass),
}

/// Computes the arithmetic mean of TotalSteps per user and the user with the
/// maximum mean (ties break toward the smallest user id).
pub fn stream_aggregate(rows: &[ActivityRow]) -> Result<AggregateReport, KernelError> {
    if rows.is_empty() {
        return Err(KernelError::EmptyDataset);
    }
    let mut sums: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for row in rows {
        let entry = sums.entry(row.user_id.clone()).or_insert((0, 0));
        entry.0 += row.total_steps;
        entry.1 += 1;
    }
    let per_user_mean_steps: BTreeMap<String, f64> = sums
        .iter()
        .map(|(user, (sum, count))| (user.clone(), *sum as f64 / *count as f64))
        .collect();
    // BTreeMap iterates users in ascending order, so keeping a strict
    // greater-than comparison ties toward the smallest id.
    let (max_user, max_mean) = per_user_mean_steps
        .iter()
        .fold((String::new(), f64::NEG_INFINITY), |(bu, bm), (user, mean)| {
            if *mean > bm {
                (user.clone(), *mean)
            } else {
                (bu, bm)
            }
        });
    Ok(AggregateReport { per_user_mean_steps, max_user, max_mean })
}

/// Output category per detection class (Face, Vehicle, Body, Object).
pub fn image_category(app_class: &AppClass) -> Option<&'static str> {
    match app_class {
        AppClass::FaceDetect => Some("Face"),
        AppClass::CarDetect => Some("Vehicle"),
        AppClass::BodyDetect => Some("Body"),
        AppClass::ObjectDetect => Some("Object"),
        _ => None,
    }
}

/// Name of the categorized output artifact: `<Category>_<instance_id>.jpg`.
/// Injective per run: distinct instance ids give distinct names.
pub fn image_artifact_name(app_class: &AppClass, instance_id: &str) -> Result<String, KernelError> {
    let category = image_category(app_class)
        .ok_or_else(|| KernelError::UnsupportedAppClass(app_class.clone()))?;
    Ok(alloc::format!("{category}_{instance_id}.jpg"))
}

/// True when the app class runs the image kernel.
pub fn is_detection_class(app_class: &AppClass) -> bool {
    image_category(app_class).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(user: &str, steps: u64) -> ActivityRow {
        ActivityRow { user_id: user.to_string(), total_steps: steps }
    }

    #[test]
    fn single_row_aggregate() {
        let report = stream_aggregate(&[row("1", 5000)]).unwrap();
        assert_eq!(report.per_user_mean_steps.len(), 1);
        assert_eq!(report.per_user_mean_steps["1"], 5000.0);
        assert_eq!(report.max_user, "1");
        assert_eq!(report.max_mean, 5000.0);
    }

    #[test]
    fn means_and_argmax_over_two_users() {
        let report =
            stream_aggregate(&[row("A", 1000), row("A", 3000), row("B", 2500)]).unwrap();
        assert_eq!(report.per_user_mean_steps["A"], 2000.0);
        assert_eq!(report.per_user_mean_steps["B"], 2500.0);
        assert_eq!(report.max_user, "B");
        assert_eq!(report.max_mean, 2500.0);
    }

    #[test]
    fn argmax_tie_breaks_toward_smallest_user_id() {
        let report = stream_aggregate(&[row("B", 100), row("A", 100)]).unwrap();
        assert_eq!(report.max_user, "A");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(stream_aggregate(&[]), Err(KernelError::EmptyDataset));
    }

    #[test]
    fn categories_match_the_reported_naming() {
        assert_eq!(image_artifact_name(&AppClass::CarDetect, "i7").unwrap(), "Vehicle_i7.jpg");
        assert_eq!(image_artifact_name(&AppClass::FaceDetect, "x").unwrap(), "Face_x.jpg");
        assert_eq!(image_artifact_name(&AppClass::BodyDetect, "x").unwrap(), "Body_x.jpg");
        assert_eq!(image_artifact_name(&AppClass::ObjectDetect, "x").unwrap(), "Object_x.jpg");
    }

    #[test]
    fn stream_class_has_no_image_category() {
        assert!(matches!(
            image_artifact_name(&AppClass::StreamAggregate, "i1"),
            Err(KernelError::UnsupportedAppClass(_))
        ));
    }
}
