//! File-level drivers for the workload kernels: activity-CSV ingestion for
//! the stream-aggregation kernel and the categorized image copy.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use hybridedge_core::kernel::{
    image_artifact_name, stream_aggregate, ActivityRow, AggregateReport,
};
use hybridedge_core::model::AppClass;

#[derive(Debug, thiserror::Error)]
pub enum KernelIoError {
    #[error("payload `{0}` is not readable: {1}")]
    UnreadablePayload(String, std::io::Error),
    #[error("malformed activity row at line {0}")]
    MalformedRow(usize),
    #[error("activity data has no `Id` or `TotalSteps` column")]
    MissingColumns,
    #[error("activity dataset is empty")]
    EmptyDataset,
    #[error("app class `{0}` has no image category")]
    UnsupportedAppClass(AppClass),
    #[error("cannot write artifact `{0}`: {1}")]
    ArtifactWrite(PathBuf, std::io::Error),
}

/// Parses the daily-activity CSV schema: a header row with at least Id,
/// ActivityDate, TotalSteps, TotalDistance, and Calories; extra columns are
/// ignored and TotalSteps must parse as a non-negative integer. Line numbers
/// in errors are 1-based and count the header.
pub fn parse_activity_csv<R: Read>(reader: R) -> Result<Vec<ActivityRow>, KernelIoError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv_reader.headers().map_err(|_| KernelIoError::MissingColumns)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(id_col), Some(steps_col)) = (col("Id"), col("TotalSteps")) else {
        return Err(KernelIoError::MissingColumns);
    };

    let mut rows = Vec::new();
    for (idx, result) in csv_reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = result.map_err(|_| KernelIoError::MalformedRow(line))?;
        let user_id = record
            .get(id_col)
            .filter(|s| !s.trim().is_empty())
            .ok_or(KernelIoError::MalformedRow(line))?
            .trim()
            .to_string();
        let total_steps: u64 = record
            .get(steps_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or(KernelIoError::MalformedRow(line))?;
        rows.push(ActivityRow { user_id, total_steps });
    }
    Ok(rows)
}

/// Runs the stream-aggregation kernel over an activity CSV file.
pub fn run_stream_aggregate(payload_ref: &Path) -> Result<AggregateReport, KernelIoError> {
    let file = fs::File::open(payload_ref)
        .map_err(|e| KernelIoError::UnreadablePayload(payload_ref.display().to_string(), e))?;
    let rows = parse_activity_csv(file)?;
    stream_aggregate(&rows).map_err(|_| KernelIoError::EmptyDataset)
}

/// Writes the aggregate report artifact for one instance; returns
/// (artifact name, path).
pub fn write_aggregate_artifact(
    report: &AggregateReport,
    instance_id: &str,
    out_dir: &Path,
) -> Result<(String, PathBuf), KernelIoError> {
    let name = format!("aggregate_{instance_id}.json");
    let path = out_dir.join(&name);
    fs::create_dir_all(out_dir)
        .and_then(|()| fs::write(&path, serde_json::to_vec_pretty(report).expect("report serializes")))
        .map_err(|e| KernelIoError::ArtifactWrite(path.clone(), e))?;
    Ok((name, path))
}

/// The image kernel stub: copies the payload bytes to
/// `<Category>_<instance_id>.jpg` in the output directory. No actual
/// detection runs; the cost model is calibrated instead.
pub fn image_tag(
    payload_ref: &Path,
    app_class: &AppClass,
    instance_id: &str,
    out_dir: &Path,
) -> Result<(String, PathBuf), KernelIoError> {
    let name = image_artifact_name(app_class, instance_id)
        .map_err(|_| KernelIoError::UnsupportedAppClass(app_class.clone()))?;
    let bytes = fs::read(payload_ref)
        .map_err(|e| KernelIoError::UnreadablePayload(payload_ref.display().to_string(), e))?;
    let path = out_dir.join(&name);
    fs::create_dir_all(out_dir)
        .and_then(|()| fs::write(&path, bytes))
        .map_err(|e| KernelIoError::ArtifactWrite(path.clone(), e))?;
    Ok((name, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Id,ActivityDate,TotalSteps,TotalDistance,Calories\n\
        1503960366,4/12/2016,13162,8.5,1985\n\
        1503960366,4/13/2016,10735,6.97,1797\n\
        1624580081,4/12/2016,8163,5.31,1432\n";

    #[test]
    fn parses_the_documented_schema() {
        let rows = parse_activity_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].user_id, "1503960366");
        assert_eq!(rows[0].total_steps, 13162);
    }

    #[test]
    fn extra_columns_are_ignored() {
        let data = "Id,ActivityDate,TotalSteps,TotalDistance,Calories,Mood\n\
            u1,1/1/2020,100,0.1,50,happy\n";
        let rows = parse_activity_csv(data.as_bytes()).unwrap();
        assert_eq!(rows[0].total_steps, 100);
    }

    #[test]
    fn negative_steps_are_malformed_with_line_number() {
        let data = "Id,ActivityDate,TotalSteps,TotalDistance,Calories\n\
            u1,1/1/2020,100,0.1,50\n\
            u2,1/2/2020,-5,0.1,50\n";
        match parse_activity_csv(data.as_bytes()) {
            Err(KernelIoError::MalformedRow(3)) => {}
            other => panic!("expected MalformedRow(3), got {other:?}"),
        }
    }

    #[test]
    fn missing_required_columns_is_an_error() {
        let data = "User,Steps\nu1,100\n";
        assert!(matches!(parse_activity_csv(data.as_bytes()), Err(KernelIoError::MissingColumns)));
    }

    #[test]
    fn aggregate_driver_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("daily.csv");
        fs::write(&csv_path, SAMPLE).unwrap();
        let report = run_stream_aggregate(&csv_path).unwrap();
        assert_eq!(report.per_user_mean_steps["1503960366"], (13162.0 + 10735.0) / 2.0);
        assert_eq!(report.max_user, "1503960366");
        let (name, path) = write_aggregate_artifact(&report, "s1-0", dir.path()).unwrap();
        assert_eq!(name, "aggregate_s1-0.json");
        assert!(path.exists());
    }

    #[test]
    fn missing_payload_is_unreadable() {
        assert!(matches!(
            run_stream_aggregate(Path::new("/nonexistent/daily.csv")),
            Err(KernelIoError::UnreadablePayload(..))
        ));
    }

    #[test]
    fn image_tag_copies_bytes_under_the_category_name() {
        let dir = tempfile::tempdir().unwrap();
        let payload = dir.path().join("img.jpg");
        fs::write(&payload, b"jpegbytes").unwrap();
        let (name, path) =
            image_tag(&payload, &AppClass::CarDetect, "i7", dir.path()).unwrap();
        assert_eq!(name, "Vehicle_i7.jpg");
        assert_eq!(fs::read(path).unwrap(), b"jpegbytes");
    }

    #[test]
    fn image_tag_rejects_non_detection_classes() {
        let dir = tempfile::tempdir().unwrap();
        let payload = dir.path().join("img.jpg");
        fs::write(&payload, b"x").unwrap();
        assert!(matches!(
            image_tag(&payload, &AppClass::StreamAggregate, "i1", dir.path()),
            Err(KernelIoError::UnsupportedAppClass(_))
        ));
        assert!(matches!(
            image_tag(Path::new("/nonexistent.jpg"), &AppClass::CarDetect, "i1", dir.path()),
            Err(KernelIoError::UnreadablePayload(..))
        ));
    }
}
