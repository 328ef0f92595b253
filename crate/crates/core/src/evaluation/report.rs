use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::analysis::PositionBucketReport;
use super::metrics::PrPoint;
use super::sweep::{GridCell, LayerAccuracy};
use super::EvalError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_JSON: &str = "report.json";
pub const GRID_CSV: &str = "grid.csv";
pub const PR_CURVE_CSV: &str = "pr_curve.csv";
pub const BUCKETS_CSV: &str = "buckets.csv";
pub const LAYERS_CSV: &str = "layers.csv";

#[derive(Serialize)]
struct Envelope<'a, T> {
    report_schema: u32,
    engine_version: &'a str,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a schema header, e.g. `kind = "subtask1"`.
pub fn write_report_json<T: Serialize>(path: impl AsRef<Path>, kind: &str, body: &T) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut w,
        &Envelope { report_schema: REPORT_SCHEMA_VERSION, engine_version: crate::ENGINE_VERSION, kind, body },
    )?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = T>) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: layer, theta, precision, recall, f1, tp, fp, fn.
pub fn write_grid_csv(path: impl AsRef<Path>, grid: &[GridCell]) -> Result<(), EvalError> {
    write_rows(path, grid)
}

/// Columns: theta, precision, recall.
pub fn write_pr_csv(path: impl AsRef<Path>, points: &[PrPoint]) -> Result<(), EvalError> {
    write_rows(path, points)
}

/// Columns: index, lower, upper, count, correct, accuracy (empty when absent).
pub fn write_buckets_csv(path: impl AsRef<Path>, report: &PositionBucketReport) -> Result<(), EvalError> {
    write_rows(path, &report.buckets)
}

/// Columns: layer, accuracy, correct, total.
pub fn write_layers_csv(path: impl AsRef<Path>, layers: &[LayerAccuracy]) -> Result<(), EvalError> {
    write_rows(path, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::position_buckets;

    #[test]
    fn files_have_headers_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(BUCKETS_CSV);
        write_buckets_csv(&p, &position_buckets(&[]).unwrap()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,lower,upper,count,correct,accuracy"));
        assert_eq!(lines.next(), Some("0,0.0,0.1,0,0,"));

        let j = dir.path().join(REPORT_JSON);
        write_report_json(&j, "test", &serde_json::json!({"x": 1})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
        assert_eq!(v["report_schema"], 1);
        assert_eq!(v["kind"], "test");
        assert_eq!(v["x"], 1);
    }
}
