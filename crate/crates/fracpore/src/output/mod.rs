//! File outputs: CSV time series, legacy ASCII VTK snapshots, performance
//! report. All writes are atomic (temp file + rename) and deterministic.

mod series;

pub use series::{
    series_row, write_fracture_snapshot_vtk, write_matrix_snapshot_vtk, write_performance_report,
    write_series_csv, SERIES_HEADER,
};

use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` atomically: a sibling temp file is written first
/// and renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
