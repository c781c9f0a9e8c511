//! CSV tables and JSON manifests, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::{Error, Result};

/// A row type that knows its CSV layout.
pub trait TableRow {
    fn header() -> &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

/// Rows of one experiment plus the seed that reproduces them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult<R> {
    pub experiment: &'static str,
    pub seed: u64,
    pub rows: Vec<R>,
}

/// 17 significant digits, `.` decimal separator.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Absent values are written as empty fields.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl<R: TableRow> ExperimentResult<R> {
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(R::header())?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub version: &'static str,
    pub seed: u64,
    pub replicates: usize,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub rows: usize,
    pub csv: String,
    pub config: &'a ExperimentConfig,
}

/// Write every `(path, bytes)` pair through a temporary sibling, renaming only
/// after all temporaries are complete.
pub fn write_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        ));
        let result = fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        });
        if let Err(e) = result {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(&tmp, e));
        }
        staged.push((tmp, path.clone()));
    }
    for (tmp, path) in &staged {
        fs::rename(tmp, path).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cleanup(staged: &[(PathBuf, PathBuf)]) {
    for (tmp, _) in staged {
        let _ = fs::remove_file(tmp);
    }
}

/// `<dir>/<experiment>.csv` and `<dir>/<experiment>.manifest.json`.
pub fn write_result<R: TableRow>(
    dir: &Path,
    result: &ExperimentResult<R>,
    config: &ExperimentConfig,
    workers: usize,
    wall_time_seconds: f64,
) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(format!("{}.csv", result.experiment));
    let manifest_path = dir.join(format!("{}.manifest.json", result.experiment));
    let manifest = Manifest {
        experiment: result.experiment,
        version: env!("CARGO_PKG_VERSION"),
        seed: result.seed,
        replicates: config.replicates,
        workers,
        wall_time_seconds,
        rows: result.rows.len(),
        csv: format!("{}.csv", result.experiment),
        config,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&[
        (csv_path.clone(), result.to_csv_bytes()?),
        (manifest_path.clone(), json),
    ])?;
    Ok((csv_path, manifest_path))
}
