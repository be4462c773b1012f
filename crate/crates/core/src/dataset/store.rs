//! On-disk layout: `manifest.json` beside `rows.json`.
//!
//! `rows.json` holds `{"train": [...], "val": [...]}` where each record is
//! `{label, true_len, rows}` with only the first `true_len` rows stored;
//! padding is restored on load from the manifest's `max_seq_len`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stroke::Stroke5Row;

use super::{BuildReport, Dataset, DatasetConfig, DatasetError, TrainingExample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Examples kept, train plus validation.
    pub count: usize,
    pub offset_scale: f64,
    pub dropped: usize,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub report: BuildReport,
    pub config: DatasetConfig,
}

#[derive(Serialize, Deserialize)]
struct Record {
    label: String,
    true_len: usize,
    rows: Vec<Stroke5Row>,
}

#[derive(Serialize, Deserialize)]
struct Rows {
    train: Vec<Record>,
    val: Vec<Record>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ROWS_FILE: &str = "rows.json";

fn store_err(e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Store(e.to_string())
}

pub fn write_dataset(dir: impl AsRef<Path>, data: &Dataset) -> Result<Manifest, DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        count: data.train.len() + data.val.len(),
        offset_scale: data.offset_scale,
        dropped: data.report.dropped(),
        seed: data.config.seed,
        train: data.train.len(),
        val: data.val.len(),
        report: data.report.clone(),
        config: data.config.clone(),
    };
    let records = |v: &[TrainingExample]| {
        v.iter()
            .map(|e| Record {
                label: e.label.clone(),
                true_len: e.true_len,
                rows: e.sequence().to_vec(),
            })
            .collect()
    };
    let rows = Rows {
        train: records(&data.train),
        val: records(&data.val),
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).map_err(store_err)?,
    )?;
    fs::write(
        dir.join(ROWS_FILE),
        serde_json::to_string(&rows).map_err(store_err)?,
    )?;
    Ok(manifest)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?).map_err(store_err)?;
    let rows: Rows =
        serde_json::from_str(&fs::read_to_string(dir.join(ROWS_FILE))?).map_err(store_err)?;
    let max_len = manifest.config.max_seq_len;
    let restore = |records: Vec<Record>| -> Result<Vec<TrainingExample>, DatasetError> {
        records
            .into_iter()
            .map(|r| {
                if r.rows.len() != r.true_len || r.true_len > max_len {
                    return Err(store_err(format!(
                        "record {:?} has {} rows, true_len {}, max {max_len}",
                        r.label,
                        r.rows.len(),
                        r.true_len
                    )));
                }
                let mut padded = r.rows;
                padded.resize(max_len, Stroke5Row::END);
                Ok(TrainingExample {
                    rows: padded,
                    true_len: r.true_len,
                    label: r.label,
                })
            })
            .collect()
    };
    let train = restore(rows.train)?;
    let val = restore(rows.val)?;
    if train.len() != manifest.train || val.len() != manifest.val {
        return Err(store_err("row store does not match manifest counts"));
    }
    Ok(Dataset {
        train,
        val,
        offset_scale: manifest.offset_scale,
        report: manifest.report,
        config: manifest.config,
    })
}
