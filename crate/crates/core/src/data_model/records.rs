use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// In-distribution and mean shifted accuracy of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRecord {
    pub model_id: String,
    pub acc_in: f64,
    pub acc_shift: f64,
    pub per_shift: Option<BTreeMap<String, f64>>,
}

impl AccuracyRecord {
    pub fn new(model_id: impl Into<String>, acc_in: f64, acc_shift: f64) -> Result<Self> {
        let model_id = model_id.into();
        for (what, v) in [("acc_in", acc_in), ("acc_shift", acc_shift)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InfiniteLogit {
                    what: format!("{what} of '{model_id}'"),
                    value: v,
                });
            }
        }
        Ok(Self {
            model_id,
            acc_in,
            acc_shift,
            per_shift: None,
        })
    }
}

#[derive(Deserialize)]
struct Row {
    model_id: String,
    acc_in: f64,
    acc_shift: f64,
}

/// Reads a baseline pool CSV with columns `model_id,acc_in,acc_shift`.
/// Extra columns are ignored.
pub fn load_baselines(path: &Path) -> Result<Vec<AccuracyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1)))?;
            AccuracyRecord::new(row.model_id, row.acc_in, row.acc_shift)
        })
        .collect()
}
