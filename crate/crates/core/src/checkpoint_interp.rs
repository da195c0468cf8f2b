//! Weight-space interpolation between two checkpoints and assembly of
//! per-alpha reports into one sweep table.

use std::collections::BTreeSet;

use crate::data_model::report::{Cell, Metric, ReportDocument, Table};
use crate::data_model::{CheckpointTensorMap, Tensor};
use crate::error::{Error, Result};

/// Default alpha grid, 0.0 to 1.0 in steps of 0.1.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSpec {
    pub alpha: f64,
    pub theta0_id: String,
    pub theta1_id: String,
}

impl InterpolationSpec {
    pub fn new(alpha: f64, theta0_id: impl Into<String>, theta1_id: impl Into<String>) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            theta0_id: theta0_id.into(),
            theta1_id: theta1_id.into(),
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Validation(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Elementwise `(1 - alpha) * theta0 + alpha * theta1` for every tensor.
///
/// The output keeps `theta0`'s on-disk precision per tensor.
pub fn interpolate(
    theta0: &CheckpointTensorMap,
    theta1: &CheckpointTensorMap,
    alpha: f64,
) -> Result<CheckpointTensorMap> {
    check_alpha(alpha)?;
    let (names0, names1) = (theta0.names(), theta1.names());
    if names0 != names1 {
        let diff: BTreeSet<&str> = names0.symmetric_difference(&names1).copied().collect();
        return Err(Error::Consistency(format!(
            "checkpoints hold different tensors: {}",
            diff.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut out = CheckpointTensorMap::default();
    for (name, t0) in &theta0.entries {
        let t1 = &theta1.entries[name];
        if t0.shape != t1.shape {
            return Err(Error::Consistency(format!(
                "tensor '{name}' has shape {:?} in theta0 but {:?} in theta1",
                t0.shape, t1.shape
            )));
        }
        let data = t0
            .data
            .iter()
            .zip(&t1.data)
            .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
            .collect();
        out.insert(name.clone(), Tensor::new(t0.shape.clone(), t0.dtype, data)?)?;
    }
    Ok(out)
}

fn cell_of(metric: &Metric) -> Option<Cell> {
    match metric {
        Metric::Scalar { value } => Some(Cell::Float(*value)),
        Metric::Integer { value } => Some(Cell::Int(*value)),
        Metric::Text { value } => Some(Cell::Text(value.clone())),
        Metric::Vector { .. } | Metric::Table(_) => None,
    }
}

/// One table row per alpha and one column per scalar metric, in the
/// metric-name order of the first report.
///
/// Every report must carry the same scalar metric names.
pub fn sweep_table(per_alpha: &[(f64, ReportDocument)]) -> Result<Table> {
    if per_alpha.is_empty() {
        return Err(Error::Validation("no reports to merge".into()));
    }
    for w in per_alpha.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Validation(format!("duplicate alpha {}", w[0].0)));
        }
        if w[1].0 < w[0].0 {
            return Err(Error::Validation("alphas must be strictly increasing".into()));
        }
    }
    let columns_of = |doc: &ReportDocument| -> BTreeSet<String> {
        doc.metrics
            .iter()
            .filter(|(_, m)| cell_of(m).is_some())
            .map(|(n, _)| n.clone())
            .collect()
    };
    let all: BTreeSet<String> = per_alpha.iter().flat_map(|(_, d)| columns_of(d)).collect();
    let mut missing = Vec::new();
    for (alpha, doc) in per_alpha {
        let have = columns_of(doc);
        for name in all.difference(&have) {
            missing.push(format!("alpha {alpha}: {name}"));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "reports do not share their metrics; missing {}",
            missing.join("; ")
        )));
    }

    let mut table = Table::new(std::iter::once("alpha".to_string()).chain(all.iter().cloned()));
    for (alpha, doc) in per_alpha {
        let mut row = vec![Cell::Float(*alpha)];
        row.extend(all.iter().map(|n| cell_of(&doc.metrics[n]).expect("scalar metric")));
        table.push_row(row)?;
    }
    Ok(table)
}

/// Merges per-alpha reports into a single document holding the sweep table.
pub fn sweep_report(
    per_alpha: &[(f64, ReportDocument)],
    command_line: Vec<String>,
    timestamp: String,
) -> Result<ReportDocument> {
    let table = sweep_table(per_alpha)?;
    let alphas: Vec<f64> = per_alpha.iter().map(|(a, _)| *a).collect();
    let mut doc = ReportDocument::new(
        command_line,
        serde_json::json!({ "alphas": alphas }),
        timestamp,
    );
    for (_, r) in per_alpha {
        for input in &r.inputs {
            if !doc.inputs.contains(input) {
                doc.inputs.push(input.clone());
            }
        }
    }
    doc.table("interpolation.sweep", table)?;
    Ok(doc)
}
