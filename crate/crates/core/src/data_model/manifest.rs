use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One probing concept: balanced positive and negative row indices into a
/// probe activation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: i64,
    pub name: String,
    #[serde(rename = "pos")]
    pub positive_indices: Vec<usize>,
    #[serde(rename = "neg")]
    pub negative_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptManifest {
    pub concepts: Vec<Concept>,
}

impl ConceptManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks balance, bounds and disjointness against a probe matrix with
    /// `n_rows` rows.
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        let mut ids = HashSet::new();
        for c in &self.concepts {
            if !ids.insert(c.id) {
                return Err(Error::Validation(format!("duplicate concept id {}", c.id)));
            }
            if c.positive_indices.is_empty() || c.negative_indices.is_empty() {
                return Err(Error::Validation(format!(
                    "concept {} ('{}') has an empty positive or negative set",
                    c.id, c.name
                )));
            }
            if c.positive_indices.len() != c.negative_indices.len() {
                return Err(Error::Validation(format!(
                    "concept {} ('{}') is unbalanced: {} positives, {} negatives",
                    c.id,
                    c.name,
                    c.positive_indices.len(),
                    c.negative_indices.len()
                )));
            }
            if let Some(&bad) = c
                .positive_indices
                .iter()
                .chain(&c.negative_indices)
                .find(|&&i| i >= n_rows)
            {
                return Err(Error::Validation(format!(
                    "concept {} references row {bad}, probe matrix has {n_rows} rows",
                    c.id
                )));
            }
            let pos: HashSet<_> = c.positive_indices.iter().collect();
            if let Some(shared) = c.negative_indices.iter().find(|i| pos.contains(i)) {
                return Err(Error::Validation(format!(
                    "concept {} lists row {shared} as both positive and negative",
                    c.id
                )));
            }
        }
        Ok(())
    }
}
