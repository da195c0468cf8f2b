use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::npy::{self, DType};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "index.json";

/// A dense tensor of arbitrary rank. Values are held in `f64`; `dtype`
/// records the precision used on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, dtype: DType, data: Vec<f64>) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Shape(format!(
                "{} values do not fill shape {shape:?}",
                data.len()
            )));
        }
        if let Some(p) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite tensor entry at flat index {p}")));
        }
        Ok(Self { shape, dtype, data })
    }
}

/// Named tensors of one checkpoint, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointTensorMap {
    pub entries: BTreeMap<String, Tensor>,
}

impl CheckpointTensorMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Consistency(format!("duplicate tensor name '{name}'")));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointIndex {
    pub tensors: Vec<IndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

/// Loads a checkpoint directory: an `index.json` plus one NPY per tensor.
pub fn load_checkpoint(dir: &Path) -> Result<CheckpointTensorMap> {
    let index_path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let index: CheckpointIndex = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", index_path.display())))?;

    let mut map = CheckpointTensorMap::default();
    for entry in index.tensors {
        let path = dir.join(&entry.file);
        if !path.is_file() {
            return Err(Error::Consistency(format!(
                "tensor '{}' is listed in the index but {} is missing",
                entry.name,
                path.display()
            )));
        }
        let arr = npy::read_npy(&path)?;
        if arr.shape != entry.shape {
            return Err(Error::Consistency(format!(
                "tensor '{}' has shape {:?} on disk but {:?} in the index",
                entry.name, arr.shape, entry.shape
            )));
        }
        let tensor = Tensor::new(arr.shape, arr.dtype, arr.data)
            .map_err(|e| Error::Validation(format!("tensor '{}': {e}", entry.name)))?;
        map.insert(entry.name, tensor)?;
    }
    Ok(map)
}

fn file_name_for(position: usize, name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{position:04}_{stem}.npy")
}

/// Writes `map` as a checkpoint directory, creating `dir` if needed.
pub fn save_checkpoint(map: &CheckpointTensorMap, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::with_capacity(map.len());
    for (position, (name, tensor)) in map.entries.iter().enumerate() {
        let file = file_name_for(position, name);
        npy::write_npy(&dir.join(&file), &tensor.shape, tensor.dtype, &tensor.data)?;
        tensors.push(IndexEntry {
            name: name.clone(),
            shape: tensor.shape.clone(),
            file,
        });
    }
    let index_path = dir.join(INDEX_FILE);
    let text = serde_json::to_string_pretty(&CheckpointIndex { tensors })
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&index_path, text + "\n").map_err(|e| Error::io(&index_path, e))
}
