use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{ActivationMatrix, ClassifierHead, Matrix};
use super::npy::{self, DType};
use crate::error::{Error, Result};

/// Metadata stored next to a matrix file, under the same stem with a
/// `.json` extension. All fields are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// A rank-2 array together with its optional sidecar metadata.
#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    pub path: PathBuf,
    pub matrix: Matrix,
    pub dtype: DType,
    pub sidecar: Sidecar,
}

/// Loads a rank-2 NPY file and its sidecar, if one exists.
pub fn load_matrix(path: &Path) -> Result<LoadedMatrix> {
    let arr = npy::read_npy(path)?;
    let (rows, cols) = match arr.shape[..] {
        [r, c] => (r, c),
        _ => {
            return Err(Error::Shape(format!(
                "{}: expected a rank-2 array, found shape {:?}",
                path.display(),
                arr.shape
            )))
        }
    };
    let matrix = Matrix::new(rows, cols, arr.data)?;
    if let Some((i, j)) = matrix.first_non_finite() {
        return Err(Error::Validation(format!(
            "{}: non-finite value at row {i}, column {j}",
            path.display()
        )));
    }
    let sc_path = sidecar_path(path);
    let sidecar = if sc_path.is_file() {
        let text = fs::read_to_string(&sc_path).map_err(|e| Error::io(&sc_path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", sc_path.display())))?
    } else {
        Sidecar::default()
    };
    Ok(LoadedMatrix {
        path: path.to_path_buf(),
        matrix,
        dtype: arr.dtype,
        sidecar,
    })
}

impl LoadedMatrix {
    pub fn into_activations(self) -> Result<ActivationMatrix> {
        let source_id = self.sidecar.source_id.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let mut acts = ActivationMatrix::new(self.matrix, source_id)?;
        if let Some(name) = self.sidecar.layer_name {
            acts = acts.with_layer_name(name);
        }
        if let Some(labels) = self.sidecar.labels {
            acts = acts.with_labels(labels_to_indices(&labels)?)?;
        }
        Ok(acts)
    }

    pub fn into_head(self) -> Result<ClassifierHead> {
        let mut head = ClassifierHead::new(self.matrix)?;
        if let Some(t) = self.sidecar.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Validation(format!(
                    "{}: temperature must be positive, got {t}",
                    self.path.display()
                )));
            }
            head.temperature = Some(t);
        }
        if let Some(names) = self.sidecar.class_names {
            if names.len() != head.n_classes() {
                return Err(Error::Validation(format!(
                    "{} class names for a {}-class head",
                    names.len(),
                    head.n_classes()
                )));
            }
            head.class_names = Some(names);
        }
        Ok(head)
    }
}

pub fn load_activations(path: &Path) -> Result<ActivationMatrix> {
    load_matrix(path)?.into_activations()
}

pub fn load_head(path: &Path) -> Result<ClassifierHead> {
    load_matrix(path)?.into_head()
}

pub(crate) fn labels_to_indices(labels: &[i64]) -> Result<Vec<usize>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            usize::try_from(l)
                .map_err(|_| Error::Validation(format!("label {l} at position {i} is negative")))
        })
        .collect()
}

/// Reads a labels file: either a bare JSON integer array or a sidecar object
/// with a `labels` field.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let labels: Vec<i64> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        serde_json::Value::Object(mut map) => serde_json::from_value(
            map.remove("labels").unwrap_or(serde_json::Value::Null),
        ),
        _ => serde_json::from_value(serde_json::Value::Null),
    }
    .map_err(|e| Error::Format(format!("{}: expected integer labels: {e}", path.display())))?;
    labels_to_indices(&labels)
}

/// Writes a matrix plus sidecar; the inverse of [`load_matrix`].
pub fn save_matrix(path: &Path, matrix: &Matrix, dtype: DType, sidecar: &Sidecar) -> Result<()> {
    npy::write_npy(path, &[matrix.nrows(), matrix.ncols()], dtype, matrix.as_slice())?;
    if *sidecar != Sidecar::default() {
        let sc_path = sidecar_path(path);
        let text = serde_json::to_string_pretty(sidecar)
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&sc_path, text).map_err(|e| Error::io(&sc_path, e))?;
    }
    Ok(())
}
