//! On-disk and in-memory representations shared by every analysis.

pub mod checkpoint;
pub mod loader;
pub mod manifest;
pub mod matrix;
pub mod npy;
pub mod records;
pub mod report;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointTensorMap, Tensor};
pub use loader::{
    load_activations, load_head, load_labels, load_matrix, save_matrix, LoadedMatrix, Sidecar,
};
pub use manifest::{Concept, ConceptManifest};
pub use matrix::{ActivationMatrix, ClassifierHead, Matrix};
pub use npy::DType;
pub use records::{load_baselines, AccuracyRecord};
pub use report::{load_report, save_report, Cell, Metric, ReportDocument, Table};
