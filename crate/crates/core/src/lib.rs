//! Representation-space diagnostics for image classifiers.
//!
//! Works on dumped activations and classifier heads stored as NPY files:
//! activation kurtosis and outlier features, SVD-based direction importance
//! and pruning, zero-shot accuracy and Effective Robustness, concept
//! probing with average precision, linear CKA, and weight interpolation
//! between checkpoints.

pub mod activation_stats;
pub mod cka;
pub mod checkpoint_interp;
pub mod concept_probe;
pub mod data_model;
pub mod error;
pub mod head_analysis;
pub mod pipeline;
pub mod zeroshot;

pub use error::{Error, Result};
