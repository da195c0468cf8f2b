//! Linear centered kernel alignment between two sets of activations on
//! the same samples.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data_model::ActivationMatrix;
use crate::error::{Error, Result};

pub const KERNEL: &str = "linear";

#[derive(Debug, Clone, PartialEq)]
pub struct CKAResult {
    pub value: f64,
    pub n: usize,
    pub layer_pair: Option<(String, String)>,
}

fn centered(acts: &ActivationMatrix) -> DMatrix<f64> {
    let mut m = acts.matrix().to_dmatrix();
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    m
}

/// `HSIC(A, B) = ||B_c^T A_c||_F^2 / (N - 1)^2` for column-centered A, B.
fn hsic_centered(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows() as f64;
    let cross = b.transpose() * a;
    cross.norm_squared() / ((n - 1.0) * (n - 1.0))
}

/// Linear-kernel HSIC between two activation matrices.
pub fn hsic(a: &ActivationMatrix, b: &ActivationMatrix) -> Result<f64> {
    check_pair(a, b)?;
    Ok(hsic_centered(&centered(a), &centered(b)))
}

fn check_pair(a: &ActivationMatrix, b: &ActivationMatrix) -> Result<()> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::Validation(format!(
            "CKA needs the same samples, got {} and {} rows",
            a.n_samples(),
            b.n_samples()
        )));
    }
    if a.n_samples() < 2 {
        return Err(Error::Validation("CKA needs at least 2 samples".into()));
    }
    Ok(())
}

pub fn cka(a: &ActivationMatrix, b: &ActivationMatrix) -> Result<CKAResult> {
    check_pair(a, b)?;
    let (ac, bc) = (centered(a), centered(b));
    for (name, m) in [("a", &ac), ("b", &bc)] {
        if m.norm_squared() == 0.0 {
            return Err(Error::Degenerate(format!(
                "activations {name} are constant across samples"
            )));
        }
    }
    let ab = hsic_centered(&ac, &bc);
    let aa = hsic_centered(&ac, &ac);
    let bb = hsic_centered(&bc, &bc);
    Ok(CKAResult {
        value: ab / (aa.sqrt() * bb.sqrt()),
        n: a.n_samples(),
        layer_pair: a.layer_name.clone().zip(b.layer_name.clone()),
    })
}

/// CKA of each aligned layer pair, in order.
pub fn cka_sweep(
    model_a_layers: &[ActivationMatrix],
    model_b_layers: &[ActivationMatrix],
) -> Result<Vec<CKAResult>> {
    if model_a_layers.len() != model_b_layers.len() {
        return Err(Error::Validation(format!(
            "layer lists differ in length: {} vs {}",
            model_a_layers.len(),
            model_b_layers.len()
        )));
    }
    model_a_layers
        .par_iter()
        .zip(model_b_layers)
        .enumerate()
        .map(|(i, (a, b))| {
            cka(a, b).map_err(|e| Error::Validation(format!("layer {i}: {e}")))
        })
        .collect()
}
