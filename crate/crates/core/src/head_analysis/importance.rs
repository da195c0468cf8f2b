use rayon::prelude::*;

use super::svd::SVDecomposition;
use crate::activation_stats::{scored_outliers, OutlierFeatureReport};
use crate::data_model::matrix::{dot, norm};
use crate::data_model::{ActivationMatrix, Matrix};
use crate::error::{Error, Result};

/// How the importance ratio's denominator is read: the mean importance.
pub const RATIO_CONVENTION: &str = "max_importance / mean_importance";

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceProfile {
    pub importance: Vec<f64>,
    pub ratio: f64,
    pub argmax_index: usize,
}

/// Mean absolute cosine between every activation row and each column of
/// `directions` (assumed unit norm).
pub(crate) fn mean_abs_cosines(directions: &Matrix, acts: &ActivationMatrix) -> Result<Vec<f64>> {
    let dir_t = directions.transpose();
    let per_row = (0..acts.n_samples())
        .into_par_iter()
        .map(|n| {
            let h = acts.row(n);
            let len = norm(h);
            if len == 0.0 {
                return Err(Error::Degenerate(format!(
                    "activation row {n} is zero, its cosine is undefined"
                )));
            }
            Ok(dir_t.rows().map(|v| (dot(v, h) / len).abs()).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![0.0; directions.ncols()];
    for row in &per_row {
        for (s, c) in sums.iter_mut().zip(row) {
            *s += c;
        }
    }
    let n = acts.n_samples() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Importance of each right singular direction: the normalized singular
/// value times the mean absolute cosine with the activations.
pub fn importance(svd: &SVDecomposition, acts: &ActivationMatrix) -> Result<ImportanceProfile> {
    if svd.dim() != acts.dim() {
        return Err(Error::Shape(format!(
            "directions live in {} dimensions, activations in {}",
            svd.dim(),
            acts.dim()
        )));
    }
    if svd.rank() == 0 {
        return Err(Error::Degenerate("decomposition has rank 0".into()));
    }
    let sigma_total: f64 = svd.singular_values.iter().sum();
    let cosines = mean_abs_cosines(&svd.right_matrix(), acts)?;
    let importance: Vec<f64> = svd
        .singular_values
        .iter()
        .zip(&cosines)
        .map(|(s, c)| s / sigma_total * c)
        .collect();

    let mut argmax_index = 0;
    for (i, &v) in importance.iter().enumerate() {
        if v > importance[argmax_index] {
            argmax_index = i;
        }
    }
    let mean = importance.iter().sum::<f64>() / importance.len() as f64;
    if mean == 0.0 {
        return Err(Error::Degenerate(
            "every direction is orthogonal to every activation".into(),
        ));
    }
    Ok(ImportanceProfile {
        ratio: importance[argmax_index] / mean,
        argmax_index,
        importance,
    })
}

/// Checks that the columns of `directions` are orthonormal to `tol`.
pub fn check_orthonormal(directions: &Matrix, tol: f64) -> Result<()> {
    let cols = directions.transpose();
    for i in 0..cols.nrows() {
        for j in i..cols.nrows() {
            let g = dot(cols.row(i), cols.row(j));
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).abs() > tol {
                return Err(Error::Validation(format!(
                    "directions {i} and {j} are not orthonormal (inner product {g})"
                )));
            }
        }
    }
    Ok(())
}

/// Outlier detection in a non-canonical basis.
///
/// Each projection `<d_j, h>` is scored against the mean and standard
/// deviation of the row's own canonical coordinates, so that with the
/// identity basis this is exactly [`crate::activation_stats::detect_outlier_features`].
pub fn projection_outliers(
    acts: &ActivationMatrix,
    directions: &Matrix,
    threshold_z: f64,
) -> Result<OutlierFeatureReport> {
    if directions.nrows() != acts.dim() {
        return Err(Error::Shape(format!(
            "directions have {} rows, activations {} features",
            directions.nrows(),
            acts.dim()
        )));
    }
    check_orthonormal(directions, 1e-8)?;
    let dir_t = directions.transpose();
    let mut projected = Matrix::zeros(acts.n_samples(), directions.ncols());
    for n in 0..acts.n_samples() {
        let h = acts.row(n);
        for (j, v) in dir_t.rows().enumerate() {
            projected.set(n, j, dot(v, h));
        }
    }
    scored_outliers(acts.matrix(), &projected, threshold_z)
}
