use nalgebra::DMatrix;

use crate::data_model::{ClassifierHead, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Thin SVD `W = sum_i sigma_i u_i v_i^T` with descending singular values.
///
/// Signs are fixed so that the largest-magnitude entry of every right
/// singular vector is nonnegative (first such entry on ties), which makes
/// the decomposition reproducible for identical input.
#[derive(Debug, Clone, PartialEq)]
pub struct SVDecomposition {
    pub singular_values: Vec<f64>,
    /// K x r, columns `u_i`.
    pub left_vectors: DMatrix<f64>,
    /// d_H x r, columns `v_i`.
    pub right_vectors: DMatrix<f64>,
}

impl SVDecomposition {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn dim(&self) -> usize {
        self.right_vectors.nrows()
    }

    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.right_vectors.column(i).iter().copied().collect()
    }

    /// Right singular vectors as a row-major d_H x r matrix.
    pub fn right_matrix(&self) -> Matrix {
        Matrix::from_dmatrix(&self.right_vectors)
    }

    /// `sum_i scale_i * sigma_i u_i v_i^T`.
    pub(crate) fn reconstruct_scaled(&self, keep: &[bool]) -> Matrix {
        let mut scaled = self.left_vectors.clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= if keep[i] { self.singular_values[i] } else { 0.0 };
        }
        Matrix::from_dmatrix(&(scaled * self.right_vectors.transpose()))
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_scaled(&vec![true; self.rank()])
    }

    /// Flips the sign of direction `i` (both `u_i` and `v_i`).
    pub fn flip(&mut self, i: usize) {
        self.left_vectors.column_mut(i).neg_mut();
        self.right_vectors.column_mut(i).neg_mut();
    }
}

/// Full thin SVD, sorted and sign-fixed, without dropping any direction.
pub(crate) fn full_svd(w: &Matrix) -> Result<SVDecomposition> {
    if w.as_slice().iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("the head is all zeros".into()));
    }
    let svd = w.to_dmatrix().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let k = u.nrows();
    let d = v_t.ncols();
    let mut left = DMatrix::zeros(k, order.len());
    let mut right = DMatrix::zeros(d, order.len());
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v_t.row(src).transpose());
    }
    let mut out = SVDecomposition {
        singular_values: order.iter().map(|&i| sigma[i]).collect(),
        left_vectors: left,
        right_vectors: right,
    };
    for i in 0..out.rank() {
        let col = out.right_vectors.column(i);
        let mut pivot = 0;
        for (j, x) in col.iter().enumerate() {
            if x.abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        if col[pivot] < 0.0 {
            out.flip(i);
        }
    }
    Ok(out)
}

/// SVD of the head, keeping directions with `sigma_i > rank_tol * sigma_1`.
pub fn svd_head(head: &ClassifierHead, rank_tol: f64) -> Result<SVDecomposition> {
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::Validation(format!(
            "rank_tol must lie in [0, 1), got {rank_tol}"
        )));
    }
    let mut svd = full_svd(head.weights())?;
    let cutoff = rank_tol * svd.singular_values[0];
    let rank = svd.singular_values.iter().take_while(|&&s| s > cutoff).count();
    svd.singular_values.truncate(rank);
    svd.left_vectors = svd.left_vectors.columns(0, rank).into_owned();
    svd.right_vectors = svd.right_vectors.columns(0, rank).into_owned();
    Ok(svd)
}
