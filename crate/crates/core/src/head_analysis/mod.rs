//! Analysis of the classification head through its singular value
//! decomposition: direction importance, privileged directions, projected
//! outliers, rank correlation and singular-value pruning.

mod importance;
mod prune;
mod spearman;
mod svd;

pub use importance::{
    check_orthonormal, importance, projection_outliers, ImportanceProfile, RATIO_CONVENTION,
};
pub use prune::{prune_count, prune_sweep, pruned_head, PruneSweepResult};
pub use spearman::{average_ranks, spearman};
pub use svd::{svd_head, SVDecomposition, DEFAULT_RANK_TOL};
