use rayon::prelude::*;

use super::svd::{full_svd, SVDecomposition};
use crate::data_model::{ActivationMatrix, ClassifierHead};
use crate::error::{Error, Result};
use crate::zeroshot::{self, BaselineFit};

#[derive(Debug, Clone, PartialEq)]
pub struct PruneSweepResult {
    pub fractions: Vec<f64>,
    /// Number of zeroed directions at each fraction.
    pub n_pruned: Vec<usize>,
    /// Total number of directions in the thin SVD.
    pub n_directions: usize,
    pub acc_in: Vec<f64>,
    /// `acc_shift[f][s]`: accuracy on shift set `s` at fraction `f`.
    pub acc_shift: Option<Vec<Vec<f64>>>,
    /// Equal-weight mean over shift sets at each fraction.
    pub acc_shift_mean: Option<Vec<f64>>,
    /// ER at each fraction; `None` where an accuracy of exactly 0 or 1
    /// leaves it undefined.
    pub er: Option<Vec<Option<f64>>>,
}

/// `floor(fraction * n)`, absorbing the rounding of `fraction * n` so that
/// e.g. 0.29 * 100 counts as 29.
pub fn prune_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Pruning order: ascending singular value, ties by ascending index.
fn pruning_order(svd: &SVDecomposition) -> Vec<usize> {
    let mut order: Vec<usize> = (0..svd.rank()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .total_cmp(&svd.singular_values[b])
            .then(a.cmp(&b))
    });
    order
}

/// The head with its `n_pruned` smallest singular values set to zero.
/// Zero pruning returns the original weights untouched.
pub fn pruned_head(head: &ClassifierHead, n_pruned: usize) -> Result<ClassifierHead> {
    if n_pruned == 0 {
        return Ok(head.clone());
    }
    let svd = full_svd(head.weights())?;
    pruned_from(head, &svd, &pruning_order(&svd), n_pruned)
}

fn pruned_from(
    head: &ClassifierHead,
    svd: &SVDecomposition,
    order: &[usize],
    n_pruned: usize,
) -> Result<ClassifierHead> {
    if n_pruned == 0 {
        return Ok(head.clone());
    }
    if n_pruned >= svd.rank() {
        return Err(Error::Degenerate(format!(
            "pruning {n_pruned} of {} directions would zero the whole head",
            svd.rank()
        )));
    }
    let mut keep = vec![true; svd.rank()];
    for &i in &order[..n_pruned] {
        keep[i] = false;
    }
    let mut out = ClassifierHead::new(svd.reconstruct_scaled(&keep))?;
    out.temperature = head.temperature;
    out.class_names = head.class_names.clone();
    Ok(out)
}

/// Zero-shot accuracy as the smallest singular directions are removed.
///
/// For each fraction `p` the `floor(p * r)` smallest-sigma directions of the
/// full thin SVD (`r = min(K, d_H)`) are zeroed and the head rebuilt.
pub fn prune_sweep(
    head: &ClassifierHead,
    acts: &ActivationMatrix,
    fractions: &[f64],
    shift_sets: &[ActivationMatrix],
    baseline: Option<&BaselineFit>,
) -> Result<PruneSweepResult> {
    acts.require_labels()?;
    for s in shift_sets {
        s.require_labels()?;
    }
    if fractions.is_empty() {
        return Err(Error::Validation("no pruning fractions given".into()));
    }
    if let Some(&p) = fractions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Validation(format!("fraction {p} is outside [0, 1]")));
    }
    if fractions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("fractions must be strictly increasing".into()));
    }

    let svd = full_svd(head.weights())?;
    let order = pruning_order(&svd);
    let r = svd.rank();
    let n_pruned: Vec<usize> = fractions.iter().map(|&p| prune_count(p, r)).collect();

    let rows = n_pruned
        .par_iter()
        .map(|&m| {
            let h = pruned_from(head, &svd, &order, m)?;
            let acc_in = zeroshot::head_accuracy(&h, acts)?;
            let shifts = shift_sets
                .iter()
                .map(|s| zeroshot::head_accuracy(&h, s))
                .collect::<Result<Vec<_>>>()?;
            Ok((acc_in, shifts))
        })
        .collect::<Result<Vec<_>>>()?;

    let acc_in: Vec<f64> = rows.iter().map(|(a, _)| *a).collect();
    let (acc_shift, acc_shift_mean) = if shift_sets.is_empty() {
        (None, None)
    } else {
        let per: Vec<Vec<f64>> = rows.into_iter().map(|(_, s)| s).collect();
        let means = per
            .iter()
            .map(|s| zeroshot::mean_shift_accuracy(s))
            .collect::<Result<Vec<_>>>()?;
        (Some(per), Some(means))
    };
    let er = match (&acc_shift_mean, baseline) {
        (Some(means), Some(fit)) => Some(
            acc_in
                .iter()
                .zip(means)
                .map(|(&a, &s)| zeroshot::effective_robustness(a, s, fit).ok())
                .collect(),
        ),
        _ => None,
    };
    Ok(PruneSweepResult {
        fractions: fractions.to_vec(),
        n_pruned,
        n_directions: r,
        acc_in,
        acc_shift,
        acc_shift_mean,
        er,
    })
}
