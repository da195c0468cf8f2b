//! Zero-shot heads, logits and accuracy, and Effective Robustness measured
//! against a logit-logit baseline line.

use rayon::prelude::*;

use crate::data_model::matrix::{dot, norm};
use crate::data_model::{AccuracyRecord, ActivationMatrix, ClassifierHead, Matrix};
use crate::error::{Error, Result};

/// Slope of the published baseline fit.
pub const PUBLISHED_BETA1: f64 = 0.76;
/// Intercept of the published baseline fit.
pub const PUBLISHED_BETA0: f64 = -1.49;

/// Least-squares line `logit(acc_shift) = beta0 + beta1 * logit(acc_in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFit {
    pub beta0: f64,
    pub beta1: f64,
    pub pearson_r: f64,
    pub n_points: usize,
}

impl BaselineFit {
    /// The fixed published line (`beta1 = 0.76`, `beta0 = -1.49`, r = 0.99).
    pub fn published() -> Self {
        Self {
            beta0: PUBLISHED_BETA0,
            beta1: PUBLISHED_BETA1,
            pearson_r: 0.99,
            n_points: 0,
        }
    }

    pub fn predict_shift(&self, acc_in: f64) -> Result<f64> {
        Ok(inv_logit(self.beta1 * logit_checked(acc_in, "acc_in")? + self.beta0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessMetrics {
    pub er: f64,
    pub pct_acc: f64,
    pub acc_in: f64,
    pub acc_shift: f64,
}

/// `ln x - ln(1 - x)`.
pub fn logit(x: f64) -> f64 {
    x.ln() - (1.0 - x).ln()
}

pub fn inv_logit(y: f64) -> f64 {
    1.0 / (1.0 + (-y).exp())
}

fn logit_checked(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x < 1.0 {
        Ok(logit(x))
    } else {
        Err(Error::InfiniteLogit {
            what: what.to_string(),
            value: x,
        })
    }
}

/// Row `k` of the head is `text_embeddings[k] / (temperature * ||text_embeddings[k]||)`.
pub fn build_head(text_embeddings: &Matrix, temperature: f64) -> Result<ClassifierHead> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Validation(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut w = text_embeddings.clone();
    for k in 0..w.nrows() {
        let n = norm(w.row(k));
        if n == 0.0 {
            return Err(Error::Degenerate(format!("text embedding row {k} is zero")));
        }
        for x in w.row_mut(k) {
            *x = *x / n / temperature;
        }
    }
    let mut head = ClassifierHead::new(w)?;
    head.temperature = Some(temperature);
    Ok(head)
}

/// `logits[n][k] = (W h_n / ||h_n||)_k`.
pub fn logits(head: &ClassifierHead, acts: &ActivationMatrix) -> Result<Matrix> {
    if head.dim() != acts.dim() {
        return Err(Error::Shape(format!(
            "head expects {} features, activations have {}",
            head.dim(),
            acts.dim()
        )));
    }
    let w = head.weights();
    let k = head.n_classes();
    let rows = (0..acts.n_samples())
        .into_par_iter()
        .map(|n| {
            let h = acts.row(n);
            let len = norm(h);
            if len == 0.0 {
                return Err(Error::Degenerate(format!("activation row {n} is zero")));
            }
            let unit: Vec<f64> = h.iter().map(|x| x / len).collect();
            Ok((0..k).map(|c| dot(w.row(c), &unit)).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::new(acts.n_samples(), k, rows.into_iter().flatten().collect())
}

/// Index of the largest entry; the lowest index wins ties.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy of a logit matrix.
pub fn accuracy(logit_matrix: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logit_matrix.nrows() {
        return Err(Error::Validation(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logit_matrix.nrows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Validation("accuracy of an empty set".into()));
    }
    let k = logit_matrix.ncols();
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Validation(format!(
            "label {l} at position {i} is out of range for {k} classes"
        )));
    }
    let correct = logit_matrix
        .rows()
        .zip(labels)
        .filter(|(row, &l)| argmax(row) == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Zero-shot accuracy of `head` on labeled activations.
pub fn head_accuracy(head: &ClassifierHead, acts: &ActivationMatrix) -> Result<f64> {
    accuracy(&logits(head, acts)?, acts.require_labels()?)
}

/// Ordinary least squares of `logit(acc_shift)` on `logit(acc_in)`, unweighted.
pub fn fit_baseline(records: &[AccuracyRecord]) -> Result<BaselineFit> {
    if records.len() < 2 {
        return Err(Error::Validation(format!(
            "a baseline fit needs at least 2 records, got {}",
            records.len()
        )));
    }
    let mut xs = Vec::with_capacity(records.len());
    let mut ys = Vec::with_capacity(records.len());
    for r in records {
        xs.push(logit_checked(r.acc_in, &format!("acc_in of '{}'", r.model_id))?);
        ys.push(logit_checked(r.acc_shift, &format!("acc_shift of '{}'", r.model_id))?);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::SingularFit(
            "all baseline models share the same in-distribution accuracy".into(),
        ));
    }
    let beta1 = sxy / sxx;
    let beta0 = my - beta1 * mx;
    // a perfectly flat pool has no defined correlation; report 0
    let pearson_r = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    };
    Ok(BaselineFit {
        beta0,
        beta1,
        pearson_r,
        n_points: records.len(),
    })
}

/// Shifted accuracy above what the baseline line predicts.
pub fn effective_robustness(acc_in: f64, acc_shift: f64, fit: &BaselineFit) -> Result<f64> {
    logit_checked(acc_shift, "acc_shift")?;
    Ok(acc_shift - fit.predict_shift(acc_in)?)
}

pub fn robustness_metrics(acc_in: f64, acc_shift: f64, fit: &BaselineFit) -> Result<RobustnessMetrics> {
    let er = effective_robustness(acc_in, acc_shift, fit)?;
    Ok(RobustnessMetrics {
        er,
        pct_acc: acc_shift / acc_in,
        acc_in,
        acc_shift,
    })
}

/// Equal-weight mean of per-shift accuracies.
pub fn mean_shift_accuracy(per_shift: &[f64]) -> Result<f64> {
    if per_shift.is_empty() {
        return Err(Error::Validation("no shifted sets supplied".into()));
    }
    Ok(per_shift.iter().sum::<f64>() / per_shift.len() as f64)
}
