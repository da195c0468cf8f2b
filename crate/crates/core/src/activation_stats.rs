//! Activation kurtosis and coordinate-level outlier features.
//!
//! Every statistic is computed per activation vector: each row is
//! standardized with its own mean and population standard deviation
//! (division by `d_H`, no bias correction).

use rayon::prelude::*;

use crate::data_model::{ActivationMatrix, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_Z: f64 = 6.0;

/// Mean kurtosis at or above this value is flagged by the CLI as a likely
/// sign of outlier features. Gaussian-like activations sit near 3.
pub const ADVISORY_KURTOSIS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KurtosisResult {
    pub mean_kurtosis: f64,
    pub per_sample: Option<Vec<f64>>,
    pub n_samples: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierFeatureReport {
    pub threshold_z: f64,
    /// Flagged coordinate indices, one list per sample.
    pub outlier_coords: Vec<Vec<usize>>,
    /// Fraction of samples in which each coordinate is flagged.
    pub frequency: Vec<f64>,
}

impl OutlierFeatureReport {
    /// Coordinates flagged in every sample.
    pub fn always_flagged(&self) -> Vec<usize> {
        self.frequency
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == 1.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Neumaier-compensated sum. A single large term next to many small ones
/// (the outlier-feature case) otherwise loses the small ones' digits.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Population mean and standard deviation of one vector.
pub(crate) fn row_moments(row: &[f64], index: usize) -> Result<(f64, f64)> {
    let d = row.len() as f64;
    let mean = compensated_sum(row.iter().copied()) / d;
    let var = compensated_sum(row.iter().map(|x| (x - mean) * (x - mean))) / d;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::Degenerate(format!(
            "row {index} is constant (zero standard deviation)"
        )));
    }
    Ok((mean, std))
}

fn row_kurtosis(row: &[f64], index: usize) -> Result<f64> {
    let (mean, std) = row_moments(row, index)?;
    let d = row.len() as f64;
    Ok(compensated_sum(row.iter().map(|x| {
        let z = (x - mean) / std;
        let z2 = z * z;
        z2 * z2
    })) / d)
}

/// Mean over rows of the fourth standardized moment of each row.
pub fn kurtosis(acts: &ActivationMatrix, keep_per_sample: bool) -> Result<KurtosisResult> {
    let m = acts.matrix();
    if m.ncols() < 2 {
        return Err(Error::Degenerate(format!(
            "kurtosis needs at least 2 features per row, got {}",
            m.ncols()
        )));
    }
    let per_sample = (0..m.nrows())
        .into_par_iter()
        .map(|i| row_kurtosis(m.row(i), i))
        .collect::<Result<Vec<f64>>>()?;
    let mean_kurtosis = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(KurtosisResult {
        mean_kurtosis,
        per_sample: keep_per_sample.then_some(per_sample),
        n_samples: m.nrows(),
        dim: m.ncols(),
    })
}

/// Flags coordinate `i` of sample `n` when `|h_i - mean(h)| / std(h) >= threshold_z`.
pub fn detect_outlier_features(
    acts: &ActivationMatrix,
    threshold_z: f64,
) -> Result<OutlierFeatureReport> {
    scored_outliers(acts.matrix(), acts.matrix(), threshold_z)
}

/// Shared by canonical and projected outlier detection: row statistics come
/// from `reference`, the tested coordinates from `coords` (same row count).
pub(crate) fn scored_outliers(
    reference: &Matrix,
    coords: &Matrix,
    threshold_z: f64,
) -> Result<OutlierFeatureReport> {
    if !(threshold_z > 0.0 && threshold_z.is_finite()) {
        return Err(Error::Validation(format!(
            "threshold_z must be positive, got {threshold_z}"
        )));
    }
    debug_assert_eq!(reference.nrows(), coords.nrows());
    let outlier_coords = (0..reference.nrows())
        .into_par_iter()
        .map(|n| {
            let (mean, std) = row_moments(reference.row(n), n)?;
            Ok(coords
                .row(n)
                .iter()
                .enumerate()
                .filter(|(_, &x)| (x - mean).abs() / std >= threshold_z)
                .map(|(i, _)| i)
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = vec![0usize; coords.ncols()];
    for &i in outlier_coords.iter().flatten() {
        counts[i] += 1;
    }
    let n = reference.nrows() as f64;
    Ok(OutlierFeatureReport {
        threshold_z,
        outlier_coords,
        frequency: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn acts(rows: &[Vec<f64>]) -> ActivationMatrix {
        ActivationMatrix::new(Matrix::from_rows(rows).unwrap(), "t").unwrap()
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn two_point_row_has_kurtosis_one() {
        let k = kurtosis(&acts(&[vec![1.0, -1.0, 1.0, -1.0]]), true).unwrap();
        assert_eq!(k.mean_kurtosis, 1.0);
        assert_eq!(k.per_sample, Some(vec![1.0]));
    }

    #[test]
    fn spike_row_matches_direct_evaluation() {
        let mut row = vec![0.0; 100];
        row[0] = 10.0;
        // direct evaluation: terms summed smallest first
        let d = row.len() as f64;
        let ascending_sum = |mut terms: Vec<f64>| {
            terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            terms.iter().sum::<f64>()
        };
        let mu = ascending_sum(row.clone()) / d;
        let var = ascending_sum(row.iter().map(|x| (x - mu) * (x - mu)).collect()) / d;
        let sd = var.sqrt();
        let oracle = ascending_sum(row.iter().map(|x| ((x - mu) / sd).powi(4)).collect()) / d;
        let k = kurtosis(&acts(&[row.clone()]), false).unwrap();
        assert!((k.mean_kurtosis - oracle).abs() < 1e-12);
        assert!((k.mean_kurtosis - 9703.0 / 99.0).abs() < 1e-12);
    }

    #[test]
    fn constant_row_names_index() {
        let err = kurtosis(&acts(&[vec![1.0, 2.0], vec![3.0, 3.0]]), false).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(detect_outlier_features(&acts(&[vec![5.0, 5.0]]), 6.0).is_err());
    }

    #[test]
    fn single_feature_is_degenerate() {
        assert!(kurtosis(&acts(&[vec![1.0]]), false).is_err());
    }

    #[test]
    fn mean_equals_average_of_per_sample() {
        let k = kurtosis(&acts(&gaussian(50, 16, 3)), true).unwrap();
        let per = k.per_sample.unwrap();
        let avg = per.iter().sum::<f64>() / per.len() as f64;
        assert!((avg - k.mean_kurtosis).abs() < 1e-15);
        assert!(per.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn gaussian_rows_have_no_six_sigma_outliers() {
        let r = detect_outlier_features(&acts(&gaussian(500, 512, 11)), 6.0).unwrap();
        assert!(r.frequency.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn constructed_outlier_coordinate_is_always_flagged() {
        let mut rows = gaussian(200, 64, 5);
        for row in &mut rows {
            let (_, sd) = row_moments(row, 0).unwrap();
            row[7] = 50.0 * sd;
        }
        let r = detect_outlier_features(&acts(&rows), 6.0).unwrap();
        assert_eq!(r.frequency[7], 1.0);
        assert_eq!(r.always_flagged(), vec![7]);
    }

    #[test]
    fn flags_match_brute_force_double_loop() {
        let mut rows = gaussian(40, 20, 9);
        for (n, row) in rows.iter_mut().enumerate() {
            row[n % 20] *= 8.0;
        }
        let threshold = 2.5;
        let r = detect_outlier_features(&acts(&rows), threshold).unwrap();
        for (n, row) in rows.iter().enumerate() {
            let d = row.len() as f64;
            let mu: f64 = row.iter().sum::<f64>() / d;
            let sd = (row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d).sqrt();
            let mut expected = Vec::new();
            for i in 0..row.len() {
                if ((row[i] - mu) / sd).abs() >= threshold {
                    expected.push(i);
                }
            }
            assert_eq!(r.outlier_coords[n], expected, "row {n}");
        }
    }

    #[test]
    fn bad_threshold_rejected() {
        assert!(detect_outlier_features(&acts(&gaussian(2, 4, 1)), 0.0).is_err());
    }
}
