//! Concept probing of representation directions with average precision,
//! plus the set arithmetic used to compare concept sets across models.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::data_model::matrix::dot;
use crate::data_model::{ActivationMatrix, ConceptManifest, Matrix};
use crate::error::{Error, Result};
use crate::head_analysis::SVDecomposition;

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_SWEEP: [f64; 4] = [0.8, 0.85, 0.9, 0.95];

/// Recorded in reports: a direction's sign is arbitrary, so each AP is the
/// better of the two orientations.
pub const SIGN_CONVENTION: &str = "max(AP(scores), AP(-scores))";

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptProbeResult {
    pub concept_ids: Vec<i64>,
    pub concept_names: Vec<String>,
    /// `ap[i][c]` for direction `i` and concept column `c`.
    pub ap: Vec<Vec<f64>>,
    pub threshold: f64,
    /// Concept ids with AP at or above the threshold, per direction.
    pub assigned: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSummary {
    pub n_unique: usize,
    pub polysemanticity: f64,
    pub top_k: Vec<Vec<(i64, f64)>>,
}

/// Non-interpolated average precision.
///
/// Items are ranked by descending score; equal scores keep ascending
/// original index order.
pub fn average_precision(scores: &[f64], is_positive: &[bool]) -> Result<f64> {
    if scores.len() != is_positive.len() {
        return Err(Error::Validation(format!(
            "{} scores for {} labels",
            scores.len(),
            is_positive.len()
        )));
    }
    let n_pos = is_positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::UndefinedAp("no positive items".into()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Validation(format!("score {i} is not finite")));
    }
    // partial_cmp, not total_cmp: -0.0 and 0.0 are the same score.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if is_positive[i] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / n_pos as f64)
}

fn assign(ap: &[Vec<f64>], ids: &[i64], threshold: f64) -> Vec<Vec<i64>> {
    ap.iter()
        .map(|row| {
            row.iter()
                .zip(ids)
                .filter(|(&a, _)| a >= threshold)
                .map(|(_, &id)| id)
                .collect()
        })
        .collect()
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )))
    }
}

/// Probes the columns of `directions` (d_H x r, unit norm) for every
/// concept in the manifest.
pub fn probe_directions(
    directions: &Matrix,
    probe_acts: &ActivationMatrix,
    manifest: &ConceptManifest,
    threshold: f64,
) -> Result<ConceptProbeResult> {
    check_threshold(threshold)?;
    if directions.nrows() != probe_acts.dim() {
        return Err(Error::Shape(format!(
            "directions live in {} dimensions, probe activations in {}",
            directions.nrows(),
            probe_acts.dim()
        )));
    }
    manifest.validate(probe_acts.n_samples())?;

    let dir_t = directions.transpose();
    // projections[i][n] = <v_i, h_n>
    let projections: Vec<Vec<f64>> = (0..dir_t.nrows())
        .into_par_iter()
        .map(|i| {
            let v = dir_t.row(i);
            (0..probe_acts.n_samples())
                .map(|n| dot(v, probe_acts.row(n)))
                .collect()
        })
        .collect();

    let ap = projections
        .par_iter()
        .map(|proj| {
            manifest
                .concepts
                .iter()
                .map(|c| {
                    let mut scores = Vec::with_capacity(2 * c.positive_indices.len());
                    let mut labels = Vec::with_capacity(scores.capacity());
                    for &n in &c.positive_indices {
                        scores.push(proj[n]);
                        labels.push(true);
                    }
                    for &n in &c.negative_indices {
                        scores.push(proj[n]);
                        labels.push(false);
                    }
                    let up = average_precision(&scores, &labels)?;
                    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
                    let down = average_precision(&negated, &labels)?;
                    Ok(up.max(down))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let concept_ids: Vec<i64> = manifest.concepts.iter().map(|c| c.id).collect();
    Ok(ConceptProbeResult {
        assigned: assign(&ap, &concept_ids, threshold),
        concept_names: manifest.concepts.iter().map(|c| c.name.clone()).collect(),
        concept_ids,
        ap,
        threshold,
    })
}

/// Probes the right singular vectors of a head.
pub fn probe(
    svd: &SVDecomposition,
    probe_acts: &ActivationMatrix,
    manifest: &ConceptManifest,
    threshold: f64,
) -> Result<ConceptProbeResult> {
    probe_directions(&svd.right_matrix(), probe_acts, manifest, threshold)
}

impl ConceptProbeResult {
    pub fn n_directions(&self) -> usize {
        self.ap.len()
    }

    /// The same AP matrix re-thresholded.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            assigned: assign(&self.ap, &self.concept_ids, threshold),
            threshold,
            ..self.clone()
        })
    }

    pub fn unique_concepts(&self) -> BTreeSet<i64> {
        self.assigned.iter().flatten().copied().collect()
    }
}

pub fn summarize(result: &ConceptProbeResult, k: usize) -> Result<ConceptSummary> {
    if k == 0 {
        return Err(Error::Validation("top-k needs k >= 1".into()));
    }
    let r = result.n_directions();
    let total: usize = result.assigned.iter().map(Vec::len).sum();
    let top_k = result
        .ap
        .iter()
        .map(|row| {
            let mut pairs: Vec<(i64, f64)> =
                result.concept_ids.iter().copied().zip(row.iter().copied()).collect();
            pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            pairs.truncate(k);
            pairs
        })
        .collect();
    Ok(ConceptSummary {
        n_unique: result.unique_concepts().len(),
        polysemanticity: if r == 0 { 0.0 } else { total as f64 / r as f64 },
        top_k,
    })
}

/// `(threshold, n_unique, polysemanticity)` for each threshold.
pub fn threshold_sweep(
    result: &ConceptProbeResult,
    thresholds: &[f64],
) -> Result<Vec<(f64, usize, f64)>> {
    thresholds
        .iter()
        .map(|&t| {
            let s = summarize(&result.with_threshold(t)?, 1)?;
            Ok((t, s.n_unique, s.polysemanticity))
        })
        .collect()
}

/// Region counts of a Venn diagram over 2 or 3 named sets.
#[derive(Debug, Clone, PartialEq)]
pub struct VennPartition {
    pub set_names: Vec<String>,
    /// Keyed by the names of the sets an element belongs to (in input
    /// order); contains every nonempty signature, including empty regions.
    pub region_sizes: BTreeMap<Vec<String>, usize>,
}

impl VennPartition {
    pub fn region(&self, names: &[&str]) -> usize {
        let key: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        self.region_sizes.get(&key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.region_sizes.values().sum()
    }
}

pub fn venn(sets: &[(String, BTreeSet<i64>)]) -> Result<VennPartition> {
    if !(2..=3).contains(&sets.len()) {
        return Err(Error::Validation(format!(
            "a Venn partition needs 2 or 3 sets, got {}",
            sets.len()
        )));
    }
    let mut region_sizes = BTreeMap::new();
    for mask in 1..(1u32 << sets.len()) {
        let key = signature(sets, mask);
        region_sizes.insert(key, 0);
    }
    let union: BTreeSet<i64> = sets.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    for x in union {
        let mask = sets
            .iter()
            .enumerate()
            .filter(|(_, (_, s))| s.contains(&x))
            .fold(0u32, |m, (i, _)| m | (1 << i));
        *region_sizes.get_mut(&signature(sets, mask)).expect("all signatures present") += 1;
    }
    Ok(VennPartition {
        set_names: sets.iter().map(|(n, _)| n.clone()).collect(),
        region_sizes,
    })
}

fn signature(sets: &[(String, BTreeSet<i64>)], mask: u32) -> Vec<String> {
    sets.iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, (n, _))| n.clone())
        .collect()
}

/// Where an epoch's finetuned concepts fall relative to the zero-shot and
/// supervised sets, as fractions of the finetuned set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapFractions {
    pub fine_size: usize,
    pub fine_only: f64,
    pub fine_zero: f64,
    pub fine_sup: f64,
    pub fine_zero_sup: f64,
}

pub fn overlap_trajectory(
    fine_sets: &[BTreeSet<i64>],
    zero_set: &BTreeSet<i64>,
    sup_set: &BTreeSet<i64>,
) -> Result<Vec<OverlapFractions>> {
    if fine_sets.is_empty() {
        return Err(Error::Validation("overlap trajectory needs at least one epoch".into()));
    }
    fine_sets
        .iter()
        .enumerate()
        .map(|(epoch, fine)| {
            if fine.is_empty() {
                return Err(Error::Degenerate(format!(
                    "epoch {epoch} has an empty finetuned concept set, fractions are undefined"
                )));
            }
            let mut counts = [0usize; 4];
            for c in fine {
                let slot = usize::from(zero_set.contains(c)) | (usize::from(sup_set.contains(c)) << 1);
                counts[slot] += 1;
            }
            let n = fine.len() as f64;
            Ok(OverlapFractions {
                fine_size: fine.len(),
                fine_only: counts[0] as f64 / n,
                fine_zero: counts[1] as f64 / n,
                fine_sup: counts[2] as f64 / n,
                fine_zero_sup: counts[3] as f64 / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Concept;

    fn set(v: &[i64]) -> BTreeSet<i64> {
        v.iter().copied().collect()
    }

    #[test]
    fn perfect_separator_has_ap_one() {
        let ap = average_precision(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn single_positive_at_rank_two() {
        let ap = average_precision(&[0.9, 0.8, 0.7], &[false, true, false]).unwrap();
        assert_eq!(ap, 0.5);
    }

    #[test]
    fn ties_rank_by_index() {
        // positive second among equal scores: precision 1/2
        assert_eq!(average_precision(&[1.0, 1.0], &[false, true]).unwrap(), 0.5);
        assert_eq!(average_precision(&[1.0, 1.0], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn no_positive_is_undefined() {
        assert!(matches!(
            average_precision(&[1.0, 2.0], &[false, false]),
            Err(Error::UndefinedAp(_))
        ));
    }

    fn separable_setup(sign: f64) -> (Matrix, ActivationMatrix, ConceptManifest) {
        let rows = vec![
            vec![sign, 0.3],
            vec![sign, -0.2],
            vec![-sign, 0.1],
            vec![-sign, 0.4],
        ];
        let acts = ActivationMatrix::new(Matrix::from_rows(&rows).unwrap(), "p").unwrap();
        let manifest = ConceptManifest {
            concepts: vec![Concept {
                id: 7,
                name: "dog".into(),
                positive_indices: vec![0, 1],
                negative_indices: vec![2, 3],
            }],
        };
        (Matrix::identity(2), acts, manifest)
    }

    #[test]
    fn separable_concept_assigned_to_first_direction() {
        for sign in [1.0, -1.0] {
            let (dirs, acts, m) = separable_setup(sign);
            let r = probe_directions(&dirs, &acts, &m, 1.0).unwrap();
            assert_eq!(r.ap[0][0], 1.0);
            assert_eq!(r.assigned[0], vec![7]);
        }
    }

    #[test]
    fn probe_rejects_bad_threshold_and_manifest() {
        let (dirs, acts, mut m) = separable_setup(1.0);
        assert!(probe_directions(&dirs, &acts, &m, 0.0).is_err());
        m.concepts[0].negative_indices.clear();
        m.concepts[0].positive_indices.clear();
        assert!(matches!(
            probe_directions(&dirs, &acts, &m, 0.9),
            Err(Error::Validation(_))
        ));
    }

    fn result(assigned_ap: Vec<Vec<f64>>) -> ConceptProbeResult {
        let ids: Vec<i64> = (0..assigned_ap[0].len() as i64).collect();
        ConceptProbeResult {
            assigned: assign(&assigned_ap, &ids, 0.9),
            concept_names: ids.iter().map(|i| i.to_string()).collect(),
            concept_ids: ids,
            ap: assigned_ap,
            threshold: 0.9,
        }
    }

    #[test]
    fn summary_set_arithmetic() {
        let same = result(vec![vec![0.95, 0.1], vec![0.92, 0.5]]);
        let s = summarize(&same, 1).unwrap();
        assert_eq!((s.n_unique, s.polysemanticity), (1, 1.0));

        let r = result(vec![vec![0.95, 0.91, 0.2], vec![0.1, 0.99, 0.93]]);
        let s = summarize(&r, 2).unwrap();
        assert_eq!((s.n_unique, s.polysemanticity), (3, 2.0));
        assert_eq!(s.top_k[1], vec![(1, 0.99), (2, 0.93)]);
        assert!(summarize(&r, 0).is_err());
    }

    #[test]
    fn top_k_ties_by_concept_id() {
        let r = result(vec![vec![0.5, 0.7, 0.7]]);
        assert_eq!(summarize(&r, 2).unwrap().top_k[0], vec![(1, 0.7), (2, 0.7)]);
    }

    #[test]
    fn venn_two_and_three_sets() {
        let v = venn(&[("A".into(), set(&[1, 2])), ("B".into(), set(&[2, 3]))]).unwrap();
        assert_eq!(v.region(&["A"]), 1);
        assert_eq!(v.region(&["B"]), 1);
        assert_eq!(v.region(&["A", "B"]), 1);

        let s = set(&[1, 2, 3, 4, 5]);
        let v = venn(&[("z".into(), s.clone()), ("f".into(), s.clone()), ("s".into(), s)]).unwrap();
        assert_eq!(v.region(&["z", "f", "s"]), 5);
        assert_eq!(v.region_sizes.len(), 7);
        assert_eq!(v.total(), 5);

        assert!(venn(&[("A".into(), set(&[1]))]).is_err());
    }

    #[test]
    fn trajectory_edge_cases() {
        let zero = set(&[1, 2, 3]);
        let sup = set(&[2, 3, 4]);
        let t = overlap_trajectory(&[set(&[2, 3]), set(&[10, 11])], &zero, &sup).unwrap();
        assert_eq!(t[0].fine_zero_sup, 1.0);
        assert_eq!(t[0].fine_only + t[0].fine_zero + t[0].fine_sup, 0.0);
        assert_eq!(t[1].fine_only, 1.0);
        let err = overlap_trajectory(&[set(&[1]), set(&[])], &zero, &sup).unwrap_err();
        assert!(err.to_string().contains("epoch 1"));
    }
}
