//! Adjusted Rand index, the best-match protocol for comparing sets of
//! object partitions, and contingency tables.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Assignments;

/// Hard labels for `n` items; label values need not be contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::TooFewObjects(0));
        }
        Ok(Partition { labels })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl TryFrom<&[usize]> for Partition {
    type Error = Error;

    fn try_from(labels: &[usize]) -> Result<Self> {
        Partition::new(labels.to_vec())
    }
}

/// Counts of items per (cluster of `a`, cluster of `b`). Rows follow the
/// sorted distinct labels of `a`, columns those of `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

impl ContingencyTable {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.col_labels.len())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut index = BTreeMap::new();
    for &l in labels {
        index.entry(l).or_insert(0);
    }
    for (pos, slot) in index.values_mut().enumerate() {
        *slot = pos;
    }
    let dense = labels.iter().map(|l| index[l]).collect();
    (index.into_keys().collect(), dense)
}

pub fn contingency_table(a: &Partition, b: &Partition) -> Result<ContingencyTable> {
    contingency_from_labels(a.labels(), b.labels())
}

fn contingency_from_labels(a: &[usize], b: &[usize]) -> Result<ContingencyTable> {
    check_lengths(a, b)?;
    let (row_labels, ra) = dense_labels(a);
    let (col_labels, cb) = dense_labels(b);
    let mut counts = vec![vec![0usize; col_labels.len()]; row_labels.len()];
    for (&i, &j) in ra.iter().zip(&cb) {
        counts[i][j] += 1;
    }
    Ok(ContingencyTable {
        row_labels,
        col_labels,
        counts,
    })
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
///
/// When the denominator vanishes (both partitions put everything in one
/// cluster, or both are all singletons) the partitions are identical and 1
/// is returned.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    ari_from_labels(a.labels(), b.labels())
}

pub(crate) fn ari_from_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() < 2 {
        return Err(Error::TooFewObjects(a.len()));
    }
    let table = contingency_from_labels(a, b)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.row_sums().into_iter().map(pairs).sum();
    let sum_b: f64 = table.col_sums().into_iter().map(pairs).sum();
    let expected = sum_a * sum_b / pairs(a.len());
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let identical = table.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() <= 1)
            && table.row_labels.len() == table.col_labels.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Best-match scores for a set of true object partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatch {
    /// For each true partition, its largest ARI against any yielded one.
    pub per_true: Vec<f64>,
    pub mean: f64,
}

/// For every true partition, the maximum ARI over all yielded partitions,
/// and the mean of those maxima. A yielded partition may be the best match
/// for several true ones.
pub fn match_views(truth: &[Partition], yielded: &[Partition]) -> Result<ViewMatch> {
    if truth.is_empty() || yielded.is_empty() {
        return Err(Error::EmptyPartitionList);
    }
    let mut per_true = Vec::with_capacity(truth.len());
    for t in truth {
        let mut best = f64::NEG_INFINITY;
        for y in yielded {
            best = best.max(adjusted_rand_index(t, y)?);
        }
        per_true.push(best);
    }
    let mean = per_true.iter().sum::<f64>() / per_true.len() as f64;
    Ok(ViewMatch { per_true, mean })
}

/// ARI between the feature-to-view memberships of two assignments over
/// the same features.
pub fn view_membership_ari(truth: &Assignments, yielded: &Assignments) -> Result<f64> {
    let shape = |a: &Assignments| a.features.iter().map(Vec::len).collect::<Vec<_>>();
    if shape(truth) != shape(yielded) {
        return Err(Error::UniverseMismatch(format!(
            "feature counts per family {:?} vs {:?}",
            shape(truth),
            shape(yielded)
        )));
    }
    ari_from_labels(&truth.view_labels(), &yielded.view_labels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureAssignment;

    fn p(labels: &[usize]) -> Partition {
        Partition::new(labels.to_vec()).unwrap()
    }

    #[test]
    fn identical_partitions_score_one() {
        assert_eq!(adjusted_rand_index(&p(&[0, 0, 1, 1, 2]), &p(&[5, 5, 3, 3, 9])).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&p(&[0, 0, 0]), &p(&[1, 1, 1])).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&p(&[0, 1, 2]), &p(&[2, 0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_against_structure_scores_zero() {
        assert_eq!(adjusted_rand_index(&p(&[0; 6]), &p(&[0, 0, 1, 1, 2, 2])).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&p(&[0; 4]), &p(&[0, 1, 2, 3])).unwrap(), 0.0);
    }

    #[test]
    fn hand_counted_case() {
        // Contingency [[1,1],[1,1]]: index 0, row/col pair sums 2 and 2,
        // expected 2*2/6, max 2, so ARI = (0 - 2/3) / (2 - 2/3) = -0.5.
        let ari = adjusted_rand_index(&p(&[1, 1, 2, 2]), &p(&[1, 2, 1, 2])).unwrap();
        assert!((ari + 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            adjusted_rand_index(&p(&[0, 1]), &p(&[0, 1, 1])),
            Err(Error::LengthMismatch(2, 3))
        ));
        assert!(matches!(adjusted_rand_index(&p(&[0]), &p(&[0])), Err(Error::TooFewObjects(1))));
        assert!(Partition::new(vec![]).is_err());
        assert!(matches!(match_views(&[], &[p(&[0, 1])]), Err(Error::EmptyPartitionList)));
    }

    #[test]
    fn contingency_cases() {
        let t = contingency_table(&p(&[0, 0, 0, 1, 1]), &p(&[0, 0, 0, 1, 1])).unwrap();
        assert_eq!(t.counts, vec![vec![3, 0], vec![0, 2]]);
        let t = contingency_table(&p(&[1, 1, 2, 2]), &p(&[1, 2, 1, 2])).unwrap();
        assert_eq!(t.counts, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(t.row_labels, vec![1, 2]);
        assert_eq!(t.total(), 4);
        assert_eq!(t.row_sums(), vec![2, 2]);
        assert!(contingency_table(&p(&[0]), &p(&[0, 1])).is_err());
    }

    #[test]
    fn match_views_takes_max_and_allows_reuse() {
        let truth = [p(&[0, 0, 1, 1]), p(&[0, 0, 1, 1])];
        let yielded = [p(&[1, 1, 0, 0]), p(&[0, 1, 0, 1])];
        let m = match_views(&truth, &yielded).unwrap();
        assert_eq!(m.per_true, vec![1.0, 1.0]);
        assert_eq!(m.mean, 1.0);
    }

    #[test]
    fn view_membership() {
        let fa = |v| FeatureAssignment {
            view: v,
            feature_cluster: 0,
        };
        let truth = Assignments {
            features: vec![vec![fa(0), fa(0), fa(1)], vec![fa(1), fa(2), fa(2)]],
            objects: vec![vec![0, 1]; 3],
        };
        assert_eq!(view_membership_ari(&truth, &truth).unwrap(), 1.0);
        let collapsed = Assignments {
            features: vec![vec![fa(4); 3], vec![fa(4); 3]],
            objects: vec![vec![0, 0]; 5],
        };
        assert_eq!(view_membership_ari(&truth, &collapsed).unwrap(), 0.0);
        let short = Assignments {
            features: vec![vec![fa(0); 3], vec![fa(0); 2]],
            objects: vec![],
        };
        assert!(matches!(view_membership_ari(&truth, &short), Err(Error::UniverseMismatch(_))));
    }
}
