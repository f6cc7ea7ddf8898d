//! Areas under the one-vs-rest ROC and precision-recall curves.

use crate::learners::FoldPredictions;

/// `(score, is_positive)` for class `class`, sorted by ascending score.
fn labelled_scores(preds: &FoldPredictions, class: usize) -> Vec<(f64, bool)> {
    let mut v: Vec<(f64, bool)> = (0..preds.len())
        .map(|i| (preds.score(i)[class], preds.classes[i] as usize == class))
        .collect();
    v.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Runs of equal scores as `(positives, negatives)`, in ascending score
/// order.
fn tie_groups(sorted: &[(f64, bool)]) -> Vec<(u64, u64)> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let mut pos = 0;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            pos += u64::from(sorted[j].1);
            j += 1;
        }
        groups.push((pos, (j - i) as u64 - pos));
        i = j;
    }
    groups
}

/// Mann-Whitney estimate of `P(score of a positive > score of a negative)`
/// with ties counted half. `None` unless both classes are present.
pub fn roc_auc(preds: &FoldPredictions, class: usize) -> Option<f64> {
    let groups = tie_groups(&labelled_scores(preds, class));
    let positives: u64 = groups.iter().map(|g| g.0).sum();
    let negatives: u64 = groups.iter().map(|g| g.1).sum();
    if positives == 0 || negatives == 0 {
        return None;
    }
    // Twice the count of (positive, negative) pairs won by the positive,
    // ties scoring one; exact in integers.
    let mut negatives_below = 0u64;
    let mut doubled: u128 = 0;
    for &(p, n) in &groups {
        doubled += p as u128 * (2 * negatives_below as u128 + n as u128);
        negatives_below += n;
    }
    Some(doubled as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Average precision: the sum over distinct score thresholds, descending,
/// of the recall increment times the precision at that threshold.
/// `None` without positives.
pub fn pr_auc(preds: &FoldPredictions, class: usize) -> Option<f64> {
    let groups = tie_groups(&labelled_scores(preds, class));
    let positives: u64 = groups.iter().map(|g| g.0).sum();
    if positives == 0 {
        return None;
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    for &(p, n) in groups.iter().rev() {
        tp += p;
        fp += n;
        if p > 0 {
            area += (p as f64 / positives as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Some(area)
}
