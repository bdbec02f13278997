//! Top-10 ranking quality: NDCG@10 and macro-averaged precision / recall / F1.

use std::collections::HashMap;

/// Length of the recommended list.
pub const TOP_K: usize = 10;
/// Default relevance threshold on the five-star scale (inclusive).
pub const DEFAULT_RELEVANCE: f64 = 4.0;

/// Per-user top-k lists of `(item, predicted rating)`, sorted by prediction descending.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRecommendations {
    pub lists: Vec<(usize, Vec<(usize, f64)>)>,
    pub threshold: f64,
}

impl RankedRecommendations {
    /// Ranks each user's candidates by score. Ties break on the smaller item id so
    /// the ordering is deterministic.
    pub fn from_scores<F>(candidates: &[(usize, Vec<usize>)], k: usize, mut score: F) -> Self
    where
        F: FnMut(usize, usize) -> f64,
    {
        let lists = candidates
            .iter()
            .map(|(user, items)| {
                let mut scored: Vec<(usize, f64)> = items.iter().map(|&j| (j, score(*user, j))).collect();
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                scored.truncate(k);
                (*user, scored)
            })
            .collect();
        Self { lists, threshold: DEFAULT_RELEVANCE }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }
}

/// Held-out true ratings per user.
pub type Truth = HashMap<usize, HashMap<usize, f64>>;

/// Gain of a ranked position; `None` (no held-out rating) gains nothing.
fn gain(rating: Option<f64>) -> f64 {
    match rating {
        Some(x) if x > 0.0 => 2f64.powf(x - 1.0),
        _ => 0.0,
    }
}

fn dcg(ratings: impl Iterator<Item = Option<f64>>) -> f64 {
    ratings
        .take(TOP_K)
        .enumerate()
        .map(|(pos, x)| gain(x) / ((pos + 2) as f64).log2())
        .sum()
}

/// NDCG@10 of one list. `None` if the list is empty or the ideal DCG is zero.
///
/// Items missing from `truth` contribute no gain. The ideal ordering is taken
/// over all of the user's truth ratings.
pub fn user_ndcg(list: &[(usize, f64)], truth: &HashMap<usize, f64>) -> Option<f64> {
    if list.is_empty() {
        return None;
    }
    let got = dcg(list.iter().map(|(j, _)| truth.get(j).copied()));
    let mut ideal: Vec<f64> = truth.values().copied().filter(|&x| x > 0.0).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let best = dcg(ideal.into_iter().map(Some));
    if best <= 0.0 {
        return None;
    }
    Some(got / best)
}

/// Mean NDCG@10 over users with a non-empty list and non-zero ideal DCG.
/// Returns `None` if no user qualifies.
pub fn ndcg_at_10(recs: &RankedRecommendations, truth: &Truth) -> Option<f64> {
    let empty = HashMap::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for (user, list) in &recs.lists {
        if list.is_empty() {
            log::warn!("user {user} has an empty recommendation list; skipped");
            continue;
        }
        if let Some(v) = user_ndcg(list, truth.get(user).unwrap_or(&empty)) {
            total += v;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Users contributing to the precision mean.
    pub users: usize,
    /// Users contributing to the recall mean (at least one relevant truth item).
    pub recall_users: usize,
}

/// Macro-averaged precision and recall; F1 is the harmonic mean of the two
/// aggregated values. Users with no relevant truth items are left out of the
/// recall mean; users with empty lists are left out of both.
pub fn precision_recall_f1(recs: &RankedRecommendations, truth: &Truth) -> PrecisionRecall {
    let empty = HashMap::new();
    let relevant = |x: f64| x >= recs.threshold;
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    let (mut p_n, mut r_n) = (0usize, 0usize);
    for (user, list) in &recs.lists {
        if list.is_empty() {
            continue;
        }
        let t = truth.get(user).unwrap_or(&empty);
        let hits = list.iter().filter(|(j, _)| t.get(j).is_some_and(|&x| relevant(x))).count();
        p_sum += hits as f64 / list.len() as f64;
        p_n += 1;
        let positives = t.values().filter(|&&x| relevant(x)).count();
        if positives > 0 {
            r_sum += hits as f64 / positives as f64;
            r_n += 1;
        }
    }
    let precision = if p_n > 0 { p_sum / p_n as f64 } else { 0.0 };
    let recall = if r_n > 0 { r_sum / r_n as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    PrecisionRecall { precision, recall, f1, users: p_n, recall_users: r_n }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth_of(rows: &[(usize, &[(usize, f64)])]) -> Truth {
        rows.iter().map(|(u, r)| (*u, r.iter().copied().collect())).collect()
    }

    fn recs(lists: Vec<(usize, Vec<usize>)>) -> RankedRecommendations {
        RankedRecommendations {
            lists: lists
                .into_iter()
                .map(|(u, items)| {
                    let n = items.len();
                    (u, items.into_iter().enumerate().map(|(i, j)| (j, (n - i) as f64)).collect())
                })
                .collect(),
            threshold: DEFAULT_RELEVANCE,
        }
    }

    #[test]
    fn ideal_ordering_is_one() {
        let truth = truth_of(&[(0, &[(1, 5.0), (2, 3.0), (3, 1.0)])]);
        let v = ndcg_at_10(&recs(vec![(0, vec![1, 2, 3])]), &truth).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_relevant_last_vs_first() {
        let items: Vec<usize> = (0..10).collect();
        let truth = truth_of(&[(0, &[(9, 5.0)])]);
        let last = ndcg_at_10(&recs(vec![(0, items.clone())]), &truth).unwrap();
        let mut first_items = items;
        first_items.rotate_right(1);
        let first = ndcg_at_10(&recs(vec![(0, first_items)]), &truth).unwrap();
        assert!((first - 1.0).abs() < 1e-15);
        assert!((last / first - 2f64.log2() / 11f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn zero_idcg_and_empty_lists_excluded() {
        let truth = truth_of(&[(0, &[(1, 5.0)]), (1, &[])]);
        let r = recs(vec![(0, vec![1]), (1, vec![3]), (2, vec![])]);
        assert_eq!(ndcg_at_10(&r, &truth), Some(1.0));
        assert_eq!(ndcg_at_10(&recs(vec![(1, vec![3])]), &truth), None);
    }

    #[test]
    fn precision_recall_trivial() {
        let truth = truth_of(&[(0, &[(1, 5.0), (2, 4.0)])]);
        let all = precision_recall_f1(&recs(vec![(0, vec![1, 2])]), &truth);
        assert_eq!((all.precision, all.recall, all.f1), (1.0, 1.0, 1.0));
        let none = precision_recall_f1(&recs(vec![(0, vec![7, 8])]), &truth);
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_user_hand_counts() {
        // user 0: list {1,2,3,4}, relevant truth {1,3,9} -> P = 2/4, R = 2/3
        // user 1: list {5,6}, relevant truth {6} (5 rated 3) -> P = 1/2, R = 1
        let truth = truth_of(&[
            (0, &[(1, 4.0), (2, 2.0), (3, 5.0), (9, 4.0)]),
            (1, &[(5, 3.0), (6, 4.5)]),
        ]);
        let m = precision_recall_f1(&recs(vec![(0, vec![1, 2, 3, 4]), (1, vec![5, 6])]), &truth);
        let p = (0.5 + 0.5) / 2.0;
        let r = (2.0 / 3.0 + 1.0) / 2.0;
        assert!((m.precision - p).abs() < 1e-15);
        assert!((m.recall - r).abs() < 1e-15);
        assert!((m.f1 - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert_eq!((m.users, m.recall_users), (2, 2));
    }

    #[test]
    fn recall_skips_users_without_positives() {
        let truth = truth_of(&[(0, &[(1, 5.0)]), (1, &[(2, 1.0)])]);
        let m = precision_recall_f1(&recs(vec![(0, vec![1]), (1, vec![2])]), &truth);
        assert_eq!(m.recall_users, 1);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.precision, 0.5);
    }

    #[test]
    fn ranking_sorts_and_truncates() {
        let r = RankedRecommendations::from_scores(&[(0, (0..15).collect())], TOP_K, |_, j| (j % 7) as f64);
        let list = &r.lists[0].1;
        assert_eq!(list.len(), 10);
        assert!(list.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(list[0], (6, 6.0));
    }
}
