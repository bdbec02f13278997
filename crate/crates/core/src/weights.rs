use std::collections::BTreeSet;

use crate::dataset::RatingDataset;
use crate::scalar::Real;

/// Policy for the per-entry weight `c_ij` on the rating error.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme<T> {
    /// 1 on rated items, 0 elsewhere.
    ObsOnly,
    /// 1 on rated items, `alpha` on every unrated item.
    InclUnc { alpha: T },
    /// 1 on rated items, `alpha` on the user's sampled unrated items, 0 elsewhere.
    Sampled {
        alpha: T,
        sampled: Vec<BTreeSet<usize>>,
    },
}

/// One term of a user's weighted rating loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEntry<T> {
    pub item: usize,
    /// Zero for unrated items.
    pub rating: T,
    pub weight: T,
}

impl<T: Real> WeightScheme<T> {
    pub fn weight(&self, user: usize, item: usize, rated: bool) -> T {
        if rated {
            return T::one();
        }
        match self {
            WeightScheme::ObsOnly => T::zero(),
            WeightScheme::InclUnc { alpha } => *alpha,
            WeightScheme::Sampled { alpha, sampled } => {
                if sampled.get(user).is_some_and(|s| s.contains(&item)) {
                    *alpha
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Items whose gradient the user uploads, in item order: rated items for
    /// ObsOnly, every item for InclUnc, rated plus sampled items for Sampled.
    pub fn active_items(&self, data: &RatingDataset<T>, user: usize) -> Vec<WeightedEntry<T>> {
        let rated = data.user_ratings(user);
        match self {
            WeightScheme::ObsOnly => rated
                .iter()
                .map(|&(item, rating)| WeightedEntry { item, rating, weight: T::one() })
                .collect(),
            WeightScheme::InclUnc { alpha } => {
                let mut out = Vec::with_capacity(data.n_items());
                let mut it = rated.iter().peekable();
                for item in 0..data.n_items() {
                    match it.peek() {
                        Some(&&(j, r)) if j == item => {
                            it.next();
                            out.push(WeightedEntry { item, rating: r, weight: T::one() });
                        }
                        _ => out.push(WeightedEntry { item, rating: T::zero(), weight: *alpha }),
                    }
                }
                out
            }
            WeightScheme::Sampled { alpha, sampled } => {
                let mut out: Vec<WeightedEntry<T>> = rated
                    .iter()
                    .map(|&(item, rating)| WeightedEntry { item, rating, weight: T::one() })
                    .collect();
                if let Some(set) = sampled.get(user) {
                    out.extend(set.iter().filter(|&&j| data.rating(user, j).is_none()).map(|&item| {
                        WeightedEntry { item, rating: T::zero(), weight: *alpha }
                    }));
                }
                out.sort_by_key(|e| e.item);
                out
            }
        }
    }

    pub fn alpha(&self) -> Option<T> {
        match self {
            WeightScheme::ObsOnly => None,
            WeightScheme::InclUnc { alpha } | WeightScheme::Sampled { alpha, .. } => Some(*alpha),
        }
    }
}
