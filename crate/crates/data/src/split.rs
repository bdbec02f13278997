//! Train/test partitions for the three evaluation scenarios.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use log::warn;
use mvmf_core::{derive_seed, RatingDataset};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Per-user holdout of ratings; every test user and item has training ratings.
    ExistingUserItem,
    /// Held-out items have no training ratings.
    ColdStartItem,
    /// Held-out users have no training ratings.
    ColdStartUser,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::ExistingUserItem, Scenario::ColdStartItem, Scenario::ColdStartUser];

    pub fn default_test_fraction(self) -> f64 {
        match self {
            Scenario::ExistingUserItem => 0.2,
            Scenario::ColdStartItem | Scenario::ColdStartUser => 0.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ExistingUserItem => "existing",
            Scenario::ColdStartItem => "cold-item",
            Scenario::ColdStartUser => "cold-user",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.to_ascii_lowercase())
            .ok_or_else(|| DataError::Invalid(format!("unknown scenario {s:?} (existing, cold-item, cold-user)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub scenario: Scenario,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self { scenario, test_fraction: scenario.default_test_fraction(), seed }
    }
}

/// Test rating addressed by the original dataset's indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestRating {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Same item indices as the source; users renumbered densely.
    pub train: RatingDataset<f64>,
    /// Train user index to source user index.
    pub train_users: Vec<usize>,
    pub test: Vec<TestRating>,
    /// Held-out users (ColdStartUser) in source indices.
    pub cold_users: Vec<usize>,
    /// Held-out items (ColdStartItem).
    pub cold_items: Vec<usize>,
}

impl Split {
    /// Source user index to train index.
    pub fn train_index(&self) -> HashMap<usize, usize> {
        self.train_users.iter().enumerate().map(|(t, &s)| (s, t)).collect()
    }
}

fn held_out_count(total: usize, fraction: f64) -> usize {
    ((total as f64 * fraction).round() as usize).min(total)
}

fn restrict(data: &RatingDataset<f64>, users: &[usize], keep: impl Fn(usize, usize) -> bool) -> Result<RatingDataset<f64>> {
    let ratings = users.iter().map(|&i| data.user_ratings(i).iter().copied().filter(|&(j, _)| keep(i, j)).collect()).collect();
    Ok(RatingDataset::new(ratings, data.user_attrs().select_rows(users), data.item_feats().clone(), data.r_max())?)
}

/// Disjoint train/test partition under `spec`.
pub fn split(data: &RatingDataset<f64>, spec: &SplitSpec) -> Result<Split> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(DataError::Invalid(format!("test fraction {} not in (0, 1)", spec.test_fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x5917));
    let n = data.n_users();
    match spec.scenario {
        Scenario::ExistingUserItem => {
            let mut test_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
            let mut too_few = 0usize;
            for i in 0..n {
                let row = data.user_ratings(i);
                if row.len() < 2 {
                    too_few += 1;
                    continue;
                }
                let k = held_out_count(row.len(), spec.test_fraction).clamp(1, row.len() - 1);
                for &(j, _) in row.choose_multiple(&mut rng, k) {
                    test_pairs.insert((i, j));
                }
            }
            if too_few > 0 {
                warn!("{too_few} users with fewer than 2 ratings keep all ratings in train");
            }
            let users: Vec<usize> = (0..n).collect();
            let train = restrict(data, &users, |i, j| !test_pairs.contains(&(i, j)))?;
            let test = test_pairs
                .iter()
                .map(|&(user, item)| TestRating { user, item, rating: data.rating(user, item).expect("held-out pair is rated") })
                .collect();
            Ok(Split { train, train_users: users, test, cold_users: Vec::new(), cold_items: Vec::new() })
        }
        Scenario::ColdStartItem => {
            let rated: Vec<usize> = {
                let mut seen = BTreeSet::new();
                for row in data.all_ratings() {
                    seen.extend(row.iter().map(|&(j, _)| j));
                }
                seen.into_iter().collect()
            };
            let k = held_out_count(rated.len(), spec.test_fraction);
            let mut cold: Vec<usize> = rated.choose_multiple(&mut rng, k).copied().collect();
            cold.sort_unstable();
            let cold_set: BTreeSet<usize> = cold.iter().copied().collect();
            let (keep, dropped): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| data.user_ratings(i).iter().any(|(j, _)| !cold_set.contains(j)));
            if !dropped.is_empty() {
                warn!("{} users rated only held-out items and are left out of train and test", dropped.len());
            }
            let train = restrict(data, &keep, |_, j| !cold_set.contains(&j))?;
            let test = keep
                .iter()
                .flat_map(|&user| {
                    data.user_ratings(user)
                        .iter()
                        .filter(|(j, _)| cold_set.contains(j))
                        .map(move |&(item, rating)| TestRating { user, item, rating })
                })
                .collect();
            Ok(Split { train, train_users: keep, test, cold_users: Vec::new(), cold_items: cold })
        }
        Scenario::ColdStartUser => {
            let all: Vec<usize> = (0..n).collect();
            let k = held_out_count(n, spec.test_fraction).min(n.saturating_sub(1));
            let mut cold: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
            cold.sort_unstable();
            let cold_set: BTreeSet<usize> = cold.iter().copied().collect();
            let keep: Vec<usize> = all.into_iter().filter(|i| !cold_set.contains(i)).collect();
            let train = restrict(data, &keep, |_, _| true)?;
            let test = cold
                .iter()
                .flat_map(|&user| data.user_ratings(user).iter().map(move |&(item, rating)| TestRating { user, item, rating }))
                .collect();
            Ok(Split { train, train_users: keep, test, cold_users: cold, cold_items: Vec::new() })
        }
    }
}
