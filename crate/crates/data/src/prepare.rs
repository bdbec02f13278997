//! Raw records to a `RatingDataset` with dense ids, plus seeded subsampling.

use std::collections::{BTreeMap, HashMap};

use log::{info, warn};
use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{derive_seed, RatingDataset, DEFAULT_R_MAX};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attributes::{build_item_feats, build_user_attrs, ITEM_COMPONENTS};
use crate::error::{DataError, Result};
use crate::movielens::RawMovieLens;

/// A dataset together with the original ids of its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub data: RatingDataset<f64>,
    /// Dense user index to MovieLens user id.
    pub user_ids: Vec<u32>,
    /// Dense item index to MovieLens movie id.
    pub movie_ids: Vec<u32>,
    pub attr_names: Vec<String>,
}

/// Users and items are the ids that occur in the ratings, in ascending order.
/// Item features are tag-genome PCA scores (zero without a genome).
pub fn prepare(raw: &RawMovieLens, components: usize) -> Result<PreparedData> {
    let users: BTreeMap<u32, usize> = raw.ratings.iter().map(|r| (r.user_id, 0)).collect();
    let movies: BTreeMap<u32, usize> = raw.ratings.iter().map(|r| (r.movie_id, 0)).collect();
    let user_ids: Vec<u32> = users.keys().copied().collect();
    let movie_ids: Vec<u32> = movies.keys().copied().collect();
    let ui: HashMap<u32, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mi: HashMap<u32, usize> = movie_ids.iter().enumerate().map(|(i, &m)| (m, i)).collect();

    let mut ratings = vec![Vec::new(); user_ids.len()];
    for r in &raw.ratings {
        ratings[ui[&r.user_id]].push((mi[&r.movie_id], f64::from(r.rating)));
    }
    let sparse = ratings.iter().filter(|r| r.len() < 20).count();
    if sparse > 0 {
        warn!("{sparse} users have fewer than 20 ratings");
    }

    let records: HashMap<u32, &crate::movielens::UserRecord> = raw.users.iter().map(|u| (u.user_id, u)).collect();
    let ordered = user_ids
        .iter()
        .map(|id| records.get(id).map(|&u| u.clone()).ok_or_else(|| DataError::Invalid(format!("no record for user {id}"))))
        .collect::<Result<Vec<_>>>()?;
    let (x, attr_names) = build_user_attrs(&ordered);

    let y = match &raw.genome {
        Some(g) => {
            let (aligned, present) = g.aligned(&movie_ids);
            let missing = present.iter().filter(|p| !**p).count();
            if missing > 0 {
                warn!("{missing} of {} movies have no genome row; their features are zero", movie_ids.len());
            }
            build_item_feats(&aligned, &present, components)
        }
        None => {
            warn!("no tag genome supplied; item features are zero");
            DMatrix::zeros(movie_ids.len(), components)
        }
    };
    let data = RatingDataset::new(ratings, x, y, DEFAULT_R_MAX)?;
    info!("prepared {} users x {} items, {} ratings", data.n_users(), data.n_items(), data.n_ratings());
    Ok(PreparedData { data, user_ids, movie_ids, attr_names })
}

/// `prepare` with the default 20 components.
pub fn prepare_default(raw: &RawMovieLens) -> Result<PreparedData> {
    prepare(raw, ITEM_COMPONENTS)
}

/// Keeps the `n_items` most-rated items (ties to the smaller index), then a
/// seeded sample of `n_users` users with at least `min_ratings` ratings among them.
pub fn subsample(prepared: &PreparedData, n_users: usize, n_items: usize, min_ratings: usize, seed: u64) -> Result<PreparedData> {
    let data = &prepared.data;
    let mut counts = vec![0usize; data.n_items()];
    for row in data.all_ratings() {
        for &(j, _) in row {
            counts[j] += 1;
        }
    }
    let mut items: Vec<usize> = (0..data.n_items()).collect();
    items.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    items.truncate(n_items);
    items.sort_unstable();
    let new_index: HashMap<usize, usize> = items.iter().enumerate().map(|(k, &j)| (j, k)).collect();

    let eligible: Vec<usize> = (0..data.n_users())
        .filter(|&i| data.user_ratings(i).iter().filter(|(j, _)| new_index.contains_key(j)).count() >= min_ratings.max(1))
        .collect();
    if eligible.len() < n_users {
        return Err(DataError::Invalid(format!(
            "only {} users have {} ratings among the top {} items; {} requested",
            eligible.len(),
            min_ratings.max(1),
            items.len(),
            n_users
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5B5A));
    let mut users: Vec<usize> = eligible.choose_multiple(&mut rng, n_users).copied().collect();
    users.sort_unstable();

    let ratings = users
        .iter()
        .map(|&i| data.user_ratings(i).iter().filter_map(|&(j, r)| new_index.get(&j).map(|&k| (k, r))).collect())
        .collect();
    let x = data.user_attrs().select_rows(&users);
    let y = data.item_feats().select_rows(&items);
    Ok(PreparedData {
        data: RatingDataset::new(ratings, x, y, data.r_max())?,
        user_ids: users.iter().map(|&i| prepared.user_ids[i]).collect(),
        movie_ids: items.iter().map(|&j| prepared.movie_ids[j]).collect(),
        attr_names: prepared.attr_names.clone(),
    })
}
