#![allow(dead_code)]

use std::collections::BTreeSet;

use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{FactorModel, RatingDataset, WeightScheme};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub data: RatingDataset<f64>,
    pub model: FactorModel<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Small random problem: every user rates at least one item, ratings in 1..=5.
pub fn random_instance(seed: u64, n: usize, m: usize, l_x: usize, l_y: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<usize> = (0..m).collect();
    let ratings = (0..n)
        .map(|_| {
            let count = rng.gen_range(1..=m);
            items
                .choose_multiple(&mut rng, count)
                .map(|&j| (j, rng.gen_range(1..=5) as f64))
                .collect()
        })
        .collect();
    let x = DMatrix::from_fn(n, l_x, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    let y = DMatrix::from_fn(m, l_y, |_, _| rng.gen_range(-1.0..1.0));
    let data = RatingDataset::new(ratings, x, y, 5.0).unwrap();
    let mut gauss = |rows: usize| DMatrix::from_fn(rows, k, |_, _| rng.gen_range(-1.0..1.0));
    let model = FactorModel::new(gauss(n), gauss(m), gauss(l_x), gauss(l_y)).unwrap();
    let lambda1 = rng.gen_range(0.1..2.0);
    let lambda2 = rng.gen_range(0.01..3.0);
    Instance { data, model, lambda1, lambda2 }
}

/// The three weight schemes on `data`, sampling about half of each user's unrated items.
pub fn schemes(data: &RatingDataset<f64>, seed: u64) -> Vec<WeightScheme<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let sampled = (0..data.n_users())
        .map(|i| {
            (0..data.n_items())
                .filter(|&j| data.rating(i, j).is_none() && rng.gen_bool(0.5))
                .collect::<BTreeSet<usize>>()
        })
        .collect();
    vec![
        WeightScheme::ObsOnly,
        WeightScheme::InclUnc { alpha: 0.1 },
        WeightScheme::Sampled { alpha: 0.1, sampled },
    ]
}
