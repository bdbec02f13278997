#![allow(dead_code)]

use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{Hyperparameters, RatingDataset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random dataset whose users rate between `min_rated` and `max_rated` items.
pub fn dataset(seed: u64, n: usize, m: usize, l_x: usize, l_y: usize, min_rated: usize, max_rated: usize) -> RatingDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<usize> = (0..m).collect();
    let ratings = (0..n)
        .map(|_| {
            let count = rng.gen_range(min_rated..=max_rated);
            items
                .choose_multiple(&mut rng, count)
                .map(|&j| (j, rng.gen_range(1..=5) as f64))
                .collect()
        })
        .collect();
    let x = DMatrix::from_fn(n, l_x, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
    let y = DMatrix::from_fn(m, l_y, |_, _| rng.gen_range(-1.0..1.0));
    RatingDataset::new(ratings, x, y, 5.0).unwrap()
}

pub fn small() -> RatingDataset<f64> {
    dataset(11, 12, 15, 4, 3, 2, 8)
}

pub fn hyper(k: usize) -> Hyperparameters {
    Hyperparameters { k, ..Hyperparameters::default() }
}
