//! MovieLens-shaped synthetic records, used when the real files are absent.
//!
//! Users and movies carry hidden taste vectors; demographics shift the user
//! vector, ratings come from a biased low-rank model with Gaussian noise, and
//! tag relevances are a logistic function of the movie vector.

use mvmf_core::derive_seed;
use mvmf_core::nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{DataError, Result};
use crate::movielens::{MovieRecord, RatingRecord, RawMovieLens, TagGenome, UserRecord};

/// MovieLens-1M age codes and their approximate shares.
const AGES: [(u32, f64); 7] = [(1, 0.04), (18, 0.18), (25, 0.35), (35, 0.20), (45, 0.09), (50, 0.08), (56, 0.06)];
const GENRES: [&str; 6] = ["Action", "Comedy", "Drama", "Romance", "Sci-Fi", "Thriller"];

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpec {
    pub users: usize,
    pub movies: usize,
    pub tags: usize,
    pub latent: usize,
    pub min_ratings: usize,
    pub mean_ratings: f64,
    /// Standard deviation of the rating noise before rounding.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { users: 1000, movies: 800, tags: 256, latent: 6, min_ratings: 20, mean_ratings: 70.0, noise: 0.6, seed: 2024 }
    }
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> DMatrix<f64> {
    let normal = Normal::new(0.0, sd).expect("finite positive sd");
    DMatrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

/// Generates ratings, user records, movie records and a tag genome.
pub fn surrogate_movielens(spec: &SurrogateSpec) -> Result<RawMovieLens> {
    if spec.users == 0 || spec.movies < spec.min_ratings || spec.latent == 0 {
        return Err(DataError::Invalid("surrogate needs users, a latent size and at least min_ratings movies".into()));
    }
    let k = spec.latent;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x5055));

    // demographic offsets on the taste vector
    let age_off = gaussian_matrix(AGES.len(), k, 0.35, &mut rng);
    let gender_off = gaussian_matrix(2, k, 0.35, &mut rng);
    let occ_off = gaussian_matrix(21, k, 0.35, &mut rng);
    let region_off = gaussian_matrix(10, k, 0.25, &mut rng);
    let age_weights: Vec<f64> = AGES.iter().map(|a| a.1).collect();

    let mut users = Vec::with_capacity(spec.users);
    let mut p = DMatrix::zeros(spec.users, k);
    let base = gaussian_matrix(spec.users, k, 0.45, &mut rng);
    for i in 0..spec.users {
        let age_idx = rand_distr::WeightedIndex::new(&age_weights).expect("positive weights").sample(&mut rng);
        let female = rng.gen_bool(0.28);
        let occupation = rng.gen_range(0..21u32);
        let zip_digit = rng.gen_range(0..10usize);
        let zipcode = format!("{zip_digit}{:04}", rng.gen_range(0..10_000));
        let row = base.row(i) + age_off.row(age_idx) + gender_off.row(usize::from(!female)) + occ_off.row(occupation as usize)
            + region_off.row(zip_digit);
        p.set_row(i, &row);
        users.push(UserRecord {
            user_id: i as u32 + 1,
            gender: if female { 'F' } else { 'M' },
            age: AGES[age_idx].0,
            occupation,
            zipcode,
        });
    }

    let q = gaussian_matrix(spec.movies, k, 0.55, &mut rng);
    let user_bias = gaussian_matrix(spec.users, 1, 0.3, &mut rng);
    let item_bias = gaussian_matrix(spec.movies, 1, 0.4, &mut rng);
    // Zipf-like popularity over a random permutation of movies
    let mut rank: Vec<usize> = (0..spec.movies).collect();
    rank.shuffle(&mut rng);
    let popularity: Vec<f64> = (0..spec.movies).map(|j| 1.0 / (rank[j] as f64 + 10.0).powf(0.9)).collect();
    let movies_idx: Vec<usize> = (0..spec.movies).collect();

    let extra = Exp::new(1.0 / (spec.mean_ratings - spec.min_ratings as f64).max(1.0)).expect("positive rate");
    let noise = Normal::new(0.0, spec.noise.max(1e-12)).expect("finite sd");
    let mut ratings = Vec::new();
    let mut clock = 956_703_932u64;
    for i in 0..spec.users {
        let count = (spec.min_ratings + extra.sample(&mut rng).round() as usize).min(spec.movies);
        let chosen = movies_idx
            .choose_multiple_weighted(&mut rng, count, |&j| popularity[j])
            .map_err(|e| DataError::Invalid(format!("popularity weights: {e}")))?;
        let mut chosen: Vec<usize> = chosen.copied().collect();
        chosen.sort_unstable();
        for j in chosen {
            let score = 3.6 + user_bias[i] + item_bias[j] + p.row(i).dot(&q.row(j)) + noise.sample(&mut rng);
            clock += rng.gen_range(1..400);
            ratings.push(RatingRecord {
                user_id: i as u32 + 1,
                movie_id: j as u32 + 1,
                rating: score.round().clamp(1.0, 5.0) as u8,
                timestamp: clock,
            });
        }
    }

    let movies = (0..spec.movies)
        .map(|j| MovieRecord {
            movie_id: j as u32 + 1,
            title: format!("Surrogate Movie {} ({})", j + 1, 1950 + j % 50),
            genres: vec![GENRES[j % GENRES.len()].to_string()],
        })
        .collect();

    let tag_load = gaussian_matrix(k, spec.tags, 1.0, &mut rng);
    let tag_noise = Normal::new(0.0, 0.3).expect("finite sd");
    let logits = &q * &tag_load;
    let relevance = logits.map(|z| {
        let z = z + tag_noise.sample(&mut rng) - 1.0;
        1.0 / (1.0 + (-z).exp())
    });
    let genome = TagGenome {
        movie_ids: (1..=spec.movies as u32).collect(),
        tag_ids: (1..=spec.tags as u32).collect(),
        relevance,
    };
    Ok(RawMovieLens { ratings, users, movies, genome: Some(genome) })
}
