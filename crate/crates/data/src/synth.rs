//! Synthetic instances with known generating factors.

use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{FactorModel, RatingDataset, DEFAULT_R_MAX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Result};

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub data: RatingDataset<f64>,
    /// Generating factors; `p q^T` before rounding gave the ratings.
    pub truth: FactorModel<f64>,
}

/// Ratings are `clip(round(p_i . q_j), 1, 5)` on a random `density` fraction of
/// pairs (at least one per user); attributes are `[p_i . u_d > 0]`; item
/// features are exactly `Q V^T`. P, Q entries are U[0, sqrt(12/K)] so the
/// mean of `p . q` is 3; U, V entries are U[-1, 1].
pub fn synth_instance(
    n: usize,
    m: usize,
    l_x: usize,
    l_y: usize,
    k_true: usize,
    density: f64,
    seed: u64,
) -> Result<SynthInstance> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(DataError::Invalid(format!("density {density} not in (0, 1]")));
    }
    if m == 0 {
        return Err(DataError::Invalid("at least one item is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if k_true == 0 { 0.0 } else { (12.0 / k_true as f64).sqrt() };
    let p = DMatrix::from_fn(n, k_true, |_, _| rng.gen_range(0.0..=scale));
    let q = DMatrix::from_fn(m, k_true, |_, _| rng.gen_range(0.0..=scale));
    let u = DMatrix::from_fn(l_x, k_true, |_, _| rng.gen_range(-1.0..=1.0));
    let v = DMatrix::from_fn(l_y, k_true, |_, _| rng.gen_range(-1.0..=1.0));
    let dense = &p * q.transpose();
    let ratings = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = (0..m)
                .filter(|_| density >= 1.0 || rng.gen_bool(density))
                .map(|j| (j, dense[(i, j)].round().clamp(1.0, DEFAULT_R_MAX)))
                .collect();
            if row.is_empty() {
                let j = rng.gen_range(0..m);
                row.push((j, dense[(i, j)].round().clamp(1.0, DEFAULT_R_MAX)));
            }
            row
        })
        .collect();
    let x = (&p * u.transpose()).map(|s| if s > 0.0 { 1.0 } else { 0.0 });
    let y = &q * v.transpose();
    let data = RatingDataset::new(ratings, x, y, DEFAULT_R_MAX)?;
    Ok(SynthInstance { data, truth: FactorModel::new(p, q, u, v)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_rates_everything() {
        let s = synth_instance(5, 7, 2, 2, 3, 1.0, 1).unwrap();
        assert_eq!(s.data.n_ratings(), 35);
    }

    #[test]
    fn zero_rank_gives_constant_ratings() {
        let s = synth_instance(4, 6, 2, 2, 0, 0.5, 2).unwrap();
        assert!(s.data.all_ratings().iter().flatten().all(|&(_, r)| r == 1.0));
    }

    #[test]
    fn same_seed_same_instance() {
        let a = synth_instance(6, 9, 3, 2, 4, 0.4, 3).unwrap();
        let b = synth_instance(6, 9, 3, 2, 4, 0.4, 3).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.truth, b.truth);
        assert!(synth_instance(6, 9, 3, 2, 4, 0.0, 3).is_err());
    }
}
