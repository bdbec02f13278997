use nalgebra::{DMatrix, DVector};

use crate::error::{MvmfError, Result};
use crate::scalar::Real;

/// Default maximum rating (MovieLens five-star scale).
pub const DEFAULT_R_MAX: f64 = 5.0;

/// Sparse explicit ratings plus the two side-information views.
///
/// Unobserved ratings are absent from `ratings`; formulas that need a dense
/// row materialize them as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset<T: Real> {
    n_items: usize,
    /// Per-user `(item, rating)` pairs sorted by item index.
    ratings: Vec<Vec<(usize, T)>>,
    /// `n x l_x` matrix of {0,1} dummies.
    user_attrs: DMatrix<T>,
    /// `m x l_y` real matrix.
    item_feats: DMatrix<T>,
    r_max: T,
}

impl<T: Real> RatingDataset<T> {
    /// Builds a dataset, sorting each user's ratings and validating every invariant.
    ///
    /// Duplicate `(user, item)` pairs are rejected here; ingestion code is expected
    /// to resolve them first.
    pub fn new(
        ratings: Vec<Vec<(usize, T)>>,
        user_attrs: DMatrix<T>,
        item_feats: DMatrix<T>,
        r_max: T,
    ) -> Result<Self> {
        let n = ratings.len();
        let m = item_feats.nrows();
        if user_attrs.nrows() != n {
            return Err(MvmfError::Dimension(format!(
                "user_attrs has {} rows for {} users",
                user_attrs.nrows(),
                n
            )));
        }
        if !(r_max > T::zero()) {
            return Err(MvmfError::InvalidData("r_max must be positive".into()));
        }
        let mut ratings = ratings;
        for (i, row) in ratings.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(MvmfError::InvalidData(format!("user {i} has no ratings")));
            }
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(MvmfError::InvalidData(format!(
                        "duplicate rating for user {i} item {}",
                        w[0].0
                    )));
                }
            }
            for &(j, r) in row.iter() {
                if j >= m {
                    return Err(MvmfError::InvalidData(format!(
                        "user {i} rates item {j} but only {m} items exist"
                    )));
                }
                if !(r > T::zero() && r <= r_max) {
                    return Err(MvmfError::InvalidData(format!(
                        "rating {r} of user {i} on item {j} outside (0, {r_max}]"
                    )));
                }
            }
        }
        for v in user_attrs.iter() {
            if *v != T::zero() && *v != T::one() {
                return Err(MvmfError::InvalidData(format!(
                    "user attribute {v} is not a 0/1 dummy"
                )));
            }
        }
        if item_feats.iter().any(|v| !v.is_finite()) {
            return Err(MvmfError::NonFinite("item features"));
        }
        Ok(Self {
            n_items: m,
            ratings,
            user_attrs,
            item_feats,
            r_max,
        })
    }

    pub fn n_users(&self) -> usize {
        self.ratings.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_user_attrs(&self) -> usize {
        self.user_attrs.ncols()
    }

    pub fn n_item_feats(&self) -> usize {
        self.item_feats.ncols()
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    /// Observed `(item, rating)` pairs of `user`, sorted by item.
    pub fn user_ratings(&self, user: usize) -> &[(usize, T)] {
        &self.ratings[user]
    }

    pub fn all_ratings(&self) -> &[Vec<(usize, T)>] {
        &self.ratings
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<T> {
        let row = &self.ratings[user];
        row.binary_search_by_key(&item, |&(j, _)| j)
            .ok()
            .map(|k| row[k].1)
    }

    /// Rating row with unobserved entries materialized as zero.
    pub fn dense_row(&self, user: usize) -> DVector<T> {
        let mut r = DVector::zeros(self.n_items);
        for &(j, v) in &self.ratings[user] {
            r[j] = v;
        }
        r
    }

    pub fn user_attrs(&self) -> &DMatrix<T> {
        &self.user_attrs
    }

    pub fn user_attr_row(&self, user: usize) -> DVector<T> {
        self.user_attrs.row(user).transpose()
    }

    pub fn item_feats(&self) -> &DMatrix<T> {
        &self.item_feats
    }

    pub fn n_ratings(&self) -> usize {
        self.ratings.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 2, |i, d| if (i + d) % 2 == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn sorts_and_looks_up() {
        let data = RatingDataset::new(
            vec![vec![(2, 3.0), (0, 5.0)], vec![(1, 1.0)]],
            attrs(2),
            DMatrix::zeros(3, 1),
            5.0,
        )
        .unwrap();
        assert_eq!(data.user_ratings(0), &[(0, 5.0), (2, 3.0)]);
        assert_eq!(data.rating(0, 2), Some(3.0));
        assert_eq!(data.rating(0, 1), None);
        assert_eq!(data.dense_row(1).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(data.n_ratings(), 3);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let bad_rating = RatingDataset::new(vec![vec![(0, 6.0)]], attrs(1), DMatrix::zeros(1, 1), 5.0);
        assert!(matches!(bad_rating, Err(MvmfError::InvalidData(_))));
        let bad_item = RatingDataset::new(vec![vec![(4, 1.0)]], attrs(1), DMatrix::zeros(2, 1), 5.0);
        assert!(bad_item.is_err());
        let empty_user = RatingDataset::new(vec![vec![]], attrs(1), DMatrix::zeros(2, 1), 5.0);
        assert!(empty_user.is_err());
        let non_dummy = RatingDataset::new(
            vec![vec![(0, 1.0)]],
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::zeros(1, 1),
            5.0,
        );
        assert!(non_dummy.is_err());
        let dup = RatingDataset::new(vec![vec![(0, 1.0), (0, 2.0)]], attrs(1), DMatrix::zeros(1, 1), 5.0);
        assert!(dup.is_err());
    }
}
