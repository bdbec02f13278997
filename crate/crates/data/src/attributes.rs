//! User dummies (age bins, gender, occupation, region) and tag-genome PCA features.

use std::collections::BTreeSet;

use log::warn;
use mvmf_core::nalgebra::{DMatrix, DVector};

use crate::movielens::UserRecord;

pub const AGE_BINS: usize = 7;
pub const ITEM_COMPONENTS: usize = 20;

/// Census region of a ZIP code by its first digit.
pub fn zip_region(zip: &str) -> &'static str {
    match zip.trim().chars().next() {
        Some('0' | '1') => "northeast",
        Some('2' | '3' | '7') => "south",
        Some('4' | '5' | '6') => "midwest",
        Some('8' | '9') => "west",
        _ => "other",
    }
}

pub const REGIONS: [&str; 5] = ["northeast", "midwest", "south", "west", "other"];

/// Equal-width bin of `age` over `[min, max]`, 0-based.
pub fn age_bin(age: u32, min: u32, max: u32) -> usize {
    if max <= min {
        return 0;
    }
    let frac = f64::from(age - min) / f64::from(max - min);
    ((frac * AGE_BINS as f64).floor() as usize).min(AGE_BINS - 1)
}

/// One-hot per group: 7 age bins, gender (F, M), occupation codes present in
/// `users` (ascending), and 5 regions. Returns the matrix and column names.
pub fn build_user_attrs(users: &[UserRecord]) -> (DMatrix<f64>, Vec<String>) {
    let min = users.iter().map(|u| u.age).min().unwrap_or(0);
    let max = users.iter().map(|u| u.age).max().unwrap_or(0);
    let occupations: Vec<u32> = users.iter().map(|u| u.occupation).collect::<BTreeSet<_>>().into_iter().collect();
    let mut names: Vec<String> = (0..AGE_BINS).map(|b| format!("age_bin_{}", b + 1)).collect();
    names.push("gender_F".into());
    names.push("gender_M".into());
    names.extend(occupations.iter().map(|o| format!("occupation_{o}")));
    names.extend(REGIONS.iter().map(|r| format!("region_{r}")));
    let occ_base = AGE_BINS + 2;
    let region_base = occ_base + occupations.len();
    let mut x = DMatrix::zeros(users.len(), names.len());
    let mut unknown = 0usize;
    for (i, u) in users.iter().enumerate() {
        x[(i, age_bin(u.age, min, max))] = 1.0;
        x[(i, AGE_BINS + usize::from(u.gender == 'M'))] = 1.0;
        let occ = occupations.binary_search(&u.occupation).expect("occupation collected above");
        x[(i, occ_base + occ)] = 1.0;
        let region = zip_region(&u.zipcode);
        unknown += usize::from(region == "other");
        let r = REGIONS.iter().position(|&n| n == region).expect("region in table");
        x[(i, region_base + r)] = 1.0;
    }
    if unknown > 0 {
        warn!("{unknown} users with a ZIP code outside the region table");
    }
    (x, names)
}

/// Principal components of a row-sample matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// `rows x components`
    pub scores: DMatrix<f64>,
    /// `columns x components`, unit columns (zero for degenerate directions).
    pub loadings: DMatrix<f64>,
    /// Every singular value of the centered matrix, descending.
    pub singular_values: Vec<f64>,
}

/// Centers the columns and projects onto the top `components` right singular
/// vectors. Each loading is signed so its largest-magnitude entry is positive.
/// Directions with singular value below `1e-10 * max` are zeroed.
pub fn fit_pca(x: &DMatrix<f64>, components: usize) -> Pca {
    let (rows, cols) = x.shape();
    let mean = if rows == 0 { DVector::zeros(cols) } else { x.row_mean().transpose() };
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut scores = DMatrix::zeros(rows, components);
    let mut loadings = DMatrix::zeros(cols, components);
    if rows == 0 || cols == 0 {
        return Pca { mean, scores, loadings, singular_values: Vec::new() };
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let mut degenerate = 0usize;
    for c in 0..components {
        let usable = c < order.len() && top > 0.0 && singular_values[c] > 1e-10 * top;
        if !usable {
            degenerate += 1;
            continue;
        }
        let mut v = v_t.row(order[c]).transpose();
        let lead = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if lead < 0.0 {
            v.neg_mut();
        }
        scores.set_column(c, &(&centered * &v));
        loadings.set_column(c, &v);
    }
    if degenerate > 0 {
        warn!("{degenerate} of {components} principal components are degenerate and left at zero");
    }
    Pca { mean, scores, loadings, singular_values }
}

/// PCA features for items: fitted on rows with genome data; rows without it stay zero.
pub fn build_item_feats(aligned: &DMatrix<f64>, present: &[bool], components: usize) -> DMatrix<f64> {
    let rows: Vec<usize> = (0..aligned.nrows()).filter(|&r| present[r]).collect();
    let sub = aligned.select_rows(&rows);
    let pca = fit_pca(&sub, components);
    let mut out = DMatrix::zeros(aligned.nrows(), components);
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(r).copy_from(&pca.scores.row(k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(id: u32, gender: char, age: u32, occupation: u32, zip: &str) -> UserRecord {
        UserRecord { user_id: id, gender, age, occupation, zipcode: zip.into() }
    }

    #[test]
    fn rows_sum_to_group_count() {
        let users = vec![user(1, 'F', 1, 10, "48067"), user(2, 'M', 56, 16, "70072"), user(3, 'M', 25, 10, "A1B")];
        let (x, names) = build_user_attrs(&users);
        assert_eq!(names.len(), 7 + 2 + 2 + 5);
        for row in x.row_iter() {
            assert_eq!(row.sum(), 4.0);
        }
    }

    #[test]
    fn age_extremes_hit_first_and_last_bin() {
        assert_eq!(age_bin(1, 1, 56), 0);
        assert_eq!(age_bin(56, 1, 56), 6);
        assert_eq!(age_bin(30, 30, 30), 0);
    }

    #[test]
    fn hand_encoded_fixture() {
        let users = vec![user(1, 'F', 10, 3, "02139"), user(2, 'M', 80, 7, "94110")];
        let (x, names) = build_user_attrs(&users);
        let mut expected = DMatrix::zeros(2, names.len());
        // user 1: age bin 1, F, occupation 3, northeast
        for c in [0, 7, 9, 11] {
            expected[(0, c)] = 1.0;
        }
        // user 2: age bin 7, M, occupation 7, west
        for c in [6, 8, 10, 14] {
            expected[(1, c)] = 1.0;
        }
        assert_eq!(x, expected);
        assert_eq!(names[14], "region_west");
    }

    #[test]
    fn rank_one_input_has_one_component() {
        let a = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let b = DVector::from_vec(vec![2.0, 1.0, -1.0]);
        let x = &a * b.transpose();
        let pca = fit_pca(&x, 20);
        assert!(pca.scores.column(0).amax() > 0.0);
        for c in 1..20 {
            assert_eq!(pca.scores.column(c).amax(), 0.0);
        }
        let v = pca.loadings.column(0);
        assert!(v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc }) > 0.0);
    }
}
