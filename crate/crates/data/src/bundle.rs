//! Self-describing on-disk dataset bundle (JSON with a schema tag) and its SHA-256.

use std::fs;
use std::path::Path;

use log::info;
use mvmf_core::nalgebra::DMatrix;
use mvmf_core::RatingDataset;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DataError, Result};
use crate::prepare::PreparedData;

pub const BUNDLE_SCHEMA: &str = "mvmf-dataset/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub schema: String,
    pub seed: u64,
    /// Free-form provenance, e.g. "movielens-1m" or "surrogate".
    pub source: String,
    pub r_max: f64,
    pub n_users: usize,
    pub n_items: usize,
    /// `(user, item, rating)` with dense indices.
    pub ratings: Vec<(usize, usize, f64)>,
    pub user_attrs: Vec<Vec<f64>>,
    pub item_feats: Vec<Vec<f64>>,
    pub user_ids: Vec<u32>,
    pub movie_ids: Vec<u32>,
    pub attr_names: Vec<String>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], n_rows: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n_rows {
        return Err(DataError::Format(format!("{what} has {} rows, expected {n_rows}", rows.len())));
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(DataError::Format(format!("{what} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(n_rows, cols, |i, j| rows[i][j]))
}

impl DatasetBundle {
    pub fn from_prepared(p: &PreparedData, seed: u64, source: &str) -> Self {
        let d = &p.data;
        let ratings = (0..d.n_users()).flat_map(|i| d.user_ratings(i).iter().map(move |&(j, r)| (i, j, r))).collect();
        Self {
            schema: BUNDLE_SCHEMA.into(),
            seed,
            source: source.into(),
            r_max: d.r_max(),
            n_users: d.n_users(),
            n_items: d.n_items(),
            ratings,
            user_attrs: rows(d.user_attrs()),
            item_feats: rows(d.item_feats()),
            user_ids: p.user_ids.clone(),
            movie_ids: p.movie_ids.clone(),
            attr_names: p.attr_names.clone(),
        }
    }

    pub fn to_prepared(&self) -> Result<PreparedData> {
        if self.schema != BUNDLE_SCHEMA {
            return Err(DataError::Format(format!("schema {:?}, expected {BUNDLE_SCHEMA:?}", self.schema)));
        }
        let mut ratings = vec![Vec::new(); self.n_users];
        for &(i, j, r) in &self.ratings {
            ratings
                .get_mut(i)
                .ok_or_else(|| DataError::Format(format!("rating for user {i} beyond {} users", self.n_users)))?
                .push((j, r));
        }
        let x = matrix(&self.user_attrs, self.n_users, "user_attrs")?;
        let y = matrix(&self.item_feats, self.n_items, "item_feats")?;
        Ok(PreparedData {
            data: RatingDataset::new(ratings, x, y, self.r_max)?,
            user_ids: self.user_ids.clone(),
            movie_ids: self.movie_ids.clone(),
            attr_names: self.attr_names.clone(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the bundle and `<path>.sha256`; returns the checksum.
pub fn write_bundle(path: &Path, bundle: &DatasetBundle) -> Result<String> {
    let bytes = serde_json::to_vec(bundle).map_err(|e| DataError::Format(e.to_string()))?;
    let sum = sha256_hex(&bytes);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| DataError::io(parent, e))?;
    }
    fs::write(path, &bytes).map_err(|e| DataError::io(path, e))?;
    let sum_path = path.with_extension("sha256");
    fs::write(&sum_path, format!("{sum}\n")).map_err(|e| DataError::io(&sum_path, e))?;
    info!("wrote {} ({} ratings), sha256 {sum}", path.display(), bundle.ratings.len());
    Ok(sum)
}

/// Reads a bundle, checking it against `<path>.sha256` when that file exists.
pub fn read_bundle(path: &Path) -> Result<DatasetBundle> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    let sum_path = path.with_extension("sha256");
    if let Ok(expected) = fs::read_to_string(&sum_path) {
        let actual = sha256_hex(&bytes);
        if expected.trim() != actual {
            return Err(DataError::Format(format!("checksum mismatch for {}: {actual} vs {}", path.display(), expected.trim())));
        }
    }
    serde_json::from_slice(&bytes).map_err(|e| DataError::Format(format!("{}: {e}", path.display())))
}
