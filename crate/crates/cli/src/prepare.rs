//! Dataset preparation and loading.

use log::info;
use mvmf_core::derive_seed;
use mvmf_data::{
    ingest_movielens, prepare, read_bundle, subsample, surrogate_movielens, write_bundle, DatasetBundle,
    MovieLensPaths, PreparedData,
};

use crate::config::ExperimentConfig;
use crate::error::Result;

const SUBSAMPLE_STREAM: u64 = 0x5B5A;

/// Raw records (MovieLens files or the seeded surrogate) to a prepared,
/// optionally subsampled dataset. Returns the source label too.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<(PreparedData, &'static str)> {
    let (raw, source) = match (&cfg.data.raw_dir, cfg.uses_movielens()) {
        (Some(dir), true) => {
            info!("reading MovieLens files from {}", dir.display());
            (ingest_movielens(&MovieLensPaths::in_dir(dir))?, "movielens")
        }
        _ => {
            info!("no raw data directory; generating the surrogate");
            (surrogate_movielens(&cfg.surrogate_spec())?, "surrogate")
        }
    };
    let full = prepare(&raw, cfg.data.components)?;
    let d = &cfg.data;
    let prepared = if d.users.is_some() || d.items.is_some() {
        let n = d.users.unwrap_or(full.data.n_users());
        let m = d.items.unwrap_or(full.data.n_items());
        subsample(&full, n, m, d.min_ratings, derive_seed(cfg.seed, SUBSAMPLE_STREAM))?
    } else {
        full
    };
    Ok((prepared, source))
}

/// Builds the dataset and writes the bundle plus its checksum file.
pub fn cmd_prepare(cfg: &ExperimentConfig) -> Result<(PreparedData, String)> {
    let (prepared, source) = build_dataset(cfg)?;
    let bundle = DatasetBundle::from_prepared(&prepared, cfg.seed, source);
    let sum = write_bundle(&cfg.bundle_path(), &bundle)?;
    info!(
        "{} users, {} items, {} ratings -> {}",
        prepared.data.n_users(),
        prepared.data.n_items(),
        prepared.data.n_ratings(),
        cfg.bundle_path().display()
    );
    Ok((prepared, sum))
}

/// Reads the bundle written by `prepare`.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<PreparedData> {
    Ok(read_bundle(&cfg.bundle_path())?.to_prepared()?)
}
