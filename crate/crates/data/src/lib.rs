//! MovieLens-1M ingestion, user/item feature engineering, scenario splits,
//! synthetic instances and the on-disk dataset bundle.

pub mod attributes;
pub mod bundle;
pub mod error;
pub mod movielens;
pub mod prepare;
pub mod split;
pub mod surrogate;
pub mod synth;

pub use attributes::{age_bin, build_item_feats, build_user_attrs, fit_pca, zip_region, Pca, AGE_BINS, ITEM_COMPONENTS};
pub use bundle::{read_bundle, sha256_hex, write_bundle, DatasetBundle, BUNDLE_SCHEMA};
pub use error::{DataError, Result};
pub use movielens::{
    ingest_movielens, parse_genome, parse_movies, parse_ratings, parse_users, write_movielens_dir, MovieLensPaths,
    MovieRecord, RatingRecord, RawMovieLens, TagGenome, UserRecord,
};
pub use prepare::{prepare, prepare_default, subsample, PreparedData};
pub use split::{split, Scenario, Split, SplitSpec, TestRating};
pub use surrogate::{surrogate_movielens, SurrogateSpec};
pub use synth::{synth_instance, SynthInstance};
