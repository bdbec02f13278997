//! Multi-view matrix factorization: data model, loss, gradients, closed-form
//! updates, Adam and ranking metrics.
//!
//! Numeric code is generic over [`Real`]; the `*F64` aliases fix the scalar to
//! `f64`, which is what the higher layers use.

pub mod adam;
pub mod als;
pub mod bundle;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod hyper;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod scalar;
pub mod seed;
pub mod weights;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use als::{cold_start_item, cold_start_user, semials_p_local, semials_update_p, semials_update_v, semials_update_v_all};
pub use bundle::{GradientBundle, ItemServerBundle, PlainBundle};
pub use dataset::{RatingDataset, DEFAULT_R_MAX};
pub use error::{MvmfError, Result};
pub use gradcheck::{gradient_check, numerical_gradient};
pub use hyper::Hyperparameters;
pub use model::FactorModel;
pub use objective::{
    aggregate_user_bundles, full_gradient, grad_p, grad_p_local, grad_q, grad_q_from_sum, grad_u, grad_u_from_sum,
    grad_v, item_server_bundle, objective, predict_rating, user_bundle, user_bundles, FactorGradient,
};
pub use scalar::Real;
pub use seed::derive_seed;
pub use weights::{WeightScheme, WeightedEntry};

pub use nalgebra;

pub type RatingDatasetF64 = RatingDataset<f64>;
pub type FactorModelF64 = FactorModel<f64>;
pub type WeightSchemeF64 = WeightScheme<f64>;
pub type PlainBundleF64 = PlainBundle<f64>;
pub type ItemServerBundleF64 = ItemServerBundle<f64>;
pub type AdamStateF64 = AdamState<f64>;
pub type FactorGradientF64 = FactorGradient<f64>;
