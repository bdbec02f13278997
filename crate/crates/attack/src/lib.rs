//! Reconstruction of private ratings and attributes from the gradient uploads
//! an honest-but-curious server sees in plaintext federated training.

pub mod error;
pub mod eval;
pub mod observation;
pub mod problem;
pub mod recover;
pub mod scenario;
pub mod semials;
pub mod sgd;
pub mod smoothing;

pub use error::{AttackError, Result};
pub use eval::{
    attack_accuracy, attack_users, random_guess_baseline, run_attack, score_user, scored_items, write_attack_csv, AttackSummary,
    UserScore, ATTACK_CSV_HEADER,
};
pub use observation::{observe_training, KnownHyper, RoundSnapshot, ServerObservation, UserUploads};
pub use problem::{
    build_semials_inclunc, build_semials_obsonly, build_sgd_inclunc, build_sgd_obsonly, choose_index, sweep_indices,
    AttackProblem, AttackSystem, FixedIndex, IndexChoice, InitStrategy, MAX_SWEEP_ITEMS, NEUTRAL_LATENT_SCALE,
};
pub use recover::{
    attack_user, decode, postprocess, recover_user, solve_fixed, AttackConfig, Recovery, SolvedAttack, UserEstimate,
};
pub use scenario::{AttackScenario, WeightVariant};
pub use semials::SemiAlsSystem;
pub use sgd::{SgdSystem, TwoRoundView, DIVISOR_FLOOR};
pub use smoothing::{smooth_weight, smooth_weight_slope, two_valued_rating, UNRATED_SPREAD_MULTIPLE};
