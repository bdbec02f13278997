#![allow(dead_code)]

use mvmf_attack::{observe_training, AttackScenario, ServerObservation, WeightVariant};
use mvmf_core::nalgebra::DVector;
use mvmf_core::{Hyperparameters, RatingDataset};
use mvmf_data::synth_instance;
use mvmf_federation::{run_fedmvmf, RunConfig, UpdateMode};

pub const EPOCHS: usize = 6;
pub const SEED: u64 = 17;

pub fn hyper() -> Hyperparameters {
    Hyperparameters { k: 6, ..Hyperparameters::default() }
}

pub fn synth(seed: u64) -> RatingDataset<f64> {
    synth_instance(30, 60, 8, 5, 4, 0.25, seed).unwrap().data
}

pub fn observe(data: &RatingDataset<f64>, scenario: AttackScenario) -> ServerObservation {
    observe_training(data, &hyper(), scenario, EPOCHS, SEED).unwrap().0
}

/// The unknowns at their true values for `user`.
pub fn truth(data: &RatingDataset<f64>, scenario: AttackScenario, user: usize) -> DVector<f64> {
    match scenario.mode {
        UpdateMode::SemiAls => {
            let ratings: Vec<f64> = match scenario.variant {
                WeightVariant::ObsOnly => data.user_ratings(user).iter().map(|&(_, r)| r).collect(),
                WeightVariant::InclUnc => data.dense_row(user).iter().copied().collect(),
            };
            let attrs = data.user_attr_row(user);
            DVector::from_iterator(ratings.len() + attrs.len(), ratings.into_iter().chain(attrs.iter().copied()))
        }
        UpdateMode::Sgd => {
            // The latent vector the client held in the previous observed round.
            let hp = hyper();
            let cfg = RunConfig::new(UpdateMode::Sgd, EPOCHS - 2, SEED);
            let run = run_fedmvmf(data, &hp, &scenario.weight_scheme(hp.alpha), &cfg, &mut ()).unwrap();
            run.model.p.row(user).transpose()
        }
    }
}
