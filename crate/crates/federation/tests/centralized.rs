mod common;

use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{
    adam_step, full_gradient, objective, semials_update_p, semials_update_v_all, AdamConfig, AdamState,
    FactorModel, Hyperparameters, RatingDataset, WeightScheme,
};
use mvmf_federation::{initial_model, run_fedmvmf, RunConfig, UpdateMode};

/// Non-federated implementation of the same update equations, one J per epoch.
fn centralized(
    data: &RatingDataset<f64>,
    hp: &Hyperparameters,
    w: &WeightScheme<f64>,
    mode: UpdateMode,
    epochs: usize,
    seed: u64,
) -> (FactorModel<f64>, Vec<f64>) {
    let mut model = initial_model(data, hp.k, seed);
    let cfg = AdamConfig::from_hyper(hp);
    let mut su = AdamState::for_param(&model.u);
    let mut sq = AdamState::for_param(&model.q);
    let mut trace = Vec::new();
    for _ in 0..epochs {
        model.v = semials_update_v_all(data.item_feats(), &model.q, hp.lambda1, hp.lambda2).unwrap();
        if mode == UpdateMode::SemiAls {
            let rows: Vec<_> = (0..data.n_users())
                .map(|i| semials_update_p(data, &model, w, hp.lambda1, hp.lambda2, i).unwrap())
                .collect();
            for (i, r) in rows.iter().enumerate() {
                model.p.set_row(i, &r.transpose());
            }
        }
        let g = full_gradient(data, &model, w, hp.lambda1, hp.lambda2).unwrap();
        if mode == UpdateMode::Sgd {
            model.p -= &g.p * hp.sgd_step;
        }
        adam_step(&mut model.u, &g.u, &mut su, &cfg).unwrap();
        adam_step(&mut model.q, &g.q, &mut sq, &cfg).unwrap();
        trace.push(objective(data, &model, w, hp.lambda1, hp.lambda2).unwrap());
    }
    (model, trace)
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn check(mode: UpdateMode, w: WeightScheme<f64>) {
    let data = common::small();
    let hp = common::hyper(3);
    let epochs = 15;
    let run = run_fedmvmf(&data, &hp, &w, &RunConfig::new(mode, epochs, 5), &mut ()).unwrap();
    let (reference, trace) = centralized(&data, &hp, &w, mode, epochs, 5);
    for (rec, j) in run.trace.iter().zip(&trace) {
        assert!((rec.objective - j).abs() <= 1e-8 * j.abs().max(1.0), "epoch {}: {} vs {}", rec.epoch, rec.objective, j);
    }
    for (name, a, b) in [
        ("P", &run.model.p, &reference.p),
        ("Q", &run.model.q, &reference.q),
        ("U", &run.model.u, &reference.u),
        ("V", &run.model.v, &reference.v),
    ] {
        let d = max_diff(a, b);
        assert!(d <= 1e-8, "{mode} {name}: max diff {d}");
    }
}

#[test]
fn semials_obsonly_matches_centralized() {
    check(UpdateMode::SemiAls, WeightScheme::ObsOnly);
}

#[test]
fn semials_inclunc_matches_centralized() {
    check(UpdateMode::SemiAls, WeightScheme::InclUnc { alpha: 0.1 });
}

#[test]
fn sgd_obsonly_matches_centralized() {
    check(UpdateMode::Sgd, WeightScheme::ObsOnly);
}

#[test]
fn sgd_inclunc_matches_centralized() {
    check(UpdateMode::Sgd, WeightScheme::InclUnc { alpha: 0.1 });
}

#[test]
fn zero_epochs_returns_initial_model() {
    let data = common::small();
    let hp = common::hyper(3);
    let run = run_fedmvmf(&data, &hp, &WeightScheme::ObsOnly, &RunConfig::new(UpdateMode::SemiAls, 0, 8), &mut ()).unwrap();
    assert_eq!(run.model, initial_model(&data, 3, 8));
    assert!(run.trace.is_empty());
}

#[test]
fn twenty_epochs_descend() {
    let data = common::small();
    let hp = common::hyper(3);
    for mode in [UpdateMode::SemiAls, UpdateMode::Sgd] {
        let run = run_fedmvmf(&data, &hp, &WeightScheme::ObsOnly, &RunConfig::new(mode, 20, 2), &mut ()).unwrap();
        assert!(run.final_objective() <= run.initial_objective, "{mode}: {} > {}", run.final_objective(), run.initial_objective);
    }
}
