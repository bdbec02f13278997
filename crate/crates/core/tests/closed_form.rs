mod common;

use common::{random_instance, schemes};
use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_core::{
    cold_start_item, cold_start_user, grad_p_local, grad_v, objective, semials_update_p, semials_update_v_all,
};
use proptest::prelude::*;

/// Gradient of `lambda1 |t - B p|^2 + lambda2 |p|^2` with respect to `p`.
fn restricted_side_gradient(t: &DVector<f64>, basis: &DMatrix<f64>, p: &DVector<f64>, l1: f64, l2: f64) -> DVector<f64> {
    basis.transpose() * (t - basis * p) * (-2.0 * l1) + p * (2.0 * l2)
}

#[test]
fn user_update_is_stationary() {
    for seed in 0..20u64 {
        let inst = random_instance(seed, 6, 9, 4, 3, 1 + seed as usize % 4);
        for w in schemes(&inst.data, seed) {
            for i in 0..inst.data.n_users() {
                let p = semials_update_p(&inst.data, &inst.model, &w, inst.lambda1, inst.lambda2, i).unwrap();
                let g = grad_p_local(&inst.data, &w, i, &p, &inst.model.q, &inst.model.u, inst.lambda1, inst.lambda2)
                    .unwrap();
                assert!(g.amax() <= 1e-8, "seed {seed} user {i}: {:e}", g.amax());
            }
        }
    }
}

#[test]
fn user_update_minimizes_loss_along_its_row() {
    let inst = random_instance(7, 5, 8, 3, 2, 3);
    for w in schemes(&inst.data, 7) {
        let mut model = inst.model.clone();
        let p = semials_update_p(&inst.data, &model, &w, inst.lambda1, inst.lambda2, 2).unwrap();
        model.p.set_row(2, &p.transpose());
        let best = objective(&inst.data, &model, &w, inst.lambda1, inst.lambda2).unwrap();
        for k in 0..3 {
            for delta in [-1e-3, 1e-3] {
                let mut moved = model.clone();
                moved.p[(2, k)] += delta;
                assert!(objective(&inst.data, &moved, &w, inst.lambda1, inst.lambda2).unwrap() > best);
            }
        }
    }
}

#[test]
fn feature_update_is_stationary() {
    for seed in 0..20u64 {
        let inst = random_instance(seed, 4, 3 + seed as usize % 8, 2, 4, 1 + seed as usize % 4);
        let v = semials_update_v_all(inst.data.item_feats(), &inst.model.q, inst.lambda1, inst.lambda2).unwrap();
        let g = grad_v(inst.data.item_feats(), &inst.model.q, &v, inst.lambda1, inst.lambda2).unwrap();
        assert!(g.amax() <= 1e-8, "seed {seed}: {:e}", g.amax());
    }
}

#[test]
fn cold_start_is_stationary() {
    for seed in 0..20u64 {
        let inst = random_instance(seed, 5, 7, 6, 5, 1 + seed as usize % 4);
        let x = inst.data.user_attr_row(seed as usize % 5);
        let p = cold_start_user(&x, &inst.model.u, inst.lambda1, inst.lambda2).unwrap();
        let gp = restricted_side_gradient(&x, &inst.model.u, &p, inst.lambda1, inst.lambda2);
        assert!(gp.amax() <= 1e-8, "seed {seed}: user {:e}", gp.amax());

        let y = inst.data.item_feats().row(seed as usize % 7).transpose();
        let q = cold_start_item(&y, &inst.model.v, inst.lambda1, inst.lambda2).unwrap();
        let gq = restricted_side_gradient(&y, &inst.model.v, &q, inst.lambda1, inst.lambda2);
        assert!(gq.amax() <= 1e-8, "seed {seed}: item {:e}", gq.amax());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alternating_user_updates_never_increase_loss(seed in 0u64..10_000) {
        let inst = random_instance(seed, 5, 6, 3, 2, 2);
        for w in schemes(&inst.data, seed) {
            let mut model = inst.model.clone();
            let mut prev = objective(&inst.data, &model, &w, inst.lambda1, inst.lambda2).unwrap();
            for i in 0..inst.data.n_users() {
                let p = semials_update_p(&inst.data, &model, &w, inst.lambda1, inst.lambda2, i).unwrap();
                model.p.set_row(i, &p.transpose());
                let next = objective(&inst.data, &model, &w, inst.lambda1, inst.lambda2).unwrap();
                prop_assert!(next <= prev * (1.0 + 1e-12) + 1e-12);
                prev = next;
            }
            let v = semials_update_v_all(inst.data.item_feats(), &model.q, inst.lambda1, inst.lambda2).unwrap();
            model.v = v;
            let next = objective(&inst.data, &model, &w, inst.lambda1, inst.lambda2).unwrap();
            prop_assert!(next <= prev * (1.0 + 1e-12) + 1e-12);
        }
    }
}
