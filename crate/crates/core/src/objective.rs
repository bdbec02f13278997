//! The multi-view loss and its gradients.
//!
//! The loss is
//!
//! ```text
//! J = sum_ij c_ij (r_ij - p_i.q_j)^2
//!   + lambda1 (sum_i,du (x_i,du - p_i.u_du)^2 + sum_j,dy (y_j,dy - q_j.v_dy)^2)
//!   + lambda2 (|P|^2 + |Q|^2 + |U|^2 + |V|^2)
//! ```
//!
//! Server-side gradients of `U` and `Q` are assembled from the per-user terms
//! `f(i,j) = c_ij (r_ij - p_i.q_j) p_i`, `f(i,du) = (x_i,du - p_i.u_du) p_i` and
//! the item-server term `f(j,dy) = (y_j,dy - q_j.v_dy) v_dy`.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{ItemServerBundle, PlainBundle};
use crate::dataset::RatingDataset;
use crate::error::{dim_check, MvmfError, Result};
use crate::model::FactorModel;
use crate::scalar::Real;
use crate::weights::WeightScheme;

/// Predicted rating `p . q`.
pub fn predict_rating<T: Real>(p: &DVector<T>, q: &DVector<T>) -> Result<T> {
    dim_check(p.len() == q.len(), || format!("p has {} entries, q has {}", p.len(), q.len()))?;
    Ok(p.dot(q))
}

pub(crate) fn check_shapes<T: Real>(data: &RatingDataset<T>, model: &FactorModel<T>) -> Result<()> {
    let k = model.k();
    let ok = model.p.nrows() == data.n_users()
        && model.q.nrows() == data.n_items()
        && model.u.nrows() == data.n_user_attrs()
        && model.v.nrows() == data.n_item_feats()
        && model.q.ncols() == k
        && model.u.ncols() == k
        && model.v.ncols() == k;
    dim_check(ok, || {
        format!(
            "model P {}x{}, Q {}x{}, U {}x{}, V {}x{} vs data n={}, m={}, l_x={}, l_y={}",
            model.p.nrows(),
            model.p.ncols(),
            model.q.nrows(),
            model.q.ncols(),
            model.u.nrows(),
            model.u.ncols(),
            model.v.nrows(),
            model.v.ncols(),
            data.n_users(),
            data.n_items(),
            data.n_user_attrs(),
            data.n_item_feats()
        )
    })
}

fn row_dot<T: Real>(a: &DMatrix<T>, i: usize, b: &DMatrix<T>, j: usize) -> T {
    a.row(i).dot(&b.row(j))
}

pub fn objective<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
) -> Result<T> {
    check_shapes(data, model)?;
    if !model.is_finite() {
        return Err(MvmfError::NonFinite("objective model"));
    }
    let mut rating_term = T::zero();
    for i in 0..data.n_users() {
        for e in w.active_items(data, i) {
            let err = e.rating - row_dot(&model.p, i, &model.q, e.item);
            rating_term += e.weight * err * err;
        }
    }
    let x = data.user_attrs();
    let mut attr_term = T::zero();
    for i in 0..data.n_users() {
        for d in 0..data.n_user_attrs() {
            let err = x[(i, d)] - row_dot(&model.p, i, &model.u, d);
            attr_term += err * err;
        }
    }
    let y = data.item_feats();
    let mut feat_term = T::zero();
    for j in 0..data.n_items() {
        for d in 0..data.n_item_feats() {
            let err = y[(j, d)] - row_dot(&model.q, j, &model.v, d);
            feat_term += err * err;
        }
    }
    let reg = model.p.norm_squared() + model.q.norm_squared() + model.u.norm_squared() + model.v.norm_squared();
    let j = rating_term + lambda1 * (attr_term + feat_term) + lambda2 * reg;
    if !j.is_finite() {
        return Err(MvmfError::NonFinite("objective value"));
    }
    Ok(j)
}

/// The upload of one client: `f(i,j)` over the scheme's active items and
/// `f(i,d_u)` over all attributes, evaluated at the client's `p`.
pub fn user_bundle<T: Real>(
    data: &RatingDataset<T>,
    w: &WeightScheme<T>,
    user: usize,
    p: &DVector<T>,
    q: &DMatrix<T>,
    u: &DMatrix<T>,
) -> Result<PlainBundle<T>> {
    dim_check(user < data.n_users(), || format!("user {user} out of range"))?;
    dim_check(p.len() == q.ncols() && p.len() == u.ncols(), || "latent width of p".into())?;
    let q_grads = w
        .active_items(data, user)
        .into_iter()
        .map(|e| {
            let err = e.rating - q.row(e.item).transpose().dot(p);
            (e.item, p * (e.weight * err))
        })
        .collect();
    let x = data.user_attrs();
    let u_grads = (0..data.n_user_attrs())
        .map(|d| {
            let err = x[(user, d)] - u.row(d).transpose().dot(p);
            (d, p * err)
        })
        .collect();
    Ok(PlainBundle { user, q_grads, u_grads })
}

/// Per-user bundles for every user of `model`.
pub fn user_bundles<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
) -> Result<Vec<PlainBundle<T>>> {
    check_shapes(data, model)?;
    (0..data.n_users())
        .map(|i| user_bundle(data, w, i, &model.p_row(i), &model.q, &model.u))
        .collect()
}

/// The item server's `f(j,d_y)` terms for every `(item, feature)` pair.
pub fn item_server_bundle<T: Real>(y: &DMatrix<T>, q: &DMatrix<T>, v: &DMatrix<T>) -> Result<ItemServerBundle<T>> {
    dim_check(y.nrows() == q.nrows() && y.ncols() == v.nrows() && q.ncols() == v.ncols(), || {
        format!("Y {}x{}, Q {}x{}, V {}x{}", y.nrows(), y.ncols(), q.nrows(), q.ncols(), v.nrows(), v.ncols())
    })?;
    let mut v_grads = Vec::with_capacity(y.nrows() * y.ncols());
    for j in 0..y.nrows() {
        for d in 0..y.ncols() {
            let vd = v.row(d).transpose();
            let err = y[(j, d)] - q.row(j).transpose().dot(&vd);
            v_grads.push((j, d, vd * err));
        }
    }
    Ok(ItemServerBundle { v_grads })
}

/// Sums of the user terms: row `j` of the first matrix is `sum_i f(i,j)`,
/// row `d` of the second is `sum_i f(i,d_u)`.
///
/// Requires exactly one bundle per user `0..n_users`.
pub fn aggregate_user_bundles<T: Real>(
    bundles: &[PlainBundle<T>],
    n_users: usize,
    n_items: usize,
    n_attrs: usize,
    k: usize,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let mut seen = vec![false; n_users];
    for b in bundles {
        if b.user >= n_users || seen[b.user] {
            return Err(MvmfError::Protocol(format!("unexpected or repeated bundle for user {}", b.user)));
        }
        seen[b.user] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(MvmfError::Protocol(format!("missing contribution of user {missing}")));
    }
    let mut q_sum = DMatrix::zeros(n_items, k);
    let mut u_sum = DMatrix::zeros(n_attrs, k);
    for b in bundles {
        for (j, g) in &b.q_grads {
            dim_check(*j < n_items && g.len() == k, || format!("item gradient ({j}) of user {}", b.user))?;
            let mut row = q_sum.row_mut(*j);
            row += g.transpose();
        }
        for (d, g) in &b.u_grads {
            dim_check(*d < n_attrs && g.len() == k, || format!("attribute gradient ({d}) of user {}", b.user))?;
            let mut row = u_sum.row_mut(*d);
            row += g.transpose();
        }
    }
    Ok((q_sum, u_sum))
}

/// `dJ/dU = -2 lambda1 sum_i f(i,d_u) + 2 lambda2 u_du` from already aggregated user terms.
pub fn grad_u_from_sum<T: Real>(u: &DMatrix<T>, u_sum: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DMatrix<T>> {
    dim_check(u.shape() == u_sum.shape(), || "U vs aggregated attribute gradient".into())?;
    Ok(u_sum * (-(lambda1 + lambda1)) + u * (lambda2 + lambda2))
}

/// `dJ/dQ = -2 sum_i f(i,j) - 2 lambda1 sum_dy f(j,d_y) + 2 lambda2 q_j` from aggregated user terms.
pub fn grad_q_from_sum<T: Real>(
    q: &DMatrix<T>,
    q_sum: &DMatrix<T>,
    item_bundle: &ItemServerBundle<T>,
    lambda1: T,
    lambda2: T,
) -> Result<DMatrix<T>> {
    dim_check(q.shape() == q_sum.shape(), || "Q vs aggregated item gradient".into())?;
    let two = T::of(2.0);
    let mut item_sum = DMatrix::zeros(q.nrows(), q.ncols());
    for (j, _, g) in &item_bundle.v_grads {
        dim_check(*j < q.nrows() && g.len() == q.ncols(), || format!("item-server gradient for item {j}"))?;
        let mut row = item_sum.row_mut(*j);
        row += g.transpose();
    }
    Ok(q_sum * (-two) - item_sum * (two * lambda1) + q * (two * lambda2))
}

/// Gradient of `J` with respect to `U`, assembled from one bundle per user.
pub fn grad_u<T: Real>(
    model: &FactorModel<T>,
    lambda1: T,
    lambda2: T,
    user_bundles: &[PlainBundle<T>],
) -> Result<DMatrix<T>> {
    let (_, u_sum) = aggregate_user_bundles(
        user_bundles,
        model.p.nrows(),
        model.q.nrows(),
        model.u.nrows(),
        model.k(),
    )?;
    grad_u_from_sum(&model.u, &u_sum, lambda1, lambda2)
}

/// Gradient of `J` with respect to `Q`, from user bundles and the item-server bundle.
pub fn grad_q<T: Real>(
    model: &FactorModel<T>,
    lambda1: T,
    lambda2: T,
    user_bundles: &[PlainBundle<T>],
    item_bundle: &ItemServerBundle<T>,
) -> Result<DMatrix<T>> {
    let (q_sum, _) = aggregate_user_bundles(
        user_bundles,
        model.p.nrows(),
        model.q.nrows(),
        model.u.nrows(),
        model.k(),
    )?;
    grad_q_from_sum(&model.q, &q_sum, item_bundle, lambda1, lambda2)
}

/// `dJ/dp_i` for a client holding `p` against the broadcast `Q`, `U`.
#[allow(clippy::too_many_arguments)]
pub fn grad_p_local<T: Real>(
    data: &RatingDataset<T>,
    w: &WeightScheme<T>,
    user: usize,
    p: &DVector<T>,
    q: &DMatrix<T>,
    u: &DMatrix<T>,
    lambda1: T,
    lambda2: T,
) -> Result<DVector<T>> {
    dim_check(user < data.n_users(), || format!("user {user} out of range"))?;
    dim_check(p.len() == q.ncols() && p.len() == u.ncols(), || "latent width of p".into())?;
    let two = T::of(2.0);
    let mut g = p * (two * lambda2);
    for e in w.active_items(data, user) {
        let qj = q.row(e.item).transpose();
        let err = e.rating - qj.dot(p);
        g -= qj * (two * e.weight * err);
    }
    let x = data.user_attrs();
    for d in 0..data.n_user_attrs() {
        let ud = u.row(d).transpose();
        let err = x[(user, d)] - ud.dot(p);
        g -= ud * (two * lambda1 * err);
    }
    Ok(g)
}

pub fn grad_p<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
    user: usize,
) -> Result<DVector<T>> {
    check_shapes(data, model)?;
    grad_p_local(data, w, user, &model.p_row(user), &model.q, &model.u, lambda1, lambda2)
}

/// `dJ/dV = -2 lambda1 sum_j (y_j,dy - q_j.v_dy) q_j + 2 lambda2 v_dy`.
pub fn grad_v<T: Real>(y: &DMatrix<T>, q: &DMatrix<T>, v: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DMatrix<T>> {
    dim_check(y.nrows() == q.nrows() && y.ncols() == v.nrows() && q.ncols() == v.ncols(), || "Y/Q/V shapes".into())?;
    let two = T::of(2.0);
    // residual E = Y - Q V^T, gradient = -2 lambda1 E^T Q + 2 lambda2 V
    let resid = y - q * v.transpose();
    Ok(resid.transpose() * q * (-(two * lambda1)) + v * (two * lambda2))
}

/// Gradients of `J` with respect to all four factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGradient<T: Real> {
    pub p: DMatrix<T>,
    pub q: DMatrix<T>,
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

/// Full analytic gradient computed directly from the loss terms, without the
/// federated decomposition into uploads.
pub fn full_gradient<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
) -> Result<FactorGradient<T>> {
    check_shapes(data, model)?;
    let two = T::of(2.0);
    let mut gp = &model.p * (two * lambda2);
    let mut gq = &model.q * (two * lambda2);
    for i in 0..data.n_users() {
        for e in w.active_items(data, i) {
            let err = e.rating - row_dot(&model.p, i, &model.q, e.item);
            let s = two * e.weight * err;
            let qj = model.q.row(e.item).clone_owned();
            let pi = model.p.row(i).clone_owned();
            let mut prow = gp.row_mut(i);
            prow -= qj * s;
            let mut qrow = gq.row_mut(e.item);
            qrow -= pi * s;
        }
    }
    // attribute view: E_x = X - P U^T
    let ex = data.user_attrs() - &model.p * model.u.transpose();
    gp -= &ex * &model.u * (two * lambda1);
    let gu = ex.transpose() * &model.p * (-(two * lambda1)) + &model.u * (two * lambda2);
    let ey = data.item_feats() - &model.q * model.v.transpose();
    gq -= &ey * &model.v * (two * lambda1);
    let gv = ey.transpose() * &model.q * (-(two * lambda1)) + &model.v * (two * lambda2);
    Ok(FactorGradient { p: gp, q: gq, u: gu, v: gv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_by_one(r: f64) -> (RatingDataset<f64>, FactorModel<f64>) {
        let data = RatingDataset::new(
            vec![vec![(0, r)]],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            5.0,
        )
        .unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        let model = FactorModel::new(one.clone(), one.clone(), one.clone(), one).unwrap();
        (data, model)
    }

    #[test]
    fn predict_rating_cases() {
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let q = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(predict_rating(&z, &q).unwrap(), 0.0);
        assert_eq!(predict_rating(&DVector::from_vec(vec![1.0, 2.0]), &q).unwrap(), 11.0);
        assert!(matches!(
            predict_rating(&DVector::from_vec(vec![1.0]), &q),
            Err(MvmfError::Dimension(_))
        ));
    }

    #[test]
    fn perfect_fit_has_zero_objective() {
        let (data, model) = one_by_one(1.0);
        let j = objective(&data, &model, &WeightScheme::ObsOnly, 0.0, 0.0).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn objective_rejects_non_finite() {
        let (data, mut model) = one_by_one(1.0);
        model.p[(0, 0)] = f64::NAN;
        assert_eq!(
            objective(&data, &model, &WeightScheme::ObsOnly, 1.0, 1.0),
            Err(MvmfError::NonFinite("objective model"))
        );
    }

    #[test]
    fn grad_u_single_user_hand_value() {
        // one user, one attribute, f(i,d) = x p
        let model = FactorModel::new(
            DMatrix::from_row_slice(1, 2, &[0.5, -1.0]),
            DMatrix::zeros(1, 2),
            DMatrix::from_row_slice(1, 2, &[0.2, 0.3]),
            DMatrix::zeros(0, 2),
        )
        .unwrap();
        let p = DVector::<f64>::from_vec(vec![0.5, -1.0]);
        let x: f64 = 1.0;
        let bundle = PlainBundle { user: 0, q_grads: vec![], u_grads: vec![(0, &p * x)] };
        let lambda2 = 0.7;
        let g = grad_u(&model, 1.0, lambda2, &[bundle]).unwrap();
        for k in 0..2 {
            let expect = -2.0 * x * p[k] + 2.0 * lambda2 * model.u[(0, k)];
            assert!((g[(0, k)] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn grad_u_zero_contributions() {
        let model = FactorModel::<f64>::zeros(2, 1, 3, 0, 2);
        let bundles: Vec<_> = (0..2)
            .map(|i| PlainBundle {
                user: i,
                q_grads: vec![],
                u_grads: (0..3).map(|d| (d, DVector::zeros(2))).collect(),
            })
            .collect();
        let mut m2 = model.clone();
        m2.u = DMatrix::from_element(3, 2, 0.4);
        let g = grad_u(&m2, 1.0, 0.0, &bundles).unwrap();
        assert_eq!(g, DMatrix::zeros(3, 2));
    }

    #[test]
    fn missing_user_is_protocol_error() {
        let model = FactorModel::<f64>::zeros(2, 1, 1, 0, 1);
        let one = vec![PlainBundle { user: 0, q_grads: vec![], u_grads: vec![] }];
        assert!(matches!(grad_u(&model, 1.0, 1.0, &one), Err(MvmfError::Protocol(_))));
        let dup = vec![one[0].clone(), one[0].clone()];
        assert!(matches!(grad_u(&model, 1.0, 1.0, &dup), Err(MvmfError::Protocol(_))));
    }

    #[test]
    fn grad_q_one_user_one_item() {
        let (data, mut model) = one_by_one(3.0);
        model.p[(0, 0)] = 0.8;
        model.q[(0, 0)] = 1.5;
        let bundles = user_bundles(&data, &model, &WeightScheme::ObsOnly).unwrap();
        let empty = ItemServerBundle { v_grads: vec![] };
        let lambda2 = 0.3;
        let g = grad_q(&model, 0.0, lambda2, &bundles, &empty).unwrap();
        let expect = -2.0 * (3.0 - 0.8 * 1.5) * 0.8 + 2.0 * lambda2 * 1.5;
        assert!((g[(0, 0)] - expect).abs() < 1e-14);
    }

    #[test]
    fn grad_p_cases() {
        let (data, model) = one_by_one(1.0);
        let g = grad_p(&data, &model, &WeightScheme::ObsOnly, 1.0, 0.0, 0).unwrap();
        assert_eq!(g[0], 0.0);

        let (data, mut model) = one_by_one(4.0);
        model.p[(0, 0)] = 0.5;
        model.q[(0, 0)] = 2.0;
        let g = grad_p(&data, &model, &WeightScheme::ObsOnly, 0.0, 0.0, 0).unwrap();
        assert!((g[0] - (-2.0 * (4.0 - 1.0) * 2.0)).abs() < 1e-14);
    }

    #[test]
    fn item_server_bundle_zero_at_exact_fit() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.2, 0.3]);
        let v = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.7, -0.4, 1.0, 1.0]);
        let y = &q * v.transpose();
        let b = item_server_bundle(&y, &q, &v).unwrap();
        assert_eq!(b.v_grads.len(), 6);
        assert!(b.v_grads.iter().all(|(_, _, g)| g.amax() < 1e-15));
    }
}
