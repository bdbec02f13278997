//! Closed-form least-squares updates and cold-start inference.

use nalgebra::{DMatrix, DVector};

use crate::dataset::RatingDataset;
use crate::error::{dim_check, MvmfError, Result};
use crate::linalg::solve_symmetric;
use crate::model::FactorModel;
use crate::objective::check_shapes;
use crate::scalar::Real;
use crate::weights::WeightScheme;

/// Optimal `p_i` for fixed `Q`, `U`:
/// `(r_i C Q + lambda1 x_i U)(Q^T C Q + lambda1 U^T U + lambda2 I)^-1`.
///
/// Sums run over the scheme's active items only, so ObsOnly reduces to the
/// rated items.
#[allow(clippy::too_many_arguments)]
pub fn semials_p_local<T: Real>(
    data: &RatingDataset<T>,
    w: &WeightScheme<T>,
    user: usize,
    q: &DMatrix<T>,
    u: &DMatrix<T>,
    lambda1: T,
    lambda2: T,
) -> Result<DVector<T>> {
    dim_check(user < data.n_users(), || format!("user {user} out of range"))?;
    let k = q.ncols();
    dim_check(u.ncols() == k, || "U and Q latent widths differ".into())?;
    let mut system = u.transpose() * u * lambda1;
    for i in 0..k {
        system[(i, i)] += lambda2;
    }
    let mut rhs = DVector::zeros(k);
    for e in w.active_items(data, user) {
        let qj = q.row(e.item).transpose();
        system.ger(e.weight, &qj, &qj, T::one());
        rhs.axpy(e.weight * e.rating, &qj, T::one());
    }
    let x = data.user_attr_row(user);
    rhs += u.transpose() * x * lambda1;
    solve_symmetric(&system, &rhs, "SemiALS user update")
}

pub fn semials_update_p<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
    user: usize,
) -> Result<DVector<T>> {
    check_shapes(data, model)?;
    semials_p_local(data, w, user, &model.q, &model.u, lambda1, lambda2)
}

fn ridge_system<T: Real>(basis: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DMatrix<T>> {
    if !(lambda1 > T::zero()) {
        return Err(MvmfError::InvalidHyperparameter(format!(
            "lambda1 = {lambda1} must be positive for the ratio lambda2/lambda1"
        )));
    }
    let mut system = basis.transpose() * basis;
    let ridge = lambda2 / lambda1;
    for i in 0..system.nrows() {
        system[(i, i)] += ridge;
    }
    Ok(system)
}

/// Row `d_y` of the optimal `V`: `(y_dy Q)(Q^T Q + lambda2/lambda1 I)^-1`,
/// where `y_dy` is column `d_y` of the item-feature matrix.
pub fn semials_update_v<T: Real>(
    item_feats: &DMatrix<T>,
    q: &DMatrix<T>,
    lambda1: T,
    lambda2: T,
    feature: usize,
) -> Result<DVector<T>> {
    dim_check(item_feats.nrows() == q.nrows(), || "Y and Q item counts differ".into())?;
    dim_check(feature < item_feats.ncols(), || format!("feature {feature} out of range"))?;
    let system = ridge_system(q, lambda1, lambda2)?;
    let rhs = q.transpose() * item_feats.column(feature);
    solve_symmetric(&system, &rhs, "SemiALS item-feature update")
}

/// All rows of the optimal `V` with a single factorization.
pub fn semials_update_v_all<T: Real>(item_feats: &DMatrix<T>, q: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DMatrix<T>> {
    dim_check(item_feats.nrows() == q.nrows(), || "Y and Q item counts differ".into())?;
    let system = ridge_system(q, lambda1, lambda2)?;
    let inv = crate::linalg::inverse_symmetric(&system, "SemiALS item-feature update")?;
    // V = Y^T Q (Q^T Q + r I)^-1
    Ok(item_feats.transpose() * q * inv)
}

/// Latent factor of a new user from attributes alone: `x U (U^T U + lambda2/lambda1 I)^-1`.
pub fn cold_start_user<T: Real>(x: &DVector<T>, u: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DVector<T>> {
    dim_check(x.len() == u.nrows(), || format!("x has {} entries, U has {} rows", x.len(), u.nrows()))?;
    let system = ridge_system(u, lambda1, lambda2)?;
    solve_symmetric(&system, &(u.transpose() * x), "cold-start user")
}

/// Latent factor of a new item from features alone: `y V (V^T V + lambda2/lambda1 I)^-1`.
pub fn cold_start_item<T: Real>(y: &DVector<T>, v: &DMatrix<T>, lambda1: T, lambda2: T) -> Result<DVector<T>> {
    dim_check(y.len() == v.nrows(), || format!("y has {} entries, V has {} rows", y.len(), v.nrows()))?;
    let system = ridge_system(v, lambda1, lambda2)?;
    solve_symmetric(&system, &(v.transpose() * y), "cold-start item")
}
