//! Central finite differences of the loss, used to validate the analytic gradients.

use nalgebra::DMatrix;

use crate::dataset::RatingDataset;
use crate::error::Result;
use crate::model::FactorModel;
use crate::objective::{full_gradient, objective, FactorGradient};
use crate::scalar::Real;
use crate::weights::WeightScheme;

fn perturbed<T: Real>(
    model: &FactorModel<T>,
    which: usize,
    idx: (usize, usize),
    delta: T,
) -> FactorModel<T> {
    let mut m = model.clone();
    let target = match which {
        0 => &mut m.p,
        1 => &mut m.q,
        2 => &mut m.u,
        _ => &mut m.v,
    };
    target[idx] += delta;
    m
}

/// Numerical gradient of the loss by central differences with step `h`.
pub fn numerical_gradient<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
    h: T,
) -> Result<FactorGradient<T>> {
    let two_h = h + h;
    let mut out = [model.p.clone(), model.q.clone(), model.u.clone(), model.v.clone()];
    for (which, mat) in out.iter_mut().enumerate() {
        for c in 0..mat.ncols() {
            for r in 0..mat.nrows() {
                let plus = objective(data, &perturbed(model, which, (r, c), h), w, lambda1, lambda2)?;
                let minus = objective(data, &perturbed(model, which, (r, c), -h), w, lambda1, lambda2)?;
                mat[(r, c)] = (plus - minus) / two_h;
            }
        }
    }
    let [p, q, u, v] = out;
    Ok(FactorGradient { p, q, u, v })
}

fn rel_err<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    let diff = (a - b).norm().to_f64_lossy();
    let scale = a.norm().to_f64_lossy().max(b.norm().to_f64_lossy());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest relative error (Frobenius norm per factor matrix) between the analytic
/// gradient and central differences.
pub fn gradient_check<T: Real>(
    data: &RatingDataset<T>,
    model: &FactorModel<T>,
    w: &WeightScheme<T>,
    lambda1: T,
    lambda2: T,
    h: T,
) -> Result<f64> {
    let analytic = full_gradient(data, model, w, lambda1, lambda2)?;
    let numeric = numerical_gradient(data, model, w, lambda1, lambda2, h)?;
    Ok([
        rel_err(&analytic.p, &numeric.p),
        rel_err(&analytic.q, &numeric.q),
        rel_err(&analytic.u, &numeric.u),
        rel_err(&analytic.v, &numeric.v),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}
