use nalgebra::DMatrix;

use crate::error::{dim_check, Result};
use crate::scalar::Real;

/// Step size and decay constants of Adam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub gamma: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> AdamConfig<T> {
    pub fn from_hyper(hp: &crate::Hyperparameters) -> Self {
        Self {
            gamma: T::of(hp.gamma),
            beta1: T::of(hp.beta1),
            beta2: T::of(hp.beta2),
            epsilon: T::of(hp.epsilon),
        }
    }
}

/// Moment accumulators for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub first: DMatrix<T>,
    pub second: DMatrix<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            first: DMatrix::zeros(rows, cols),
            second: DMatrix::zeros(rows, cols),
            step: 0,
        }
    }

    pub fn for_param(param: &DMatrix<T>) -> Self {
        Self::new(param.nrows(), param.ncols())
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step<T: Real>(
    param: &mut DMatrix<T>,
    grad: &DMatrix<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig<T>,
) -> Result<()> {
    dim_check(param.shape() == grad.shape() && param.shape() == state.first.shape(), || {
        format!(
            "param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.first.shape()
        )
    })?;
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let c1 = one - cfg.beta1.powi(t);
    let c2 = one - cfg.beta2.powi(t);
    for ((x, g), (m, v)) in param
        .iter_mut()
        .zip(grad.iter())
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        *m = cfg.beta1 * *m + (one - cfg.beta1) * *g;
        *v = cfg.beta2 * *v + (one - cfg.beta2) * *g * *g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x -= cfg.gamma * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}
