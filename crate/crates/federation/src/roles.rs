//! The three roles of one communication round: clients, item server, FL server.

use std::fmt;
use std::str::FromStr;

use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_core::{
    adam_step, aggregate_user_bundles, grad_p_local, grad_q_from_sum, grad_u_from_sum, item_server_bundle,
    semials_p_local, semials_update_v_all, user_bundle, AdamConfig, AdamState, Hyperparameters, ItemServerBundle,
    PlainBundle, RatingDataset, WeightScheme,
};
use rand::Rng;

use crate::error::{FedError, Result};
use crate::noise::perturb_bundle;

/// How clients (and nothing else) update `p_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateMode {
    /// Closed-form least squares against the broadcast `Q`, `U`.
    SemiAls,
    /// One plain gradient step per round.
    Sgd,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::SemiAls => "semials",
            UpdateMode::Sgd => "sgd",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = FedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "semials" | "semi-als" | "als" => Ok(UpdateMode::SemiAls),
            "sgd" => Ok(UpdateMode::Sgd),
            other => Err(FedError::Config(format!("unknown update mode {other:?}"))),
        }
    }
}

/// One client round: update `p` and return the upload.
///
/// SemiALS replaces `p` by the closed form and uploads gradients at the new
/// value. SGD uploads gradients at the current `p` and then takes one step of
/// size `hp.sgd_step` against the same broadcast. Laplace noise of scale `noise`
/// is added to every uploaded entry.
#[allow(clippy::too_many_arguments)]
pub fn client_round<R: Rng + ?Sized>(
    data: &RatingDataset<f64>,
    q: &DMatrix<f64>,
    u: &DMatrix<f64>,
    w: &WeightScheme<f64>,
    hp: &Hyperparameters,
    user: usize,
    mode: UpdateMode,
    p: &mut DVector<f64>,
    noise: f64,
    rng: &mut R,
) -> Result<PlainBundle<f64>> {
    let mut bundle = match mode {
        UpdateMode::SemiAls => {
            *p = semials_p_local(data, w, user, q, u, hp.lambda1, hp.lambda2)?;
            user_bundle(data, w, user, p, q, u)?
        }
        UpdateMode::Sgd => {
            let bundle = user_bundle(data, w, user, p, q, u)?;
            let g = grad_p_local(data, w, user, p, q, u, hp.lambda1, hp.lambda2)?;
            p.axpy(-hp.sgd_step, &g, 1.0);
            bundle
        }
    };
    if !p.iter().all(|v| v.is_finite()) {
        return Err(mvmf_core::MvmfError::NonFinite("client latent factor").into());
    }
    perturb_bundle(&mut bundle, noise, rng);
    Ok(bundle)
}

/// Item server: closed-form `V` from the broadcast `Q`, then `f(j,d_y)` at the new `V`.
pub fn item_server_round(
    item_feats: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
) -> Result<(DMatrix<f64>, ItemServerBundle<f64>)> {
    let v = semials_update_v_all(item_feats, q, lambda1, lambda2)?;
    let bundle = item_server_bundle(item_feats, q, &v)?;
    Ok((v, bundle))
}

/// Server-side parameters and optimizer state.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub u: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub adam_u: AdamState<f64>,
    pub adam_q: AdamState<f64>,
    pub adam: AdamConfig<f64>,
}

impl ServerState {
    pub fn new(u: DMatrix<f64>, q: DMatrix<f64>, hp: &Hyperparameters) -> Self {
        let adam_u = AdamState::for_param(&u);
        let adam_q = AdamState::for_param(&q);
        Self { u, q, adam_u, adam_q, adam: AdamConfig::from_hyper(hp) }
    }

    /// Adam step on `U` and `Q` from already aggregated user terms.
    pub fn apply_sums(
        &mut self,
        q_sum: &DMatrix<f64>,
        u_sum: &DMatrix<f64>,
        item_bundle: &ItemServerBundle<f64>,
        hp: &Hyperparameters,
    ) -> Result<()> {
        let gu = grad_u_from_sum(&self.u, u_sum, hp.lambda1, hp.lambda2)?;
        let gq = grad_q_from_sum(&self.q, q_sum, item_bundle, hp.lambda1, hp.lambda2)?;
        adam_step(&mut self.u, &gu, &mut self.adam_u, &self.adam)?;
        adam_step(&mut self.q, &gq, &mut self.adam_q, &self.adam)?;
        Ok(())
    }
}

/// FL server: aggregate one bundle per user (in the given order) and take an Adam step.
pub fn server_round(
    state: &mut ServerState,
    bundles: &[PlainBundle<f64>],
    item_bundle: &ItemServerBundle<f64>,
    n_users: usize,
    hp: &Hyperparameters,
) -> Result<()> {
    let (q_sum, u_sum) = aggregate_user_bundles(bundles, n_users, state.q.nrows(), state.u.nrows(), state.u.ncols())?;
    state.apply_sums(&q_sum, &u_sum, item_bundle, hp)
}
