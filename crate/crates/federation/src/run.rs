//! FedMVMF orchestration: one communication round per epoch.

use std::time::Instant;

use log::{debug, info};
use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_core::{
    derive_seed, objective, FactorModel, Hyperparameters, ItemServerBundle, PlainBundle, RatingDataset, WeightScheme,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FedError, Result};
use crate::noise::NoiseConfig;
use crate::roles::{client_round, item_server_round, ServerState, UpdateMode};
use crate::transport::{InProcessQueue, Transport};

const INIT_STREAM: u64 = 0x1417;
const NOISE_STREAM: u64 = 0x4E01;

/// Orchestration settings shared by the plaintext and encrypted runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mode: UpdateMode,
    pub epochs: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
}

impl RunConfig {
    pub fn new(mode: UpdateMode, epochs: usize, seed: u64) -> Self {
        Self { mode, epochs, seed, noise: NoiseConfig::none() }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = noise;
        self
    }
}

/// Wall-clock seconds spent in each phase of one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    /// Sum over clients of local compute (and encryption, when enabled).
    pub local_update: f64,
    /// Mean per-client local time: the phase length if clients ran in parallel.
    pub local_update_per_client: f64,
    pub aggregation: f64,
    /// `None` for plaintext runs.
    pub decryption: Option<f64>,
    /// Item server plus the FL server's Adam step.
    pub server_update: f64,
    /// Whole epoch, excluding objective evaluation.
    pub epoch: f64,
}

impl PhaseTimings {
    pub fn phase_sum(&self) -> f64 {
        self.local_update + self.aggregation + self.decryption.unwrap_or(0.0) + self.server_update
    }

    /// Epoch length with clients running concurrently.
    pub fn parallel_epoch(&self) -> f64 {
        self.local_update_per_client + self.aggregation + self.decryption.unwrap_or(0.0) + self.server_update
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based; epoch 0 is the initial model.
    pub epoch: usize,
    pub objective: f64,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: FactorModel<f64>,
    pub initial_objective: f64,
    pub trace: Vec<EpochRecord>,
}

impl TrainedRun {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(self.initial_objective, |r| r.objective)
    }
}

/// What the FL server sees in one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub epoch: usize,
    /// Broadcast at the start of the round.
    pub u: &'a DMatrix<f64>,
    pub q: &'a DMatrix<f64>,
    /// Uploads ordered by user id.
    pub bundles: &'a [PlainBundle<f64>],
    pub item_bundle: &'a ItemServerBundle<f64>,
}

pub trait RoundObserver {
    fn observe(&mut self, view: RoundView<'_>);
}

impl RoundObserver for () {
    fn observe(&mut self, _: RoundView<'_>) {}
}

/// Owned copy of a round.
#[derive(Debug, Clone)]
pub struct ObservedRound {
    pub epoch: usize,
    pub u: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub bundles: Vec<PlainBundle<f64>>,
    pub item_bundle: ItemServerBundle<f64>,
}

/// Keeps the most recent `capacity` rounds.
#[derive(Debug, Clone)]
pub struct RoundRecorder {
    capacity: usize,
    pub rounds: Vec<ObservedRound>,
}

impl RoundRecorder {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, rounds: Vec::new() }
    }

    pub fn last(&self) -> Option<&ObservedRound> {
        self.rounds.last()
    }
}

impl RoundObserver for RoundRecorder {
    fn observe(&mut self, view: RoundView<'_>) {
        if self.capacity == 0 {
            return;
        }
        if self.rounds.len() == self.capacity {
            self.rounds.remove(0);
        }
        self.rounds.push(ObservedRound {
            epoch: view.epoch,
            u: view.u.clone(),
            q: view.q.clone(),
            bundles: view.bundles.to_vec(),
            item_bundle: view.item_bundle.clone(),
        });
    }
}

/// Seeded U[0, 0.1] start shared by every variant, so same-seed runs coincide.
pub fn initial_model(data: &RatingDataset<f64>, k: usize, seed: u64) -> FactorModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
    FactorModel::init_uniform(data.n_users(), data.n_items(), data.n_user_attrs(), data.n_item_feats(), k, &mut rng)
}

/// Per-user noise stream, independent of every other user's.
pub(crate) fn client_rng(noise_seed: u64, user: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(noise_seed, NOISE_STREAM), user as u64))
}

pub(crate) fn check_inputs(data: &RatingDataset<f64>, hp: &Hyperparameters, w: &WeightScheme<f64>) -> Result<()> {
    hp.validate()?;
    if let WeightScheme::Sampled { sampled, .. } = w {
        if sampled.len() != data.n_users() {
            return Err(FedError::Config(format!(
                "sampled sets cover {} users, dataset has {}",
                sampled.len(),
                data.n_users()
            )));
        }
    }
    Ok(())
}

pub(crate) fn assemble_model(
    clients: &[DVector<f64>],
    server: &ServerState,
    v: DMatrix<f64>,
) -> Result<FactorModel<f64>> {
    let k = server.q.ncols();
    let p = DMatrix::from_fn(clients.len(), k, |i, c| clients[i][c]);
    Ok(FactorModel::new(p, server.q.clone(), server.u.clone(), v)?)
}

/// Plaintext federated training.
///
/// Each epoch: the item server refreshes `V` from the broadcast `Q`; every
/// client updates its `p_i` and uploads `f(i,j)`, `f(i,d_u)`; the FL server
/// sums the uploads in user order and takes one Adam step on `U` and `Q`.
pub fn run_fedmvmf(
    data: &RatingDataset<f64>,
    hp: &Hyperparameters,
    w: &WeightScheme<f64>,
    cfg: &RunConfig,
    observer: &mut dyn RoundObserver,
) -> Result<TrainedRun> {
    check_inputs(data, hp, w)?;
    let init = initial_model(data, hp.k, cfg.seed);
    let initial_objective = objective(data, &init, w, hp.lambda1, hp.lambda2)?;
    let n = data.n_users();
    let mut clients: Vec<DVector<f64>> = (0..n).map(|i| init.p_row(i)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| client_rng(cfg.noise.seed, i)).collect();
    let mut server = ServerState::new(init.u.clone(), init.q.clone(), hp);
    let mut v = init.v.clone();
    let mut uplink: InProcessQueue<PlainBundle<f64>> = InProcessQueue::new();
    let mut trace = Vec::with_capacity(cfg.epochs);
    info!("fedmvmf: {} epochs, mode {}, noise b={}", cfg.epochs, cfg.mode, cfg.noise.scale);

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let (u_b, q_b) = (server.u.clone(), server.q.clone());

        let t = Instant::now();
        let (v_new, item_bundle) = item_server_round(data.item_feats(), &q_b, hp.lambda1, hp.lambda2)?;
        let item_time = t.elapsed().as_secs_f64();
        v = v_new;

        let t = Instant::now();
        for (user, (p, rng)) in clients.iter_mut().zip(rngs.iter_mut()).enumerate() {
            let bundle = client_round(data, &q_b, &u_b, w, hp, user, cfg.mode, p, cfg.noise.scale, rng)?;
            uplink.send(bundle)?;
        }
        let local = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut bundles = uplink.drain();
        if bundles.len() != n {
            return Err(FedError::Protocol(format!("{} uploads for {} users", bundles.len(), n)));
        }
        bundles.sort_by_key(|b| b.user);
        let (q_sum, u_sum) =
            mvmf_core::aggregate_user_bundles(&bundles, n, data.n_items(), data.n_user_attrs(), hp.k)?;
        let aggregation = t.elapsed().as_secs_f64();

        observer.observe(RoundView { epoch, u: &u_b, q: &q_b, bundles: &bundles, item_bundle: &item_bundle });

        let t = Instant::now();
        server.apply_sums(&q_sum, &u_sum, &item_bundle, hp)?;
        let server_update = item_time + t.elapsed().as_secs_f64();
        let epoch_time = start.elapsed().as_secs_f64();

        let model = assemble_model(&clients, &server, v.clone())?;
        if !model.is_finite() {
            return Err(mvmf_core::MvmfError::NonFinite("model after epoch").into());
        }
        let j = objective(data, &model, w, hp.lambda1, hp.lambda2)?;
        debug!("epoch {epoch}: J = {j:.6}");
        trace.push(EpochRecord {
            epoch,
            objective: j,
            timings: PhaseTimings {
                local_update: local,
                local_update_per_client: local / n as f64,
                aggregation,
                decryption: None,
                server_update,
                epoch: epoch_time,
            },
        });
    }
    let model = if cfg.epochs == 0 { init } else { assemble_model(&clients, &server, v)? };
    Ok(TrainedRun { model, initial_objective, trace })
}
