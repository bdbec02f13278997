use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_core::{Hyperparameters, PlainBundle, RatingDataset};
use mvmf_federation::{laplace, run_fedmvmf, ObservedRound, RoundRecorder, RunConfig, TrainedRun};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AttackError, Result};
use crate::scenario::AttackScenario;

const OBSERVATION_NOISE_STREAM: u64 = 0x0B5E;

/// Hyperparameters the server knows because it set them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownHyper {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    /// Client-side plain gradient step in SGD mode.
    pub sgd_step: f64,
}

impl From<&Hyperparameters> for KnownHyper {
    fn from(hp: &Hyperparameters) -> Self {
        Self { lambda1: hp.lambda1, lambda2: hp.lambda2, alpha: hp.alpha, sgd_step: hp.sgd_step }
    }
}

/// Broadcast state and uploads of one round, uploads indexed by user.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSnapshot {
    pub epoch: usize,
    pub u: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub bundles: Vec<PlainBundle<f64>>,
}

impl From<&ObservedRound> for RoundSnapshot {
    fn from(r: &ObservedRound) -> Self {
        Self { epoch: r.epoch, u: r.u.clone(), q: r.q.clone(), bundles: r.bundles.clone() }
    }
}

/// One user's uploads in a round, split into item rows and attribute rows.
#[derive(Debug, Clone, PartialEq)]
pub struct UserUploads {
    pub items: Vec<usize>,
    /// `|items| x K`, row `s` is the upload for `items[s]`.
    pub item_grads: DMatrix<f64>,
    /// `l_x x K`.
    pub attr_grads: DMatrix<f64>,
}

impl UserUploads {
    pub fn item_row(&self, item: usize) -> Option<DVector<f64>> {
        self.items.iter().position(|&j| j == item).map(|s| self.item_grads.row(s).transpose())
    }

    /// Unit vector along the dominant direction of all uploads, sign fixed so
    /// its largest-magnitude component is positive. Noise-free uploads are all
    /// parallel to the user's latent vector, so this is that vector's direction.
    pub fn direction(&self) -> DVector<f64> {
        let k = self.item_grads.ncols();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        gram += self.item_grads.transpose() * &self.item_grads;
        gram += self.attr_grads.transpose() * &self.attr_grads;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let mut v: DVector<f64> = eig.eigenvectors.column(top).into_owned();
        let lead = v.iamax();
        if v[lead] < 0.0 {
            v = -v;
        }
        v
    }
}

/// Per-row coefficients of the uploads along a latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `f(j) . p / |p|^2` per uploaded item, i.e. weight times error.
    pub items: DVector<f64>,
    /// Same for the attribute rows.
    pub attrs: DVector<f64>,
    /// Pooled standard deviation of the coefficients implied by the
    /// off-direction part of the uploads; zero for noise-free uploads.
    pub spread: f64,
}

impl UserUploads {
    /// Least-squares coefficients of every upload row along `p`, using all
    /// components instead of one.
    pub fn project(&self, p: &DVector<f64>) -> Projection {
        let pp = p.norm_squared().max(f64::MIN_POSITIVE);
        let items = &self.item_grads * p / pp;
        let attrs = &self.attr_grads * p / pp;
        let k = p.len();
        let rows = self.item_grads.nrows() + self.attr_grads.nrows();
        let mut ss = 0.0;
        for (grads, coef) in [(&self.item_grads, &items), (&self.attr_grads, &attrs)] {
            for (s, c) in coef.iter().enumerate() {
                ss += (grads.row(s).transpose() - p * *c).norm_squared();
            }
        }
        let dof = (rows * k.saturating_sub(1)).max(1) as f64;
        Projection { items, attrs, spread: (ss / dof / pp).sqrt() }
    }
}

/// Everything an honest-but-curious server holds when it mounts the attack.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerObservation {
    pub scenario: AttackScenario,
    pub hyper: KnownHyper,
    pub r_max: f64,
    /// The round before `current`; required by the SGD attack.
    pub previous: Option<RoundSnapshot>,
    pub current: RoundSnapshot,
}

impl ServerObservation {
    /// Builds an observation from the last rounds a recorder kept.
    pub fn from_rounds(
        scenario: AttackScenario,
        hyper: KnownHyper,
        r_max: f64,
        rounds: &[ObservedRound],
    ) -> Result<Self> {
        let need = scenario.rounds_needed();
        if rounds.len() < need {
            return Err(AttackError::Observation(format!(
                "{scenario} needs {need} consecutive rounds, got {}",
                rounds.len()
            )));
        }
        let current = RoundSnapshot::from(&rounds[rounds.len() - 1]);
        let previous = (need == 2).then(|| RoundSnapshot::from(&rounds[rounds.len() - 2]));
        if let Some(prev) = &previous {
            if prev.epoch + 1 != current.epoch {
                return Err(AttackError::Observation(format!(
                    "rounds {} and {} are not consecutive",
                    prev.epoch, current.epoch
                )));
            }
        }
        let obs = Self { scenario, hyper, r_max, previous, current };
        obs.validate()?;
        Ok(obs)
    }

    fn validate(&self) -> Result<()> {
        let n = self.current.bundles.len();
        for round in std::iter::once(&self.current).chain(self.previous.iter()) {
            if round.bundles.len() != n {
                return Err(AttackError::Observation("rounds disagree on the user count".into()));
            }
            for (i, b) in round.bundles.iter().enumerate() {
                if b.user != i {
                    return Err(AttackError::Observation(format!("upload {i} belongs to user {}", b.user)));
                }
                if b.u_grads.len() != round.u.nrows() {
                    return Err(AttackError::Observation(format!("user {i} uploads a partial attribute block")));
                }
            }
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.current.bundles.len()
    }

    pub fn n_items(&self) -> usize {
        self.current.q.nrows()
    }

    pub fn n_attrs(&self) -> usize {
        self.current.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.current.q.ncols()
    }

    pub fn uploads(&self, user: usize) -> Result<UserUploads> {
        uploads_of(&self.current, user)
    }

    pub fn previous_uploads(&self, user: usize) -> Result<UserUploads> {
        let prev = self
            .previous
            .as_ref()
            .ok_or_else(|| AttackError::Observation("no previous round recorded".into()))?;
        uploads_of(prev, user)
    }

    /// Copy with i.i.d. Laplace(0, b) noise on every uploaded component, as if
    /// each client had perturbed its uploads. The broadcast state is unchanged.
    pub fn with_laplace(&self, b: f64, seed: u64) -> Self {
        let mut out = self.clone();
        if b <= 0.0 {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mvmf_core::derive_seed(seed, OBSERVATION_NOISE_STREAM));
        let rounds = out.previous.iter_mut().chain(std::iter::once(&mut out.current));
        for round in rounds {
            for bundle in &mut round.bundles {
                for (_, g) in bundle.q_grads.iter_mut().chain(bundle.u_grads.iter_mut()) {
                    g.iter_mut().for_each(|v| *v += laplace(&mut rng, b));
                }
            }
        }
        out
    }
}

fn uploads_of(round: &RoundSnapshot, user: usize) -> Result<UserUploads> {
    let bundle = round
        .bundles
        .get(user)
        .ok_or_else(|| AttackError::Invalid(format!("user {user} not observed")))?;
    let k = round.q.ncols();
    let items: Vec<usize> = bundle.item_indices().collect();
    let item_grads = DMatrix::from_fn(items.len(), k, |s, c| bundle.q_grads[s].1[c]);
    let mut attr_grads = DMatrix::zeros(round.u.nrows(), k);
    for (d, g) in &bundle.u_grads {
        attr_grads.row_mut(*d).copy_from(&g.transpose());
    }
    Ok(UserUploads { items, item_grads, attr_grads })
}

/// Trains `epochs` rounds of FedMVMF under the scenario's weight scheme and
/// returns the server's view of the final round(s) together with the run.
pub fn observe_training(
    data: &RatingDataset<f64>,
    hp: &Hyperparameters,
    scenario: AttackScenario,
    epochs: usize,
    seed: u64,
) -> Result<(ServerObservation, TrainedRun)> {
    let need = scenario.rounds_needed();
    if epochs < need {
        return Err(AttackError::Invalid(format!("{scenario} needs at least {need} training epochs")));
    }
    let mut recorder = RoundRecorder::new(need);
    let cfg = RunConfig::new(scenario.mode, epochs, seed);
    let run = run_fedmvmf(data, hp, &scenario.weight_scheme(hp.alpha), &cfg, &mut recorder)?;
    let obs = ServerObservation::from_rounds(scenario, KnownHyper::from(hp), data.r_max(), &recorder.rounds)?;
    Ok((obs, run))
}
