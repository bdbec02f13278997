use mvmf_core::nalgebra::{DMatrix, DVector};
use mvmf_federation::UpdateMode;
use mvmf_solvers::{RootProblem, System};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AttackError, Result};
use crate::observation::ServerObservation;
use crate::scenario::{AttackScenario, WeightVariant};
use crate::semials::SemiAlsSystem;
use crate::sgd::SgdSystem;

/// Norm of the neutral starting latent vector in the two-round attack.
pub const NEUTRAL_LATENT_SCALE: f64 = 0.1;
/// Random items per user in the noisy all-item two-round sweep.
pub const MAX_SWEEP_ITEMS: usize = 10;

/// Which equation set of the user's uploads a solve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedIndex {
    /// Latent component for the closed-form attack.
    Factor(usize),
    /// Item for the two-round attack.
    Item(usize),
}

/// How the starting point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Ratings at mid-scale and attributes at 0.5, or a small latent vector
    /// along the upload direction.
    Neutral,
    /// Uses the structure of the uploads: the stationarity of the closed-form
    /// update, or the scale along the upload direction that aligns the
    /// predicted next latent vector with the next uploads.
    #[default]
    Informed,
}

impl std::str::FromStr for InitStrategy {
    type Err = AttackError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neutral" => Ok(Self::Neutral),
            "informed" => Ok(Self::Informed),
            other => Err(AttackError::Invalid(format!("unknown init strategy {other:?}"))),
        }
    }
}

/// How the fixed index of a single noise-free solve is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexChoice {
    /// The index with the largest uploads, the best-conditioned equations.
    Strongest,
    /// Uniformly at random from a per-user stream.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSystem {
    SemiAls(SemiAlsSystem),
    Sgd(SgdSystem),
}

impl System for AttackSystem {
    fn dim(&self) -> usize {
        match self {
            Self::SemiAls(s) => s.dim(),
            Self::Sgd(s) => s.dim(),
        }
    }

    fn residual(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Self::SemiAls(s) => s.residual(z, out),
            Self::Sgd(s) => s.residual(z, out),
        }
    }

    fn jacobian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Self::SemiAls(s) => s.jacobian(z),
            Self::Sgd(s) => s.jacobian(z),
        }
    }
}

/// A residual system for one user and fixed index, with its starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackProblem {
    pub scenario: AttackScenario,
    pub user: usize,
    pub fixed: FixedIndex,
    pub system: AttackSystem,
    pub z0: DVector<f64>,
}

impl AttackProblem {
    pub fn build(obs: &ServerObservation, user: usize, fixed: FixedIndex, init: InitStrategy) -> Result<Self> {
        let (system, z0) = match (obs.scenario.mode, fixed) {
            (UpdateMode::SemiAls, FixedIndex::Factor(n)) => {
                let sys = SemiAlsSystem::new(obs, user, n)?;
                let z0 = match init {
                    InitStrategy::Neutral => sys.midscale_start(obs.r_max),
                    InitStrategy::Informed => sys.stationary_start(obs.hyper.lambda2),
                };
                (AttackSystem::SemiAls(sys), z0)
            }
            (UpdateMode::Sgd, FixedIndex::Item(j)) => {
                let sys = SgdSystem::new(obs, user, j)?;
                let z0 = match init {
                    InitStrategy::Neutral => sys.direction_start(NEUTRAL_LATENT_SCALE),
                    InitStrategy::Informed => sys.informed_start(1e-3, 10.0, 400),
                };
                (AttackSystem::Sgd(sys), z0)
            }
            (mode, fixed) => {
                return Err(AttackError::Invalid(format!("{fixed:?} does not index a {mode} attack")));
            }
        };
        Ok(Self { scenario: obs.scenario, user, fixed, system, z0 })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn residual_at(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.system.residual(z, &mut out);
        out
    }

    pub fn root_problem(&self, tol: f64, max_iter: usize) -> Result<RootProblem<AttackSystem>> {
        Ok(RootProblem::new(self.system.clone(), self.z0.clone())?
            .with_tol(tol)
            .with_max_iter(max_iter))
    }
}

fn expect(obs: &ServerObservation, mode: UpdateMode, variant: WeightVariant) -> Result<()> {
    let want = AttackScenario::new(mode, variant);
    if obs.scenario != want {
        return Err(AttackError::Invalid(format!("observation is {}, builder expects {want}", obs.scenario)));
    }
    Ok(())
}

pub fn build_semials_obsonly(obs: &ServerObservation, user: usize, factor: usize) -> Result<AttackProblem> {
    expect(obs, UpdateMode::SemiAls, WeightVariant::ObsOnly)?;
    AttackProblem::build(obs, user, FixedIndex::Factor(factor), InitStrategy::Neutral)
}

pub fn build_semials_inclunc(obs: &ServerObservation, user: usize, factor: usize) -> Result<AttackProblem> {
    expect(obs, UpdateMode::SemiAls, WeightVariant::InclUnc)?;
    AttackProblem::build(obs, user, FixedIndex::Factor(factor), InitStrategy::Neutral)
}

pub fn build_sgd_obsonly(obs: &ServerObservation, user: usize, item: usize) -> Result<AttackProblem> {
    expect(obs, UpdateMode::Sgd, WeightVariant::ObsOnly)?;
    AttackProblem::build(obs, user, FixedIndex::Item(item), InitStrategy::Neutral)
}

pub fn build_sgd_inclunc(obs: &ServerObservation, user: usize, item: usize) -> Result<AttackProblem> {
    expect(obs, UpdateMode::Sgd, WeightVariant::InclUnc)?;
    AttackProblem::build(obs, user, FixedIndex::Item(item), InitStrategy::Neutral)
}

/// Items a user's two-round attack may fix: uploaded in both rounds and, for
/// observed-only uploads, exactly the rated items.
fn candidate_items(obs: &ServerObservation, user: usize) -> Result<Vec<usize>> {
    let prev = obs.previous_uploads(user)?;
    let cur = obs.uploads(user)?;
    Ok(prev.items.into_iter().filter(|j| cur.items.binary_search(j).is_ok()).collect())
}

/// Fixed index for a single noise-free solve.
pub fn choose_index(obs: &ServerObservation, user: usize, choice: IndexChoice) -> Result<FixedIndex> {
    let up = obs.uploads(user)?;
    match obs.scenario.mode {
        UpdateMode::SemiAls => {
            let n = match choice {
                IndexChoice::Strongest => {
                    let mass = DVector::from_fn(obs.k(), |c, _| {
                        up.item_grads.column(c).amax().max(up.attr_grads.column(c).amax())
                    });
                    mass.imax()
                }
                IndexChoice::Random { seed } => {
                    let mut rng = user_rng(seed, user);
                    rand::Rng::gen_range(&mut rng, 0..obs.k())
                }
            };
            Ok(FixedIndex::Factor(n))
        }
        UpdateMode::Sgd => {
            let items = candidate_items(obs, user)?;
            if items.is_empty() {
                return Err(AttackError::Observation(format!("user {user} has no item in both rounds")));
            }
            let j = match choice {
                IndexChoice::Strongest => *items
                    .iter()
                    .max_by(|a, b| {
                        let na = up.item_row(**a).map_or(0.0, |v| v.norm());
                        let nb = up.item_row(**b).map_or(0.0, |v| v.norm());
                        na.total_cmp(&nb)
                    })
                    .expect("non-empty"),
                IndexChoice::Random { seed } => *items.choose(&mut user_rng(seed, user)).expect("non-empty"),
            };
            Ok(FixedIndex::Item(j))
        }
    }
}

/// Fixed indices of a noisy sweep: every latent component; every rated item
/// when only rated items are uploaded; otherwise up to [`MAX_SWEEP_ITEMS`]
/// items drawn at random.
pub fn sweep_indices(obs: &ServerObservation, user: usize, seed: u64) -> Result<Vec<FixedIndex>> {
    match obs.scenario.mode {
        UpdateMode::SemiAls => Ok((0..obs.k()).map(FixedIndex::Factor).collect()),
        UpdateMode::Sgd => {
            let mut items = candidate_items(obs, user)?;
            if obs.scenario.variant == WeightVariant::InclUnc {
                items.shuffle(&mut user_rng(seed, user));
                items.truncate(MAX_SWEEP_ITEMS);
                items.sort_unstable();
            }
            Ok(items.into_iter().map(FixedIndex::Item).collect())
        }
    }
}

fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mvmf_core::derive_seed(mvmf_core::derive_seed(seed, 0xA77C), user as u64))
}
