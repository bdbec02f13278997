use std::collections::BTreeMap;

use mvmf_core::nalgebra::DVector;
use mvmf_solvers::{solve, Method, SolveReport};

use crate::error::{AttackError, Result};
use crate::observation::ServerObservation;
use crate::problem::{choose_index, sweep_indices, AttackProblem, AttackSystem, FixedIndex, IndexChoice, InitStrategy};
use crate::scenario::WeightVariant;

/// Solver settings of an attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// `None` picks the scenario's default method.
    pub method: Option<Method>,
    pub init: InitStrategy,
    pub index: IndexChoice,
    pub tol: f64,
    pub max_iter: usize,
    /// Seeds the sweep item draw.
    pub seed: u64,
    /// Worker threads across users; results do not depend on it.
    pub threads: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            method: None,
            init: InitStrategy::Informed,
            index: IndexChoice::Strongest,
            tol: 1e-10,
            max_iter: 200,
            seed: 0,
            threads: 1,
        }
    }
}

/// Raw reconstruction for one user: real-valued, unclipped, `NaN` where an
/// entry could not be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub user: usize,
    pub ratings: BTreeMap<usize, f64>,
    pub attrs: DVector<f64>,
}

impl Recovery {
    fn mean_rating(&self) -> Option<f64> {
        let vals: Vec<f64> = self.ratings.values().copied().filter(|v| v.is_finite()).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Clips to `[0, hi]` and rounds half away from zero; `NaN` stays `NaN`.
pub fn postprocess(value: f64, hi: f64) -> f64 {
    if value.is_nan() {
        return f64::NAN;
    }
    value.clamp(0.0, hi).round()
}

/// Decodes a solution point into rating and attribute values.
///
/// Both systems are symmetric under negating the latent vector, which negates
/// every recovered value; the sign with a non-negative mean rating is kept.
pub fn decode(problem: &AttackProblem, z: &DVector<f64>) -> Recovery {
    let rec = decode_raw(problem, z);
    if rec.mean_rating().is_some_and(|m| m < 0.0) {
        let flipped = decode_raw(problem, &-z);
        if flipped.mean_rating().is_some_and(|m| m >= 0.0) {
            return flipped;
        }
    }
    rec
}

fn decode_raw(problem: &AttackProblem, z: &DVector<f64>) -> Recovery {
    let user = problem.user;
    match &problem.system {
        AttackSystem::SemiAls(sys) => {
            let s = sys.slots().len();
            // All-item weights are two-valued: the solved latent vector decides
            // each slot between its rated and unrated explanations.
            let values = match sys.latent(z) {
                Some(p) if sys.is_all_item() => sys.slot_values(&p),
                Some(_) => z.rows(0, s).into_owned(),
                None => DVector::from_element(s, f64::NAN),
            };
            let ratings = sys.slots().iter().zip(values.iter()).map(|(&j, &v)| (j, v)).collect();
            Recovery { user, ratings, attrs: z.rows(s, sys.n_attrs()).into_owned() }
        }
        AttackSystem::Sgd(sys) => {
            let view = sys.view();
            let ratings = view
                .prev
                .items
                .iter()
                .map(|&j| {
                    let v = match problem.scenario.variant {
                        WeightVariant::ObsOnly => view.rated_value(z, j),
                        WeightVariant::InclUnc => view.classified_rating(z, j, sys.alpha(), sys.r_max()),
                    };
                    (j, v.unwrap_or(f64::NAN))
                })
                .collect();
            Recovery { user, ratings, attrs: view.attr_values(z) }
        }
    }
}

/// One solve and its decoded reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedAttack {
    pub fixed: FixedIndex,
    pub report: SolveReport,
    pub recovery: Recovery,
}

pub fn method_for(obs: &ServerObservation, cfg: &AttackConfig) -> Method {
    cfg.method.unwrap_or_else(|| obs.scenario.default_method())
}

pub fn solve_fixed(obs: &ServerObservation, user: usize, fixed: FixedIndex, cfg: &AttackConfig) -> Result<SolvedAttack> {
    let problem = AttackProblem::build(obs, user, fixed, cfg.init)?;
    let report = solve(&problem.root_problem(cfg.tol, cfg.max_iter)?, method_for(obs, cfg))?;
    let recovery = decode(&problem, &report.solution);
    Ok(SolvedAttack { fixed, report, recovery })
}

/// Noise-free attack on one user: one solve at the configured fixed index.
pub fn recover_user(obs: &ServerObservation, user: usize, cfg: &AttackConfig) -> Result<SolvedAttack> {
    let fixed = choose_index(obs, user, cfg.index)?;
    solve_fixed(obs, user, fixed, cfg)
}

/// Integer reconstruction of one user after clipping and rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct UserEstimate {
    pub user: usize,
    pub ratings: BTreeMap<usize, f64>,
    pub attrs: Vec<f64>,
    /// Solves that met the tolerance, out of `solves`.
    pub converged: usize,
    pub solves: usize,
}

impl UserEstimate {
    /// Clips and rounds a single reconstruction.
    pub fn from_recovery(rec: &Recovery, r_max: f64) -> Self {
        Self::average(std::slice::from_ref(rec), r_max)
    }

    /// Clips every reconstruction, averages entry-wise over those that are
    /// finite, then rounds.
    pub fn average(recs: &[Recovery], r_max: f64) -> Self {
        let user = recs.first().map_or(0, |r| r.user);
        let mut ratings: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        let l = recs.first().map_or(0, |r| r.attrs.len());
        let mut attrs = vec![(0.0, 0usize); l];
        for rec in recs {
            for (&j, &v) in &rec.ratings {
                let slot = ratings.entry(j).or_insert((0.0, 0));
                if v.is_finite() {
                    slot.0 += v.clamp(0.0, r_max);
                    slot.1 += 1;
                }
            }
            for (d, &v) in rec.attrs.iter().enumerate() {
                if v.is_finite() {
                    attrs[d].0 += v.clamp(0.0, 1.0);
                    attrs[d].1 += 1;
                }
            }
        }
        let mean = |(s, c): (f64, usize)| if c == 0 { f64::NAN } else { s / c as f64 };
        Self {
            user,
            ratings: ratings.into_iter().map(|(j, acc)| (j, postprocess(mean(acc), r_max))).collect(),
            attrs: attrs.into_iter().map(|acc| postprocess(mean(acc), 1.0)).collect(),
            converged: 0,
            solves: recs.len(),
        }
    }
}

/// Attacks one user. Without noise this is a single solve; with noise it
/// solves once per sweep index and averages the clipped reconstructions.
///
/// Solves that fail outright are skipped; if all fail the estimate is empty
/// and scores zero.
pub fn attack_user(obs: &ServerObservation, user: usize, cfg: &AttackConfig, sweep: bool) -> Result<UserEstimate> {
    let indices = if sweep { sweep_indices(obs, user, cfg.seed)? } else { vec![choose_index(obs, user, cfg.index)?] };
    let mut recs = Vec::with_capacity(indices.len());
    let mut converged = 0;
    for fixed in &indices {
        match solve_fixed(obs, user, *fixed, cfg) {
            Ok(s) => {
                converged += usize::from(s.report.converged);
                recs.push(s.recovery);
            }
            Err(AttackError::Solver(e)) => log::debug!("user {user} {fixed:?}: {e}"),
            Err(e) => return Err(e),
        }
    }
    let mut est = if recs.is_empty() {
        UserEstimate {
            user,
            ratings: BTreeMap::new(),
            attrs: vec![f64::NAN; obs.n_attrs()],
            converged: 0,
            solves: 0,
        }
    } else {
        UserEstimate::average(&recs, obs.r_max)
    };
    est.user = user;
    est.converged = converged;
    est.solves = indices.len();
    Ok(est)
}
