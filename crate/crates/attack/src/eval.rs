use std::io::Write;

use mvmf_core::RatingDataset;
use mvmf_solvers::Method;

use crate::error::{AttackError, Result};
use crate::observation::ServerObservation;
use crate::recover::{attack_user, method_for, AttackConfig, UserEstimate};
use crate::scenario::{AttackScenario, WeightVariant};

/// Exact-match rates of one user's reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserScore {
    pub rating_acc: f64,
    pub attr_acc: f64,
}

/// Items a reconstruction is scored on: the rated items when only those are
/// uploaded, every item otherwise (unrated truth is zero).
pub fn scored_items(data: &RatingDataset<f64>, user: usize, variant: WeightVariant) -> Vec<(usize, f64)> {
    match variant {
        WeightVariant::ObsOnly => data.user_ratings(user).to_vec(),
        WeightVariant::InclUnc => data.dense_row(user).iter().copied().enumerate().collect(),
    }
}

pub fn score_user(data: &RatingDataset<f64>, est: &UserEstimate, variant: WeightVariant) -> UserScore {
    let items = scored_items(data, est.user, variant);
    let hits = items.iter().filter(|(j, r)| est.ratings.get(j).is_some_and(|v| v == r)).count();
    let truth = data.user_attr_row(est.user);
    let attr_hits = truth.iter().zip(&est.attrs).filter(|(t, e)| *t == *e).count();
    UserScore {
        rating_acc: ratio(hits, items.len()),
        attr_acc: ratio(attr_hits, truth.len()),
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-user accuracies averaged over the attacked users.
pub fn attack_accuracy(data: &RatingDataset<f64>, estimates: &[UserEstimate], variant: WeightVariant) -> UserScore {
    let n = estimates.len().max(1) as f64;
    let (r, a) = estimates.iter().map(|e| score_user(data, e, variant)).fold((0.0, 0.0), |acc, s| {
        (acc.0 + s.rating_acc, acc.1 + s.attr_acc)
    });
    UserScore { rating_acc: r / n, attr_acc: a / n }
}

/// Expected exact-match rate of guessing uniformly over the clipped integer
/// domain (`0..=r_max` for ratings, `{0, 1}` for attributes), averaged over
/// users like [`attack_accuracy`].
pub fn random_guess_baseline(data: &RatingDataset<f64>, users: &[usize], variant: WeightVariant) -> UserScore {
    let hi = data.r_max().round();
    let domain = hi + 1.0;
    let n = users.len().max(1) as f64;
    let mut acc = (0.0, 0.0);
    for &i in users {
        let items = scored_items(data, i, variant);
        let in_domain = items.iter().filter(|(_, r)| r.fract() == 0.0 && (0.0..=hi).contains(r)).count();
        acc.0 += ratio(in_domain, items.len()) / domain;
        let attrs = data.user_attr_row(i);
        let attr_in = attrs.iter().filter(|v| **v == 0.0 || **v == 1.0).count();
        acc.1 += ratio(attr_in, attrs.len()) / 2.0;
    }
    UserScore { rating_acc: acc.0 / n, attr_acc: acc.1 / n }
}

/// One row of an attack results table.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSummary {
    pub scenario: AttackScenario,
    pub noise_b: f64,
    pub user_count: usize,
    pub accuracy: UserScore,
    pub baseline: UserScore,
    pub method: Method,
    /// Solves that met the tolerance over all solves.
    pub converged_frac: f64,
}

/// Attacks `users` from the server's observation, optionally after Laplace(b)
/// noise on the uploads. Noisy observations use the averaging sweep.
pub fn run_attack(
    data: &RatingDataset<f64>,
    obs: &ServerObservation,
    users: &[usize],
    noise_b: f64,
    cfg: &AttackConfig,
) -> Result<(AttackSummary, Vec<UserEstimate>)> {
    if data.n_users() != obs.n_users() || data.n_items() != obs.n_items() {
        return Err(AttackError::Invalid("dataset and observation shapes differ".into()));
    }
    let noisy;
    let view = if noise_b > 0.0 {
        noisy = obs.with_laplace(noise_b, cfg.seed);
        &noisy
    } else {
        obs
    };
    let estimates = attack_users(view, users, cfg, noise_b > 0.0)?;
    let variant = obs.scenario.variant;
    let solves: usize = estimates.iter().map(|e| e.solves).sum();
    let converged: usize = estimates.iter().map(|e| e.converged).sum();
    let summary = AttackSummary {
        scenario: obs.scenario,
        noise_b,
        user_count: users.len(),
        accuracy: attack_accuracy(data, &estimates, variant),
        baseline: random_guess_baseline(data, users, variant),
        method: method_for(obs, cfg),
        converged_frac: ratio(converged, solves),
    };
    log::info!(
        "{} b={} users={} rating_acc={:.4} attr_acc={:.4} converged={:.3}",
        summary.scenario,
        noise_b,
        summary.user_count,
        summary.accuracy.rating_acc,
        summary.accuracy.attr_acc,
        summary.converged_frac
    );
    Ok((summary, estimates))
}

/// Attacks every user, splitting them into contiguous chunks over
/// `cfg.threads` workers; output order follows `users`.
pub fn attack_users(obs: &ServerObservation, users: &[usize], cfg: &AttackConfig, sweep: bool) -> Result<Vec<UserEstimate>> {
    let threads = cfg.threads.clamp(1, users.len().max(1));
    if threads == 1 {
        return users.iter().map(|&u| attack_user(obs, u, cfg, sweep)).collect();
    }
    let chunk = users.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = users
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&u| attack_user(obs, u, cfg, sweep)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(users.len());
        for h in handles {
            out.extend(h.join().map_err(|_| AttackError::Invalid("attack worker panicked".into()))??);
        }
        Ok(out)
    })
}

pub const ATTACK_CSV_HEADER: &str =
    "scenario,noise_b,user_count,rating_acc,attr_acc,baseline_rating,baseline_attr,solver,converged_frac";

pub fn write_attack_csv<W: Write>(out: &mut W, rows: &[AttackSummary]) -> std::io::Result<()> {
    writeln!(out, "{ATTACK_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{:.4}",
            r.scenario,
            r.noise_b,
            r.user_count,
            r.accuracy.rating_acc,
            r.accuracy.attr_acc,
            r.baseline.rating_acc,
            r.baseline.attr_acc,
            r.method,
            r.converged_frac
        )?;
    }
    Ok(())
}
