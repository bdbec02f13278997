//! Top-10 recommendation quality in the three test scenarios.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use log::info;
use mvmf_core::metrics::{ndcg_at_10, precision_recall_f1, RankedRecommendations, Truth, TOP_K};
use mvmf_core::nalgebra::DVector;
use mvmf_core::{cold_start_item, cold_start_user, derive_seed, FactorModel, Hyperparameters, RatingDataset};
use mvmf_data::{split, Scenario, Split, SplitSpec, TestRating};
use mvmf_federation::UpdateMode;
use mvmf_paillier::KeyPair;

use crate::config::{weight_scheme, ExperimentConfig, SchemeKind, Variant};
use crate::error::{CliError, Result};
use crate::output::{create_versioned, EVAL_SCHEMA};
use crate::train::{generate_keys, sample_seed, train_with};

const ROUND_STREAM: u64 = 0xE7A1;

/// Where a latent vector used at prediction time came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InferencePath {
    /// Row of the trained model.
    Trained,
    /// Ridge fit of a new item's features against the item-feature factors.
    ItemFeatures,
    /// Ridge fit of a new user's attributes against the attribute factors.
    UserAttributes,
}

/// Metrics of one ranked evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `NaN` when no user has a non-zero ideal DCG.
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub users: usize,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["ndcg10", "precision", "recall", "f1"];

    pub fn values(&self) -> [f64; 4] {
        [self.ndcg, self.precision, self.recall, self.f1]
    }
}

/// Ranks each test user's held-out items by `predict` and scores the top 10
/// against the held-out ratings.
pub fn score_predictions<F>(test: &[TestRating], relevance: f64, predict: F) -> Metrics
where
    F: FnMut(usize, usize) -> f64,
{
    let mut truth: Truth = HashMap::new();
    let mut candidates: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in test {
        truth.entry(t.user).or_default().insert(t.item, t.rating);
        candidates.entry(t.user).or_default().push(t.item);
    }
    let candidates: Vec<(usize, Vec<usize>)> = candidates.into_iter().collect();
    let recs = RankedRecommendations::from_scores(&candidates, TOP_K, predict).with_threshold(relevance);
    let pr = precision_recall_f1(&recs, &truth);
    Metrics {
        ndcg: ndcg_at_10(&recs, &truth).unwrap_or(f64::NAN),
        precision: pr.precision,
        recall: pr.recall,
        f1: pr.f1,
        users: pr.users,
    }
}

/// Latent vectors of every test user and item, with the path that produced them.
#[derive(Debug, Clone)]
pub struct Latents {
    pub users: HashMap<usize, (DVector<f64>, InferencePath)>,
    pub items: HashMap<usize, (DVector<f64>, InferencePath)>,
}

impl Latents {
    /// Trained rows for known users and items; cold items from their features
    /// and cold users from their attributes.
    pub fn resolve(data: &RatingDataset<f64>, sp: &Split, model: &FactorModel<f64>, hp: &Hyperparameters) -> Result<Self> {
        let train_index = sp.train_index();
        let mut users = HashMap::new();
        let mut items = HashMap::new();
        for t in &sp.test {
            if !users.contains_key(&t.user) {
                let entry = match train_index.get(&t.user) {
                    Some(&ti) => (model.p_row(ti), InferencePath::Trained),
                    None => (
                        cold_start_user(&data.user_attr_row(t.user), &model.u, hp.lambda1, hp.lambda2)?,
                        InferencePath::UserAttributes,
                    ),
                };
                users.insert(t.user, entry);
            }
            if !items.contains_key(&t.item) {
                let entry = if sp.cold_items.binary_search(&t.item).is_ok() {
                    let y = data.item_feats().row(t.item).transpose();
                    (cold_start_item(&y, &model.v, hp.lambda1, hp.lambda2)?, InferencePath::ItemFeatures)
                } else {
                    (model.q_row(t.item), InferencePath::Trained)
                };
                items.insert(t.item, entry);
            }
        }
        Ok(Self { users, items })
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        match (self.users.get(&user), self.items.get(&item)) {
            (Some((p, _)), Some((q, _))) => p.dot(q),
            _ => f64::NAN,
        }
    }

    /// Number of user and item vectors per path.
    pub fn path_counts(&self) -> BTreeMap<InferencePath, usize> {
        let mut out = BTreeMap::new();
        for (_, path) in self.users.values().chain(self.items.values()) {
            *out.entry(*path).or_insert(0) += 1;
        }
        out
    }

    pub fn user_paths(&self) -> BTreeMap<InferencePath, usize> {
        let mut out = BTreeMap::new();
        for (_, path) in self.users.values() {
            *out.entry(*path).or_insert(0) += 1;
        }
        out
    }
}

/// Scores one trained model on one split.
pub fn evaluate_model(
    data: &RatingDataset<f64>,
    sp: &Split,
    model: &FactorModel<f64>,
    hp: &Hyperparameters,
    relevance: f64,
) -> Result<(Metrics, Latents)> {
    let latents = Latents::resolve(data, sp, model, hp)?;
    let metrics = score_predictions(&sp.test, relevance, |i, j| latents.predict(i, j));
    Ok((metrics, latents))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub scenario: Scenario,
    pub variant: Variant,
    pub round: usize,
    pub metrics: Metrics,
    pub paths: BTreeMap<InferencePath, usize>,
}

/// Seed of round `r`; the split and the sampled sets derive from it.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    derive_seed(derive_seed(seed, ROUND_STREAM), round as u64)
}

/// For every round and scenario: split, train each variant on the same
/// training set with the same sampled weights, and score.
pub fn evaluate(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[Scenario],
    variants: &[Variant],
    rounds: usize,
) -> Result<Vec<EvalRow>> {
    let keys: Option<KeyPair> =
        if variants.contains(&Variant::Priv) { Some(generate_keys(cfg, &cfg.priv_hyper())?) } else { None };
    let hp = cfg.hyper();
    let mut rows = Vec::new();
    for round in 0..rounds {
        let seed = round_seed(cfg.seed, round);
        for &scenario in scenarios {
            let sp = split(data, &SplitSpec::new(scenario, seed))?;
            let round_cfg = ExperimentConfig { seed, ..cfg.clone() };
            for &variant in variants {
                let scheme = if variant == Variant::Priv { SchemeKind::Sampled } else { cfg.eval.scheme };
                let w = weight_scheme(scheme, &sp.train, &hp, sample_seed(seed))?;
                let run = train_with(&round_cfg, &sp.train, variant, UpdateMode::SemiAls, &w, keys.as_ref())?;
                let (metrics, latents) = evaluate_model(data, &sp, &run.model, &hp, cfg.eval.relevance)?;
                info!(
                    "round {round} {scenario} {variant}: ndcg {:.4} f1 {:.4} ({} users)",
                    metrics.ndcg, metrics.f1, metrics.users
                );
                rows.push(EvalRow { scenario, variant, round, metrics, paths: latents.path_counts() });
            }
        }
    }
    Ok(rows)
}

/// Mean and sample standard deviation of one metric over rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// `(scenario, variant, metric)` to its mean and standard deviation over rounds.
pub fn summarize(rows: &[EvalRow]) -> BTreeMap<(String, Variant, &'static str), MeanStd> {
    let mut groups: BTreeMap<(String, Variant, &'static str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (name, v) in Metrics::NAMES.iter().zip(r.metrics.values()) {
            groups.entry((r.scenario.name().to_string(), r.variant, name)).or_default().push(v);
        }
    }
    groups.into_iter().map(|(k, v)| (k, MeanStd::of(&v))).collect()
}

/// Relative difference in percent of the encrypted run against the plaintext one.
pub fn diff_percent(fed: f64, priv_: f64) -> f64 {
    (priv_ - fed).abs() / fed.abs() * 100.0
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[Scenario],
    variants: &[Variant],
    rounds: usize,
) -> Result<(Vec<EvalRow>, PathBuf, PathBuf)> {
    if variants.is_empty() || scenarios.is_empty() {
        return Err(CliError::input("evaluate needs at least one scenario and one variant"));
    }
    let rows = evaluate(cfg, data, scenarios, variants, rounds)?;
    let per_round = cfg.output_path("eval.csv");
    let mut out = create_versioned(&per_round, EVAL_SCHEMA, cfg.seed)?;
    writeln!(out, "scenario,variant,round,ndcg10,precision,recall,f1,test_users,trained,item_features,user_attributes")?;
    for r in &rows {
        let m = &r.metrics;
        let count = |p| r.paths.get(&p).copied().unwrap_or(0);
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            r.scenario,
            r.variant,
            r.round,
            m.ndcg,
            m.precision,
            m.recall,
            m.f1,
            m.users,
            count(InferencePath::Trained),
            count(InferencePath::ItemFeatures),
            count(InferencePath::UserAttributes)
        )?;
    }
    out.flush()?;

    let summary_path = cfg.output_path("eval-summary.csv");
    let mut out = create_versioned(&summary_path, EVAL_SCHEMA, cfg.seed)?;
    writeln!(out, "scenario,variant,metric,mean,std,rounds")?;
    for ((scenario, variant, metric), s) in summarize(&rows) {
        writeln!(out, "{scenario},{variant},{metric},{:.6},{:.6},{}", s.mean, s.std, s.n)?;
    }
    out.flush()?;
    Ok((rows, per_round, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_set() -> Vec<TestRating> {
        [(0, 1, 5.0), (0, 2, 3.0), (0, 4, 1.0), (1, 0, 4.0), (1, 3, 2.0)]
            .into_iter()
            .map(|(user, item, rating)| TestRating { user, item, rating })
            .collect()
    }

    #[test]
    fn oracle_predictions_score_perfectly() {
        let test = test_set();
        let truth: HashMap<(usize, usize), f64> = test.iter().map(|t| ((t.user, t.item), t.rating)).collect();
        let m = score_predictions(&test, 4.0, |i, j| truth[&(i, j)]);
        assert!((m.ndcg - 1.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.users, 2);
    }

    #[test]
    fn reversed_predictions_score_lower() {
        let test = test_set();
        let truth: HashMap<(usize, usize), f64> = test.iter().map(|t| ((t.user, t.item), t.rating)).collect();
        let m = score_predictions(&test, 4.0, |i, j| -truth[&(i, j)]);
        assert!(m.ndcg < 1.0);
    }

    #[test]
    fn mean_std_uses_the_sample_deviation() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
        assert_eq!(format!("{s}"), "2.0000 ± 1.0000");
        assert!((diff_percent(0.5, 0.505) - 1.0).abs() < 1e-9);
    }
}
