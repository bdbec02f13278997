//! Plaintext and encrypted training runs, checkpoints and privacy reports.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use log::info;
use mvmf_core::nalgebra::DMatrix;
use mvmf_core::{derive_seed, FactorModel, Hyperparameters, RatingDataset, WeightScheme};
use mvmf_federation::{
    leakage_report, membership_guess_rate, run_fedmvmf, run_privmvmf, write_phase_csv, write_trace_csv,
    DecrypterPool, LeakageReport, PrivConfig, RunConfig, TrainedRun, UpdateMode,
};
use mvmf_paillier::{keygen, KeyPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{weight_scheme, ExperimentConfig, SchemeKind, Variant};
use crate::error::{CliError, Result};
use crate::output::{create, create_versioned, MODEL_SCHEMA, PRIVACY_SCHEMA};

const SAMPLE_STREAM: u64 = 0x5A3E;
const KEY_STREAM: u64 = 0x4B45;
const MEMBERSHIP_STREAM: u64 = 0x3E3B;

/// What the server could learn from one encrypted run's upload pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyReport {
    pub leakage: LeakageReport,
    /// Empirical success of guessing "rated" for a random uploaded item.
    pub membership_rate: f64,
    pub key_bits: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub variant: Variant,
    pub mode: UpdateMode,
    pub scheme: SchemeKind,
    pub run: TrainedRun,
    pub privacy: Option<PrivacyReport>,
}

/// Seed of the sampled unrated sets; shared by both variants so same-seed runs
/// see identical weights.
pub fn sample_seed(seed: u64) -> u64 {
    derive_seed(seed, SAMPLE_STREAM)
}

/// Seeded key pair of the configured size.
pub fn generate_keys(cfg: &ExperimentConfig, hp: &Hyperparameters) -> Result<KeyPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, KEY_STREAM));
    info!("generating a {}-bit key", hp.keysize);
    Ok(keygen(hp.keysize as u64, &mut rng)?)
}

fn sampled_sets(w: &WeightScheme<f64>) -> &[BTreeSet<usize>] {
    match w {
        WeightScheme::Sampled { sampled, .. } => sampled,
        _ => &[],
    }
}

pub fn privacy_report(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    w: &WeightScheme<f64>,
    k: usize,
    key_bits: u64,
) -> PrivacyReport {
    let sampled = sampled_sets(w);
    PrivacyReport {
        leakage: leakage_report(data, sampled, k, cfg.privacy.leakage_ratio),
        membership_rate: membership_guess_rate(
            data,
            sampled,
            cfg.privacy.membership_trials,
            derive_seed(cfg.seed, MEMBERSHIP_STREAM),
        ),
        key_bits,
    }
}

/// Trains with an explicit weight scheme; `keys` is required for the encrypted variant.
pub fn train_with(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    variant: Variant,
    mode: UpdateMode,
    w: &WeightScheme<f64>,
    keys: Option<&KeyPair>,
) -> Result<TrainedRun> {
    match variant {
        Variant::Fed => {
            let hp = cfg.hyper();
            let run_cfg = RunConfig::new(mode, hp.epochs, cfg.seed);
            Ok(run_fedmvmf(data, &hp, w, &run_cfg, &mut ())?)
        }
        Variant::Priv => {
            if mode != UpdateMode::SemiAls {
                return Err(CliError::input("encrypted training supports the semials mode only"));
            }
            let keys = keys.ok_or_else(|| CliError::Other("encrypted training without a key pair".into()))?;
            let hp = cfg.priv_hyper();
            let members: Vec<usize> = (0..cfg.privacy.decrypters.min(data.n_users())).collect();
            let pool = DecrypterPool::new(members, data.n_users())?;
            let priv_cfg = PrivConfig::new(hp.epochs, cfg.seed);
            Ok(run_privmvmf(data, &hp, w, &pool, keys, &priv_cfg)?.run)
        }
    }
}

/// One training run as configured; the encrypted variant also reports leakage
/// and membership-guess rates.
pub fn train(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    variant: Variant,
    mode: UpdateMode,
    scheme: SchemeKind,
) -> Result<TrainOutcome> {
    if variant == Variant::Priv && scheme != SchemeKind::Sampled {
        return Err(CliError::input("encrypted training uses the sampled weight scheme"));
    }
    let hp = cfg.hyper();
    let w = weight_scheme(scheme, data, &hp, sample_seed(cfg.seed))?;
    let (run, privacy) = match variant {
        Variant::Fed => (train_with(cfg, data, variant, mode, &w, None)?, None),
        Variant::Priv => {
            let php = cfg.priv_hyper();
            let keys = generate_keys(cfg, &php)?;
            let run = train_with(cfg, data, variant, mode, &w, Some(&keys))?;
            (run, Some(privacy_report(cfg, data, &w, php.k, keys.public.bits())))
        }
    };
    info!("{variant} {mode} {scheme}: J {:.4} -> {:.4}", run.initial_objective, run.final_objective());
    Ok(TrainOutcome { variant, mode, scheme, run, privacy })
}

/// Serialized factor matrices (row-major) with the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub seed: u64,
    pub variant: Variant,
    pub mode: String,
    pub scheme: SchemeKind,
    pub epochs: usize,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], k: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != k) {
        return Err(CliError::input(format!("checkpoint {what} rows are not {k} wide")));
    }
    Ok(DMatrix::from_fn(rows.len(), k, |i, c| rows[i][c]))
}

impl Checkpoint {
    pub fn new(seed: u64, outcome: &TrainOutcome) -> Self {
        let m = &outcome.run.model;
        Self {
            schema: MODEL_SCHEMA.into(),
            seed,
            variant: outcome.variant,
            mode: outcome.mode.to_string(),
            scheme: outcome.scheme,
            epochs: outcome.run.trace.len(),
            p: rows(&m.p),
            q: rows(&m.q),
            u: rows(&m.u),
            v: rows(&m.v),
        }
    }

    pub fn model(&self) -> Result<FactorModel<f64>> {
        if self.schema != MODEL_SCHEMA {
            return Err(CliError::input(format!("checkpoint schema {:?}, expected {MODEL_SCHEMA:?}", self.schema)));
        }
        let k = self.p.first().or(self.q.first()).map_or(0, Vec::len);
        Ok(FactorModel::new(
            matrix(&self.p, k, "P")?,
            matrix(&self.q, k, "Q")?,
            matrix(&self.u, k, "U")?,
            matrix(&self.v, k, "V")?,
        )?)
    }
}

/// Files written by `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFiles {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub phases: PathBuf,
    pub privacy: Option<PathBuf>,
}

pub fn write_outcome(cfg: &ExperimentConfig, outcome: &TrainOutcome) -> Result<TrainFiles> {
    let tag = outcome.variant.name();
    let files = TrainFiles {
        model: cfg.output_path(format!("model-{tag}.json")),
        trace: cfg.output_path(format!("trace-{tag}.csv")),
        phases: cfg.output_path(format!("phases-{tag}.csv")),
        privacy: outcome.privacy.map(|_| cfg.output_path(format!("privacy-{tag}.csv"))),
    };
    let ckpt = Checkpoint::new(cfg.seed, outcome);
    let mut out = create(&files.model)?;
    serde_json::to_writer(&mut out, &ckpt).map_err(|e| CliError::Other(e.to_string()))?;
    out.flush()?;

    let mut out = create(&files.trace)?;
    write_trace_csv(&mut out, cfg.seed, outcome.run.initial_objective, &outcome.run.trace)?;
    out.flush()?;
    let mut out = create(&files.phases)?;
    write_phase_csv(&mut out, cfg.seed, &outcome.run.trace)?;
    out.flush()?;

    if let (Some(report), Some(path)) = (outcome.privacy, &files.privacy) {
        let mut out = create_versioned(path, PRIVACY_SCHEMA, cfg.seed)?;
        writeln!(out, "key_bits,equations,variables,underdetermined,membership_rate,trials")?;
        writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            report.key_bits,
            report.leakage.equations,
            report.leakage.variables,
            report.leakage.underdetermined,
            report.membership_rate,
            cfg.privacy.membership_trials
        )?;
        out.flush()?;
    }
    Ok(files)
}

pub fn cmd_train(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    variant: Variant,
    mode: UpdateMode,
    scheme: SchemeKind,
) -> Result<(TrainOutcome, TrainFiles)> {
    let outcome = train(cfg, data, variant, mode, scheme)?;
    let files = write_outcome(cfg, &outcome)?;
    Ok((outcome, files))
}
