//! Reconstruction attacks over noise grids and solver comparisons.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use log::info;
use mvmf_attack::{
    observe_training, run_attack, write_attack_csv, AttackConfig, AttackScenario, AttackSummary, InitStrategy,
    ServerObservation, WeightVariant,
};
use mvmf_core::RatingDataset;
use mvmf_solvers::Method;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{create_versioned, ATTACK_SCHEMA, SOLVERS_SCHEMA};

/// Users attacked: the first `attack.users` of the dataset, or all of them.
pub fn attacked_users(cfg: &ExperimentConfig, data: &RatingDataset<f64>) -> Vec<usize> {
    let n = data.n_users();
    (0..cfg.attack.users.map_or(n, |u| u.min(n))).collect()
}

pub fn attack_config(cfg: &ExperimentConfig, scenario: AttackScenario) -> Result<AttackConfig> {
    Ok(AttackConfig {
        method: cfg.solver_overrides()?.get(&scenario).copied(),
        init: cfg.init()?,
        tol: cfg.attack.tol,
        max_iter: cfg.attack.max_iter,
        seed: cfg.seed,
        threads: cfg.threads,
        ..AttackConfig::default()
    })
}

/// Trains in the scenario's mode and scheme and records the rounds the attack reads.
pub fn observe(cfg: &ExperimentConfig, data: &RatingDataset<f64>, scenario: AttackScenario) -> Result<ServerObservation> {
    let (obs, run) = observe_training(data, &cfg.hyper(), scenario, cfg.attack_epochs(), cfg.seed)?;
    info!("{scenario}: trained {} epochs, final J {:.4}", run.trace.len(), run.final_objective());
    Ok(obs)
}

/// One accuracy row per scenario and noise scale; each scenario is trained once
/// and the noise is applied to the recorded uploads.
pub fn attack_grid(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[AttackScenario],
    noise: &[f64],
) -> Result<Vec<AttackSummary>> {
    let users = attacked_users(cfg, data);
    let mut rows = Vec::with_capacity(scenarios.len() * noise.len());
    for &sc in scenarios {
        let obs = observe(cfg, data, sc)?;
        let acfg = attack_config(cfg, sc)?;
        for &b in noise {
            rows.push(run_attack(data, &obs, &users, b, &acfg)?.0);
        }
    }
    Ok(rows)
}

pub fn write_attack_rows(cfg: &ExperimentConfig, name: &str, rows: &[AttackSummary]) -> Result<PathBuf> {
    let path = cfg.output_path(name);
    let mut out = create_versioned(&path, ATTACK_SCHEMA, cfg.seed)?;
    write_attack_csv(&mut out, rows)?;
    out.flush()?;
    Ok(path)
}

pub fn cmd_attack(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[AttackScenario],
    noise: &[f64],
) -> Result<(Vec<AttackSummary>, PathBuf)> {
    let rows = attack_grid(cfg, data, scenarios, noise)?;
    let path = write_attack_rows(cfg, "attack.csv", &rows)?;
    Ok((rows, path))
}

/// Noise sweep; `wide` keeps the InclUnc scenarios and uses the wide grid.
pub fn cmd_robustness(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[AttackScenario],
    wide: bool,
) -> Result<(Vec<AttackSummary>, PathBuf)> {
    let (scenarios, grid, name): (Vec<AttackScenario>, &[f64], &str) = if wide {
        let incl = scenarios.iter().copied().filter(|s| s.variant == WeightVariant::InclUnc).collect();
        (incl, &cfg.attack.wide_noise, "robustness-wide.csv")
    } else {
        (scenarios.to_vec(), &cfg.attack.robustness_noise, "robustness.csv")
    };
    let rows = attack_grid(cfg, data, &scenarios, grid)?;
    let path = write_attack_rows(cfg, name, &rows)?;
    Ok((rows, path))
}

/// Accuracy, convergence and wall time of one method on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRow {
    pub summary: AttackSummary,
    pub seconds: f64,
}

/// Every method on every scenario from the neutral start, noise-free, on the
/// first `attack.compare_users` users.
pub fn compare_solvers(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[AttackScenario],
    methods: &[Method],
) -> Result<Vec<SolverRow>> {
    let users: Vec<usize> = (0..cfg.attack.compare_users.min(data.n_users())).collect();
    let mut rows = Vec::new();
    for &sc in scenarios {
        let obs = observe(cfg, data, sc)?;
        for &method in methods {
            let acfg = AttackConfig { method: Some(method), init: InitStrategy::Neutral, ..attack_config(cfg, sc)? };
            let t = Instant::now();
            let (summary, _) = run_attack(data, &obs, &users, 0.0, &acfg)?;
            rows.push(SolverRow { summary, seconds: t.elapsed().as_secs_f64() });
        }
    }
    Ok(rows)
}

pub const SOLVERS_CSV_HEADER: &str = "scenario,solver,user_count,rating_acc,attr_acc,converged_frac,seconds";

pub fn cmd_compare_solvers(
    cfg: &ExperimentConfig,
    data: &RatingDataset<f64>,
    scenarios: &[AttackScenario],
) -> Result<(Vec<SolverRow>, PathBuf)> {
    let rows = compare_solvers(cfg, data, scenarios, &Method::ALL)?;
    let path = cfg.output_path("solvers.csv");
    let mut out = create_versioned(&path, SOLVERS_SCHEMA, cfg.seed)?;
    writeln!(out, "{SOLVERS_CSV_HEADER}")?;
    for r in &rows {
        let s = &r.summary;
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.4},{:.3}",
            s.scenario, s.method, s.user_count, s.accuracy.rating_acc, s.accuracy.attr_acc, s.converged_frac, r.seconds
        )?;
    }
    out.flush()?;
    Ok((rows, path))
}
