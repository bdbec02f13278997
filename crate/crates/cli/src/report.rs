//! Markdown summary of whatever result files exist in the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::evaluate::diff_percent;
use crate::output::{read_table, Table};

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn load(cfg: &ExperimentConfig, name: &str) -> Result<Option<Table>> {
    let path = cfg.output_path(name);
    if path.exists() {
        read_table(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn attack_section(md: &mut String, title: &str, t: &Table) {
    let _ = writeln!(md, "## {title}\n");
    let _ = writeln!(md, "| scenario | noise b | users | rating acc | attr acc | guess rating | guess attr | solver |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
    for r in &t.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {} |",
            r["scenario"],
            r["noise_b"],
            r["user_count"],
            num(r, "rating_acc"),
            num(r, "attr_acc"),
            num(r, "baseline_rating"),
            num(r, "baseline_attr"),
            r["solver"]
        );
    }
    md.push('\n');
}

fn solver_section(md: &mut String, t: &Table) {
    let _ = writeln!(md, "## Solver comparison (neutral start)\n");
    let _ = writeln!(md, "| scenario | solver | rating acc | attr acc | converged | seconds |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for r in &t.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {:.4} | {:.4} | {:.3} | {:.2} |",
            r["scenario"],
            r["solver"],
            num(r, "rating_acc"),
            num(r, "attr_acc"),
            num(r, "converged_frac"),
            num(r, "seconds")
        );
    }
    md.push('\n');
}

fn eval_section(md: &mut String, t: &Table) {
    // (scenario, metric) -> variant -> (mean, std)
    let mut cells: BTreeMap<(String, String), BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    for r in &t.rows {
        cells
            .entry((r["scenario"].clone(), r["metric"].clone()))
            .or_default()
            .insert(r["variant"].clone(), (num(r, "mean"), num(r, "std")));
    }
    let _ = writeln!(md, "## Recommendation quality (mean ± std over rounds)\n");
    let _ = writeln!(md, "| scenario | metric | fed | priv | diff % |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    let fmt = |v: Option<&(f64, f64)>| v.map_or("-".to_string(), |(m, s)| format!("{m:.4} ± {s:.4}"));
    for ((scenario, metric), by_variant) in &cells {
        let (fed, pr) = (by_variant.get("fed"), by_variant.get("priv"));
        let diff = match (fed, pr) {
            (Some(f), Some(p)) => format!("{:.2}", diff_percent(f.0, p.0)),
            _ => "-".into(),
        };
        let _ = writeln!(md, "| {scenario} | {metric} | {} | {} | {diff} |", fmt(fed), fmt(pr));
    }
    md.push('\n');
}

fn phase_section(md: &mut String, t: &Table) {
    let phases = [
        ("local update (all clients)", "local_update_s"),
        ("local update (per client)", "local_update_per_client_s"),
        ("aggregation", "aggregation_s"),
        ("decryption", "decryption_s"),
        ("server update", "server_update_s"),
        ("epoch", "epoch_s"),
    ];
    let timed: Vec<_> = t.rows.iter().filter(|r| r["epoch"] != "0").collect();
    if timed.is_empty() {
        return;
    }
    let mean = |key: &str| timed.iter().map(|r| num(r, key)).filter(|v| v.is_finite()).sum::<f64>() / timed.len() as f64;
    let _ = writeln!(md, "## Encrypted epoch phases (mean seconds over {} epochs)\n", timed.len());
    let _ = writeln!(md, "| phase | seconds |");
    let _ = writeln!(md, "|---|---|");
    for (label, key) in phases {
        let _ = writeln!(md, "| {label} | {:.4} |", mean(key));
    }
    md.push('\n');
}

fn privacy_section(md: &mut String, t: &Table) {
    let _ = writeln!(md, "## Aggregate leakage\n");
    let _ = writeln!(md, "| key bits | equations | unknowns | underdetermined | membership guess rate |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for r in &t.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.4} |",
            r["key_bits"],
            r["equations"],
            r["variables"],
            r["underdetermined"],
            num(r, "membership_rate")
        );
    }
    md.push('\n');
}

/// Renders the report from the files present; errors if there are none.
pub fn render(cfg: &ExperimentConfig) -> Result<String> {
    let mut md = format!("# Experiment report\n\nRoot seed {}.\n\n", cfg.seed);
    let mut sections = 0;
    for (name, title) in [
        ("attack.csv", "Attack accuracy"),
        ("robustness.csv", "Attack accuracy under Laplace noise"),
        ("robustness-wide.csv", "Attack accuracy under large Laplace noise"),
    ] {
        if let Some(t) = load(cfg, name)? {
            attack_section(&mut md, title, &t);
            sections += 1;
        }
    }
    if let Some(t) = load(cfg, "solvers.csv")? {
        solver_section(&mut md, &t);
        sections += 1;
    }
    if let Some(t) = load(cfg, "eval-summary.csv")? {
        eval_section(&mut md, &t);
        sections += 1;
    }
    if let Some(t) = load(cfg, "trace-priv.csv")? {
        phase_section(&mut md, &t);
        sections += 1;
    }
    if let Some(t) = load(cfg, "privacy-priv.csv")? {
        privacy_section(&mut md, &t);
        sections += 1;
    }
    if sections == 0 {
        return Err(CliError::input(format!("no result files in {}", cfg.output_dir.display())));
    }
    Ok(md)
}

pub fn cmd_report(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let md = render(cfg)?;
    let path = cfg.output_path("report.md");
    std::fs::write(&path, md).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    Ok(path)
}
