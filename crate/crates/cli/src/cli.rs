//! Command-line front end.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use log::info;
use mvmf_attack::AttackScenario;
use mvmf_data::Scenario;
use mvmf_federation::UpdateMode;

use crate::attack::{cmd_attack, cmd_compare_solvers, cmd_robustness};
use crate::config::{ExperimentConfig, SchemeKind, Variant};
use crate::error::{CliError, Result, EXIT_OK};
use crate::evaluate::cmd_evaluate;
use crate::prepare::{cmd_prepare, load_dataset};
use crate::report::cmd_report;
use crate::train::cmd_train;

#[derive(Debug, Parser)]
#[command(name = "mvmf", version, about = "Federated multi-view matrix factorization experiments")]
pub struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(short, long, global = true, env = "MVMF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set hyper.k=8` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads for per-user attack solves.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the dataset bundle from MovieLens files or the surrogate.
    Prepare,
    /// Train one model and write its checkpoint and traces.
    Train {
        #[arg(long, value_enum, default_value_t = Variant::Fed)]
        variant: Variant,
        /// Client update: semials or sgd.
        #[arg(long, default_value = "semials")]
        mode: String,
        #[arg(long, value_enum, default_value_t = SchemeKind::Sampled)]
        scheme: SchemeKind,
    },
    /// Reconstruct ratings and attributes from observed uploads.
    Attack {
        /// Scenarios (semials-obsonly, semials-inclunc, sgd-obsonly, sgd-inclunc); default from config.
        #[arg(long = "scenario", value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Laplace noise scales; default from config.
        #[arg(long = "noise", value_delimiter = ',')]
        noise: Vec<f64>,
        /// Compare every solver from the neutral start instead.
        #[arg(long)]
        compare_solvers: bool,
    },
    /// Attack accuracy across a Laplace noise grid.
    Robustness {
        /// Wide grid on the InclUnc scenarios.
        #[arg(long)]
        wide: bool,
        #[arg(long = "scenario", value_delimiter = ',')]
        scenarios: Vec<String>,
    },
    /// Top-10 ranking quality of plaintext and encrypted training.
    Evaluate {
        /// existing, cold-item, cold-user; default from config.
        #[arg(long = "scenario", value_delimiter = ',')]
        scenarios: Vec<String>,
        #[arg(long = "variant", value_enum, value_delimiter = ',')]
        variants: Vec<Variant>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Markdown tables from the result files in the output directory.
    Report,
}

impl Cli {
    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.output {
            overrides.push(format!("output_dir={}", toml::Value::String(out.display().to_string())));
        }
        if let Some(t) = self.threads {
            overrides.push(format!("threads={t}"));
        }
        ExperimentConfig::load(self.config.as_deref(), &overrides)
    }
}

fn parse_all<T: FromStr>(names: &[String]) -> Result<Vec<T>>
where
    CliError: From<T::Err>,
{
    names.iter().map(|s| s.parse::<T>().map_err(CliError::from)).collect()
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.load_config()?;
    match &cli.command {
        Command::Prepare => {
            let (prepared, sum) = cmd_prepare(&cfg)?;
            println!(
                "{} sha256={sum} users={} items={} ratings={}",
                cfg.bundle_path().display(),
                prepared.data.n_users(),
                prepared.data.n_items(),
                prepared.data.n_ratings()
            );
        }
        Command::Train { variant, mode, scheme } => {
            let mode = UpdateMode::from_str(mode)?;
            let data = load_dataset(&cfg)?.data;
            let (outcome, files) = cmd_train(&cfg, &data, *variant, mode, *scheme)?;
            println!("{} objective={:.6}", files.model.display(), outcome.run.final_objective());
            if let Some(p) = outcome.privacy {
                println!(
                    "equations={} unknowns={} underdetermined={} membership_rate={:.4}",
                    p.leakage.equations, p.leakage.variables, p.leakage.underdetermined, p.membership_rate
                );
            }
        }
        Command::Attack { scenarios, noise, compare_solvers } => {
            let data = load_dataset(&cfg)?.data;
            let scenarios: Vec<AttackScenario> =
                if scenarios.is_empty() { cfg.attack_scenarios()? } else { parse_all(scenarios)? };
            if *compare_solvers {
                let (_, path) = cmd_compare_solvers(&cfg, &data, &scenarios)?;
                println!("{}", path.display());
            } else {
                let noise = if noise.is_empty() { cfg.attack.noise.clone() } else { noise.clone() };
                let (_, path) = cmd_attack(&cfg, &data, &scenarios, &noise)?;
                println!("{}", path.display());
            }
        }
        Command::Robustness { wide, scenarios } => {
            let data = load_dataset(&cfg)?.data;
            let scenarios: Vec<AttackScenario> =
                if scenarios.is_empty() { cfg.attack_scenarios()? } else { parse_all(scenarios)? };
            let (_, path) = cmd_robustness(&cfg, &data, &scenarios, *wide)?;
            println!("{}", path.display());
        }
        Command::Evaluate { scenarios, variants, rounds } => {
            let data = load_dataset(&cfg)?.data;
            let scenarios: Vec<Scenario> =
                if scenarios.is_empty() { cfg.eval_scenarios()? } else { parse_all(scenarios)? };
            let variants = if variants.is_empty() { cfg.eval.variants.clone() } else { variants.clone() };
            let (_, rows, summary) = cmd_evaluate(&cfg, &data, &scenarios, &variants, rounds.unwrap_or(cfg.eval.rounds))?;
            println!("{}\n{}", rows.display(), summary.display());
        }
        Command::Report => {
            let path = cmd_report(&cfg)?;
            println!("{}", path.display());
        }
    }
    info!("done");
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_INPUT } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from(["mvmf", "--seed", "9", "--set", "hyper.k=3", "report"]).unwrap();
        let cfg = cli.load_config().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.hyper.k, 3);
    }

    #[test]
    fn unknown_subcommand_is_an_input_error() {
        assert_eq!(main_with(["mvmf", "fly"]), crate::error::EXIT_INPUT);
    }
}
