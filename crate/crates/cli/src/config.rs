//! TOML experiment configuration with environment and command-line overrides.
//!
//! Precedence, lowest first: built-in defaults, the config file, the
//! `MVMF_DATA_ROOT` / `MVMF_OUTPUT_ROOT` environment variables, then
//! `--set section.key=value` flags.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mvmf_attack::{AttackScenario, InitStrategy};
use mvmf_core::{Hyperparameters, WeightScheme};
use mvmf_data::{Scenario, SurrogateSpec};
use mvmf_solvers::Method;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DATA_ROOT_ENV: &str = "MVMF_DATA_ROOT";
pub const OUTPUT_ROOT_ENV: &str = "MVMF_OUTPUT_ROOT";

/// Training hyperparameters; defaults are the MovieLens configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperConfig {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub iterations: usize,
    pub epochs: usize,
    pub keysize: usize,
    pub sgd_step: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            k: h.k,
            lambda1: h.lambda1,
            lambda2: h.lambda2,
            alpha: h.alpha,
            gamma: h.gamma,
            beta1: h.beta1,
            beta2: h.beta2,
            epsilon: h.epsilon,
            rho: h.rho,
            iterations: h.iterations,
            epochs: h.epochs,
            keysize: h.keysize,
            sgd_step: h.sgd_step,
        }
    }
}

impl HyperConfig {
    pub fn to_hyper(&self) -> Hyperparameters {
        Hyperparameters {
            k: self.k,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            alpha: self.alpha,
            gamma: self.gamma,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            rho: self.rho,
            iterations: self.iterations,
            epochs: self.epochs,
            keysize: self.keysize,
            sgd_step: self.sgd_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// MovieLens when a raw directory is configured, the surrogate otherwise.
    Auto,
    Movielens,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory holding `ratings.dat`, `users.dat`, `movies.dat` and optionally the tag genome.
    pub raw_dir: Option<PathBuf>,
    /// Prepared bundle; relative paths resolve against the output directory.
    pub bundle: PathBuf,
    /// Subsample sizes; unset keeps everything.
    pub users: Option<usize>,
    pub items: Option<usize>,
    pub min_ratings: usize,
    /// PCA components of the item features.
    pub components: usize,
    pub surrogate_users: usize,
    pub surrogate_movies: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SurrogateSpec::default();
        Self {
            source: DataSource::Auto,
            raw_dir: None,
            bundle: PathBuf::from("dataset.json"),
            users: None,
            items: None,
            min_ratings: 1,
            components: mvmf_data::ITEM_COMPONENTS,
            surrogate_users: s.users,
            surrogate_movies: s.movies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub scenarios: Vec<String>,
    /// Laplace scales of the `attack` command.
    pub noise: Vec<f64>,
    /// Grid of the `robustness` command.
    pub robustness_noise: Vec<f64>,
    /// Grid of `robustness --wide`, which runs the InclUnc scenarios only.
    pub wide_noise: Vec<f64>,
    /// Attack the first `users` users; unset attacks everyone.
    pub users: Option<usize>,
    /// Users per scenario and method in the solver comparison.
    pub compare_users: usize,
    /// Training epochs before the observed round(s); unset uses `hyper.epochs`.
    pub epochs: Option<usize>,
    pub init: String,
    /// Scenario name to solver name.
    pub solvers: BTreeMap<String, String>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            scenarios: AttackScenario::ALL.iter().map(|s| s.name().to_string()).collect(),
            noise: vec![0.0],
            robustness_noise: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            wide_noise: vec![1.0, 10.0, 100.0, 1000.0, 10000.0],
            users: None,
            compare_users: 20,
            epochs: None,
            init: "informed".into(),
            solvers: BTreeMap::new(),
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    ObsOnly,
    InclUnc,
    Sampled,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::ObsOnly => "obs-only",
            SchemeKind::InclUnc => "incl-unc",
            SchemeKind::Sampled => "sampled",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Plaintext or encrypted training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Fed,
    Priv,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Fed => "fed",
            Variant::Priv => "priv",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub rounds: usize,
    pub scenarios: Vec<String>,
    pub variants: Vec<Variant>,
    /// Weight scheme of the plaintext run; the encrypted run always samples.
    pub scheme: SchemeKind,
    /// Ratings at or above this count as relevant.
    pub relevance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            scenarios: Scenario::ALL.iter().map(|s| s.name().to_string()).collect(),
            variants: vec![Variant::Fed, Variant::Priv],
            scheme: SchemeKind::Sampled,
            relevance: mvmf_core::metrics::DEFAULT_RELEVANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    /// Size of the decrypter pool (the first users).
    pub decrypters: usize,
    /// Overrides `hyper.keysize` for encrypted runs.
    pub keysize: Option<usize>,
    pub membership_trials: usize,
    /// Unknowns-to-equations ratio above which the aggregate is flagged underdetermined.
    pub leakage_ratio: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            decrypters: 1,
            keysize: None,
            membership_trials: 1000,
            leakage_ratio: mvmf_federation::DEFAULT_LEAKAGE_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for per-user attack solves.
    pub threads: usize,
    pub hyper: HyperConfig,
    pub data: DataConfig,
    pub attack: AttackSection,
    pub eval: EvalConfig,
    pub privacy: PrivacyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            output_dir: PathBuf::from("results"),
            threads: 1,
            hyper: HyperConfig::default(),
            data: DataConfig::default(),
            attack: AttackSection::default(),
            eval: EvalConfig::default(),
            privacy: PrivacyConfig::default(),
        }
    }
}

fn toml_err(e: impl fmt::Display) -> CliError {
    CliError::input(format!("config: {e}"))
}

/// Parses the right-hand side of `--set` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value` to a table, creating intermediate tables.
fn set_dotted(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::input(format!("override key {key:?} is malformed")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::input(format!("override {key:?}: {part} is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text and applies `overrides` (`section.key=value`).
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(toml_err)?;
        for o in overrides {
            set_dotted(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(toml_err)?;
        Ok(cfg)
    }

    /// Loads `path` (defaults when `None`), then environment, then overrides, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut table: toml::Table = text.parse().map_err(toml_err)?;
        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            set_dotted(&mut table, &format!("data.raw_dir={}", toml::Value::String(root)))?;
        }
        if let Ok(root) = std::env::var(OUTPUT_ROOT_ENV) {
            set_dotted(&mut table, &format!("output_dir={}", toml::Value::String(root)))?;
        }
        for o in overrides {
            set_dotted(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(toml_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper().validate()?;
        if self.threads == 0 {
            return Err(CliError::input("threads must be at least 1"));
        }
        self.attack_scenarios()?;
        self.eval_scenarios()?;
        self.solver_overrides()?;
        self.init()?;
        for b in self.attack.noise.iter().chain(&self.attack.robustness_noise).chain(&self.attack.wide_noise) {
            if !(b.is_finite() && *b >= 0.0) {
                return Err(CliError::input(format!("noise scale {b} must be finite and non-negative")));
            }
        }
        if self.eval.rounds == 0 {
            return Err(CliError::input("eval.rounds must be at least 1"));
        }
        if self.privacy.decrypters == 0 {
            return Err(CliError::input("privacy.decrypters must be at least 1"));
        }
        if self.data.source == DataSource::Movielens && self.data.raw_dir.is_none() {
            return Err(CliError::input(format!("data.source = movielens needs data.raw_dir or {DATA_ROOT_ENV}")));
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyperparameters {
        self.hyper.to_hyper()
    }

    /// Hyperparameters of encrypted runs (key size override applied).
    pub fn priv_hyper(&self) -> Hyperparameters {
        let mut h = self.hyper();
        if let Some(bits) = self.privacy.keysize {
            h.keysize = bits;
        }
        h
    }

    pub fn attack_scenarios(&self) -> Result<Vec<AttackScenario>> {
        self.attack.scenarios.iter().map(|s| s.parse().map_err(CliError::from)).collect()
    }

    pub fn eval_scenarios(&self) -> Result<Vec<Scenario>> {
        self.eval.scenarios.iter().map(|s| s.parse().map_err(CliError::from)).collect()
    }

    pub fn solver_overrides(&self) -> Result<HashMap<AttackScenario, Method>> {
        self.attack
            .solvers
            .iter()
            .map(|(sc, m)| Ok((AttackScenario::from_str(sc)?, Method::from_str(m)?)))
            .collect()
    }

    pub fn init(&self) -> Result<InitStrategy> {
        Ok(self.attack.init.parse()?)
    }

    pub fn attack_epochs(&self) -> usize {
        self.attack.epochs.unwrap_or(self.hyper.epochs)
    }

    /// Whether `prepare` reads MovieLens files rather than generating the surrogate.
    pub fn uses_movielens(&self) -> bool {
        match self.data.source {
            DataSource::Auto => self.data.raw_dir.is_some(),
            DataSource::Movielens => true,
            DataSource::Surrogate => false,
        }
    }

    pub fn surrogate_spec(&self) -> SurrogateSpec {
        SurrogateSpec {
            users: self.data.surrogate_users,
            movies: self.data.surrogate_movies,
            seed: self.seed,
            ..SurrogateSpec::default()
        }
    }

    pub fn bundle_path(&self) -> PathBuf {
        self.output_path(&self.data.bundle)
    }

    pub fn output_path(&self, name: impl AsRef<Path>) -> PathBuf {
        let name = name.as_ref();
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.output_dir.join(name)
        }
    }
}

/// Builds the weight scheme of a plaintext run.
pub fn weight_scheme(
    kind: SchemeKind,
    data: &mvmf_core::RatingDataset<f64>,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<WeightScheme<f64>> {
    Ok(match kind {
        SchemeKind::ObsOnly => WeightScheme::ObsOnly,
        SchemeKind::InclUnc => WeightScheme::InclUnc { alpha: hp.alpha },
        SchemeKind::Sampled => mvmf_federation::sampled_scheme(data, hp, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.hyper(), Hyperparameters::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_beat_file_values() {
        let text = "seed = 5\n[hyper]\nk = 4\n";
        let cfg = ExperimentConfig::from_toml(text, &["hyper.k=8".into(), "attack.init=neutral".into()]).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.hyper.k, 8);
        assert_eq!(cfg.attack.init, "neutral");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_input_errors() {
        let err = ExperimentConfig::from_toml("[hyper]\nkk = 1\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_INPUT);
        let cfg = ExperimentConfig::from_toml("[hyper]\nalpha = 1.5\n", &[]).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), crate::error::EXIT_INPUT);
        let cfg = ExperimentConfig::from_toml("", &["attack.scenarios=[\"nope\"]".into()]).unwrap();
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("", &["novalue".into()]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.attack.solvers.insert("sgd-obsonly".into(), "powell".into());
        cfg.data.users = Some(100);
        let back = ExperimentConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.solver_overrides().unwrap().len(), 1);
    }

    #[test]
    fn relative_outputs_resolve_under_the_output_dir() {
        let cfg = ExperimentConfig { output_dir: "out".into(), ..ExperimentConfig::default() };
        assert_eq!(cfg.bundle_path(), PathBuf::from("out/dataset.json"));
        assert_eq!(cfg.output_path("/abs/x.csv"), PathBuf::from("/abs/x.csv"));
    }
}
