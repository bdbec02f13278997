//! End-to-end runs of the `mvmf` binary on tiny datasets.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvmf_attack::{random_guess_baseline, AttackScenario};
use mvmf_cli::output::read_table;
use mvmf_cli::train::Checkpoint;
use mvmf_cli::{EXIT_INPUT, EXIT_NUMERIC, EXIT_OK};
use mvmf_data::read_bundle;

const TINY: &str = r#"
seed = 11

[hyper]
epochs = 3

[data]
surrogate_users = 40
surrogate_movies = 120
users = 30
items = 80
min_ratings = 5

[attack]
users = 5
compare_users = 3

[eval]
rounds = 2

[privacy]
keysize = 128
"#;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ml-tiny")
}

fn mvmf(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvmf"))
        .args(args)
        .env("MVMF_OUTPUT_ROOT", out)
        .env_remove("MVMF_DATA_ROOT")
        .env_remove("MVMF_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes the tiny config and prepares its bundle.
fn tiny_workspace() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.display().to_string();
    let o = mvmf(dir.path(), &["--config", &cfg, "prepare"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    (dir, cfg)
}

// sha256 of the bundle prepared from tests/fixtures/ml-tiny with two item components
// and the default seed, as computed by an external sha256 tool on the written file.
const FIXTURE_SHA256: &str = "90630d6c3d1c10f0c74d96a1e8bef6b40b59b48416fa5b8a257fd8726ac0e2b8";

#[test]
fn prepare_fixture_gives_known_checksum_and_is_idempotent() {
    let out = tempfile::tempdir().unwrap();
    let raw = format!("data.raw_dir={:?}", fixture_dir().display().to_string());
    let args = ["--set", raw.as_str(), "--set", "data.components=2", "prepare"];
    let first = mvmf(out.path(), &args);
    assert_eq!(code(&first), EXIT_OK, "{}", stderr(&first));
    assert!(String::from_utf8_lossy(&first.stdout).contains(FIXTURE_SHA256));
    let bundle = out.path().join("dataset.json");
    let bytes = std::fs::read(&bundle).unwrap();
    let second = mvmf(out.path(), &args);
    assert_eq!(code(&second), EXIT_OK);
    assert_eq!(std::fs::read(&bundle).unwrap(), bytes);
    let b = read_bundle(&bundle).unwrap();
    assert_eq!((b.n_users, b.n_items, b.ratings.len()), (6, 5, 18));
    // user 1 rated movies 10, 20, 30 with 5, 3, 4
    assert_eq!(&b.ratings[..3], &[(0, 0, 5.0), (0, 1, 3.0), (0, 2, 4.0)]);
    assert_eq!(b.source, "movielens");
}

#[test]
fn missing_raw_file_exits_with_input_code_and_path() {
    let raw = tempfile::tempdir().unwrap();
    for f in ["users.dat", "movies.dat"] {
        std::fs::copy(fixture_dir().join(f), raw.path().join(f)).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    let set = format!("data.raw_dir={:?}", raw.path().display().to_string());
    let o = mvmf(out.path(), &["--set", &set, "prepare"]);
    assert_eq!(code(&o), EXIT_INPUT);
    assert!(stderr(&o).contains("ratings.dat"), "{}", stderr(&o));
}

#[test]
fn bad_configuration_is_an_input_error() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&mvmf(out.path(), &["--set", "hyper.alpha=2.0", "prepare"])), EXIT_INPUT);
    assert_eq!(code(&mvmf(out.path(), &["--set", "hyper.nope=1", "prepare"])), EXIT_INPUT);
    assert_eq!(code(&mvmf(out.path(), &["--config", "/nonexistent/x.toml", "prepare"])), EXIT_INPUT);
    assert_eq!(code(&mvmf(out.path(), &["train"])), EXIT_INPUT, "no bundle yet");
}

#[test]
fn diverging_training_is_a_numeric_failure() {
    let (dir, cfg) = tiny_workspace();
    let o = mvmf(dir.path(), &["--config", &cfg, "--set", "hyper.gamma=1e300", "train"]);
    assert_eq!(code(&o), EXIT_NUMERIC, "{}", stderr(&o));
}

#[test]
fn zero_epochs_checkpoints_the_initial_model() {
    let (dir, cfg) = tiny_workspace();
    let o = mvmf(dir.path(), &["--config", &cfg, "--set", "hyper.epochs=0", "train"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let ckpt: Checkpoint = serde_json::from_slice(&std::fs::read(dir.path().join("model-fed.json")).unwrap()).unwrap();
    let data = read_bundle(&dir.path().join("dataset.json")).unwrap().to_prepared().unwrap().data;
    let init = mvmf_federation::initial_model(&data, 6, 11);
    assert_eq!(ckpt.model().unwrap(), init);
    assert_eq!(ckpt.epochs, 0);
}

#[test]
fn training_is_deterministic_and_writes_versioned_traces() {
    let (dir, cfg) = tiny_workspace();
    let trace = dir.path().join("trace-fed.csv");
    assert_eq!(code(&mvmf(dir.path(), &["--config", &cfg, "train", "--mode", "sgd"])), EXIT_OK);
    let first = read_table(&trace).unwrap();
    assert_eq!(code(&mvmf(dir.path(), &["--config", &cfg, "train", "--mode", "sgd"])), EXIT_OK);
    let second = read_table(&trace).unwrap();
    let objectives = |t: &mvmf_cli::output::Table| t.rows.iter().map(|r| r["objective"].clone()).collect::<Vec<_>>();
    assert_eq!(objectives(&first), objectives(&second));
    assert_eq!(first.rows.len(), 4);
    assert_eq!(first.meta["seed"], "11");
    assert!(first.schema().unwrap().starts_with("mvmf-trace/"));
}

#[test]
fn encrypted_training_writes_privacy_report() {
    let (dir, cfg) = tiny_workspace();
    let o = mvmf(dir.path(), &["--config", &cfg, "train", "--variant", "priv"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let t = read_table(&dir.path().join("privacy-priv.csv")).unwrap();
    assert_eq!(t.rows[0]["key_bits"], "128");
    let phases = read_table(&dir.path().join("phases-priv.csv")).unwrap();
    assert!(phases.rows.iter().any(|r| r["phase"] == "decryption"));
    let o = mvmf(dir.path(), &["--config", &cfg, "train", "--variant", "priv", "--mode", "sgd"]);
    assert_eq!(code(&o), EXIT_INPUT);
}

#[test]
fn attack_grid_has_one_row_per_noise_level_with_analytic_baselines() {
    let (dir, cfg) = tiny_workspace();
    let args = [
        "--config", &cfg, "attack", "--scenario", "semials-obsonly", "--scenario", "sgd-inclunc", "--noise", "0", "--noise",
        "0.5", "--noise", "1", "--noise", "2",
    ];
    let o = mvmf(dir.path(), &args);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let t = read_table(&dir.path().join("attack.csv")).unwrap();
    assert_eq!(t.schema(), Some("mvmf-attack/1"));
    assert_eq!(t.meta["seed"], "11");
    assert_eq!(t.rows.len(), 8);
    let data = read_bundle(&dir.path().join("dataset.json")).unwrap().to_prepared().unwrap().data;
    let users: Vec<usize> = (0..5).collect();
    for sc in ["semials-obsonly", "sgd-inclunc"] {
        let rows: Vec<_> = t.rows.iter().filter(|r| r["scenario"] == sc).collect();
        assert_eq!(rows.len(), 4);
        let variant = sc.parse::<AttackScenario>().unwrap().variant;
        let base = random_guess_baseline(&data, &users, variant);
        for r in rows {
            assert!((r["baseline_rating"].parse::<f64>().unwrap() - base.rating_acc).abs() < 1e-6);
            assert!((r["baseline_attr"].parse::<f64>().unwrap() - base.attr_acc).abs() < 1e-6);
        }
    }
}

#[test]
fn solver_comparison_and_robustness_sweeps() {
    let (dir, cfg) = tiny_workspace();
    let o = mvmf(dir.path(), &["--config", &cfg, "attack", "--compare-solvers", "--scenario", "semials-obsonly"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    assert_eq!(read_table(&dir.path().join("solvers.csv")).unwrap().rows.len(), 4);
    let set = "attack.robustness_noise=[0.0, 1.0]";
    let o = mvmf(dir.path(), &["--config", &cfg, "--set", set, "robustness", "--scenario", "semials-obsonly"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    assert_eq!(read_table(&dir.path().join("robustness.csv")).unwrap().rows.len(), 2);
    let set = "attack.wide_noise=[10.0]";
    let o = mvmf(dir.path(), &["--config", &cfg, "--set", set, "robustness", "--wide"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let wide = read_table(&dir.path().join("robustness-wide.csv")).unwrap();
    assert_eq!(wide.rows.len(), 2);
    assert!(wide.rows.iter().all(|r| r["scenario"].ends_with("inclunc")));
}

#[test]
fn evaluation_reports_mean_and_std_and_cold_users_use_attributes() {
    let (dir, cfg) = tiny_workspace();
    let o = mvmf(dir.path(), &["--config", &cfg, "evaluate"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let rounds = read_table(&dir.path().join("eval.csv")).unwrap();
    assert_eq!(rounds.rows.len(), 2 * 3 * 2);
    for r in &rounds.rows {
        let via_attrs: usize = r["user_attributes"].parse().unwrap();
        let via_feats: usize = r["item_features"].parse().unwrap();
        match r["scenario"].as_str() {
            "cold-user" => assert!(via_attrs > 0 && via_feats == 0),
            "cold-item" => assert!(via_feats > 0 && via_attrs == 0),
            _ => assert!(via_feats == 0 && via_attrs == 0),
        }
    }
    let summary = read_table(&dir.path().join("eval-summary.csv")).unwrap();
    assert_eq!(summary.rows.len(), 3 * 2 * 4);
    assert!(summary.rows.iter().all(|r| r["rounds"] == "2" && r["std"].parse::<f64>().is_ok()));

    let o = mvmf(dir.path(), &["--config", &cfg, "report"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("| cold-user | ndcg10 |"));
    assert!(md.contains(" ± "));
}

#[test]
fn report_without_results_is_an_input_error() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(code(&mvmf(out.path(), &["report"])), EXIT_INPUT);
}

#[test]
fn output_root_comes_from_the_environment() {
    let out = tempfile::tempdir().unwrap();
    let o = mvmf(out.path(), &["--set", "data.surrogate_users=30", "--set", "data.surrogate_movies=100", "prepare"]);
    assert_eq!(code(&o), EXIT_OK, "{}", stderr(&o));
    assert!(out.path().join("dataset.json").exists());
    assert!(out.path().join("dataset.sha256").exists());
}
