//! End-to-end pipeline: synth -> ingest -> train -> backtest -> compare,
//! plus determinism and failure-path checks.

use std::fs;
use std::path::Path;

use pikan_cli::commands::{
    cmd_backtest, cmd_compare, cmd_ingest, cmd_synth, cmd_train, BacktestSource,
};
use pikan_cli::config::ExperimentConfig;
use pikan_cli::CliError;
use pikan_core::synth::SynthConfig;

fn write_config(root: &Path, algorithm: &str, total_steps: usize) -> String {
    format!(
        r#"
seed = 5
output_dir = "{root}/run"

[data]
assets = ["{root}/data/SYN0.csv", "{root}/data/SYN1.csv", "{root}/data/SYN2.csv"]
feature_store = "{root}/store"
window = 5
train_start = "2015-01-01"
train_end = "2016-06-30"
test_start = "2016-07-01"
test_end = "2017-04-01"

[env]
commission = 0.0025
initial_wealth = 1000.0

[train]
total_steps = {total_steps}

[agent]
algorithm = "{algorithm}"
hidden = [6]
batch_size = 16
learning_starts = 16
n_steps = 16
n_epochs = 2
minibatch_size = 8
"#,
        root = root.display(),
        algorithm = algorithm,
        total_steps = total_steps
    )
}

fn setup(root: &Path, algorithm: &str, steps: usize) -> ExperimentConfig {
    let synth = SynthConfig {
        assets: 3,
        days: 560,
        seed: 13,
        momentum: 0.2,
        ..Default::default()
    };
    cmd_synth(&synth, &root.join("data")).unwrap();
    let text = write_config(root, algorithm, steps);
    ExperimentConfig::from_toml_str(&text, &[]).unwrap()
}

#[test]
fn full_pipeline_runs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "a2c_pinn", 60);

    // ingest twice: identical checksums
    let s1 = cmd_ingest(&cfg).unwrap();
    assert_eq!(s1.assets, 3);
    let manifest1 = fs::read_to_string(&s1.manifest).unwrap();
    let s2 = cmd_ingest(&cfg).unwrap();
    let manifest2 = fs::read_to_string(&s2.manifest).unwrap();
    assert_eq!(manifest1, manifest2);

    // train twice: byte-identical logs
    let t1 = cmd_train(&cfg).unwrap();
    let log1 = fs::read(&t1.log_path).unwrap();
    let t2 = cmd_train(&cfg).unwrap();
    let log2 = fs::read(&t2.log_path).unwrap();
    assert_eq!(log1, log2);
    assert!(t1.updates > 0);
    let ckpt = t1.final_checkpoint.clone().unwrap();
    assert!(ckpt.exists());
    assert!(cfg.output_dir.join("checkpoint_init.json").exists());

    // backtest the checkpoint twice: identical wealth files
    let out_a = dir.path().join("bt_agent");
    cmd_backtest(&cfg, &BacktestSource::Checkpoint(ckpt.clone()), Some(&out_a)).unwrap();
    let wealth1 = fs::read(out_a.join("wealth.csv")).unwrap();
    cmd_backtest(&cfg, &BacktestSource::Checkpoint(ckpt), Some(&out_a)).unwrap();
    let wealth2 = fs::read(out_a.join("wealth.csv")).unwrap();
    assert_eq!(wealth1, wealth2);

    // baseline backtests and a comparison table
    let mut run_dirs = vec![out_a.clone()];
    for name in ["ubah", "crp", "olmar", "rmr", "pamr"] {
        let out = dir.path().join(format!("bt_{name}"));
        let summary = cmd_backtest(&cfg, &BacktestSource::Baseline(name.into()), Some(&out)).unwrap();
        assert!(summary.terminal_wealth > 0.0);
        run_dirs.push(out);
    }
    let table = cmd_compare(&run_dirs, None).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 1 + run_dirs.len());
    assert_eq!(lines[0], "Algorithm,CumRet,AnnRet,AnnVol,Sharpe,MDD,Calmar,APV");
    assert!(lines[2].starts_with("UBAH,"));
}

#[test]
fn train_zero_steps_writes_initial_checkpoint_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "ddpg", 0);
    cmd_ingest(&cfg).unwrap();
    let summary = cmd_train(&cfg).unwrap();
    assert!(summary.final_checkpoint.is_none());
    assert!(cfg.output_dir.join("checkpoint_init.json").exists());
    assert!(!cfg.output_dir.join("checkpoint_final.json").exists());
    let log = fs::read_to_string(summary.log_path).unwrap();
    assert_eq!(log.lines().count(), 1); // header only
}

#[test]
fn pinn_and_vanilla_logs_have_different_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "ddpg_pinn", 40);
    cmd_ingest(&cfg).unwrap();
    let t = cmd_train(&cfg).unwrap();
    let pinn_header = fs::read_to_string(&t.log_path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(pinn_header.contains("lambda_adapt"));
    assert!(pinn_header.contains("vol_ema"));

    let text = write_config(dir.path(), "ddpg", 40);
    let vanilla_cfg = ExperimentConfig::from_toml_str(&text, &[]).unwrap();
    let t = cmd_train(&vanilla_cfg).unwrap();
    let vanilla_header = fs::read_to_string(&t.log_path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(!vanilla_header.contains("lambda_adapt"));
    assert!(!vanilla_header.contains("vol_ema"));
}

#[test]
fn malformed_asset_fails_without_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "a2c", 0);
    // corrupt one asset: high below low
    let bad = dir.path().join("data/SYN1.csv");
    let mut text = fs::read_to_string(&bad).unwrap();
    let line = text.lines().nth(5).unwrap().to_string();
    let fields: Vec<&str> = line.split(',').collect();
    let corrupted = format!(
        "{},{},{},{},{},{}",
        fields[0], fields[1], "1.0", fields[3], fields[4], fields[5]
    );
    text = text.replace(&line, &corrupted);
    fs::write(&bad, text).unwrap();

    let err = cmd_ingest(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!cfg.data.feature_store.join("manifest.json").exists());
}

#[test]
fn unknown_strategy_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "a2c", 0);
    cmd_ingest(&cfg).unwrap();
    let err = cmd_backtest(&cfg, &BacktestSource::Baseline("anticor".into()), None).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert!(err.to_string().contains("anticor"));
}

#[test]
fn compare_names_missing_report_directory() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing_here");
    let err = cmd_compare(std::slice::from_ref(&missing), None).unwrap_err();
    assert!(err.to_string().contains("nothing_here"));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn crp_on_flat_market_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthConfig {
        assets: 2,
        days: 560,
        seed: 1,
        drift: vec![0.0],
        volatility: vec![0.0],
        ..Default::default()
    };
    cmd_synth(&synth, &dir.path().join("data")).unwrap();
    let text = format!(
        r#"
seed = 1
output_dir = "{root}/run"
[data]
assets = ["{root}/data/SYN0.csv", "{root}/data/SYN1.csv"]
feature_store = "{root}/store"
window = 5
train_start = "2015-01-01"
train_end = "2016-06-30"
test_start = "2016-07-01"
test_end = "2017-04-01"
"#,
        root = dir.path().display()
    );
    let cfg = ExperimentConfig::from_toml_str(&text, &[]).unwrap();
    cmd_ingest(&cfg).unwrap();
    let out = dir.path().join("bt");
    let summary = cmd_backtest(&cfg, &BacktestSource::Baseline("crp".into()), Some(&out)).unwrap();
    assert!((summary.terminal_wealth - 1000.0).abs() < 1e-9);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["cum_ret_pct"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn backtest_on_two_asset_market_matches_hand_computed_growth() {
    // constant per-asset growth factors: CRP wealth has a closed form
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    fs::create_dir_all(&data_dir).unwrap();
    // build series with exact +1%/-0.5% daily moves, weekdays only
    let mut dates = Vec::new();
    let mut d = chrono::NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    while dates.len() < 560 {
        use chrono::Datelike;
        if !matches!(d.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    for (asset, rate) in [("AAA", 1.01_f64), ("BBB", 0.995_f64)] {
        let mut body = String::from("date,open,high,low,close,volume\n");
        let mut price = 100.0_f64;
        for date in &dates {
            let open = price;
            price *= rate;
            let high = open.max(price) * 1.001;
            let low = open.min(price) * 0.999;
            body.push_str(&format!("{date},{open},{high},{low},{price},1000000\n"));
        }
        fs::write(data_dir.join(format!("{asset}.csv")), body).unwrap();
    }
    let text = format!(
        r#"
seed = 1
output_dir = "{root}/run"
[data]
assets = ["{root}/data/AAA.csv", "{root}/data/BBB.csv"]
feature_store = "{root}/store"
window = 5
train_start = "2015-01-01"
train_end = "2016-06-30"
test_start = "2016-07-01"
test_end = "2017-04-01"
[env]
commission = 0.0025
"#,
        root = dir.path().display()
    );
    let cfg = ExperimentConfig::from_toml_str(&text, &[]).unwrap();
    cmd_ingest(&cfg).unwrap();
    let out = dir.path().join("bt");
    let summary = cmd_backtest(&cfg, &BacktestSource::Baseline("crp".into()), Some(&out)).unwrap();

    // oracle: every step has growth g = 0.5*1.01 + 0.5*0.995, drifted
    // weights [0.505, 0.4975]/g, turnover back to uniform, cost factor mu
    let g = 0.5 * 1.01 + 0.5 * 0.995;
    let drifted = [0.5 * 1.01 / g, 0.5 * 0.995 / g];
    let turnover = (0.5_f64 - drifted[0]).abs() + (0.5_f64 - drifted[1]).abs();
    let mu = 1.0 - 0.0025 * turnover;
    let wealth_csv = fs::read_to_string(out.join("wealth.csv")).unwrap();
    let n_steps = wealth_csv.lines().count() - 2; // header + seed row
    let expected = 1000.0 * (g * mu).powi(n_steps as i32);
    let rel = (summary.terminal_wealth - expected).abs() / expected;
    assert!(rel < 1e-9, "terminal {} vs {}", summary.terminal_wealth, expected);
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let bin = env!("CARGO_BIN_EXE_pikan");
    let dir = tempfile::tempdir().unwrap();
    // success path
    let ok = std::process::Command::new(bin)
        .args(["synth", "--out"])
        .arg(dir.path().join("data"))
        .args(["--assets", "2", "--days", "80"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    // validation failure: missing report directory
    let missing = std::process::Command::new(bin)
        .args(["compare"])
        .arg(dir.path().join("no_such_run"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    // validation failure: unreadable config
    let bad_cfg = std::process::Command::new(bin)
        .args(["train", "--config"])
        .arg(dir.path().join("nope.toml"))
        .output()
        .unwrap();
    assert_eq!(bad_cfg.status.code(), Some(1));
}
