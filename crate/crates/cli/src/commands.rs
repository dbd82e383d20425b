//! The five subcommands: synth, ingest, train, backtest, compare.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use pikan_core::agents::{train, Agent, Checkpoint, TrainOptions};
use pikan_core::backtest::{run_backtest, Allocator, BacktestReport, BaselineAllocator};
use pikan_core::baselines::StrategyId;
use pikan_core::dataset::EpisodeData;
use pikan_core::marketdata::{
    align_assets, compute_indicators, compute_norm_stats, load_ohlcv, normalize_features,
    ColumnSchema, OhlcvSeries,
};
use pikan_core::metrics::MetricsReport;
use pikan_core::synth::{generate, SynthConfig};

use crate::config::ExperimentConfig;
use crate::store::{load_store, write_store, FeatureStore};
use crate::CliError;

pub fn cmd_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create '{}': {e}", out_dir.display())))?;
    let series = generate::<f64>(cfg);
    let mut written = Vec::new();
    for s in &series {
        let path = out_dir.join(format!("{}.csv", s.asset_id));
        let mut body = String::from("date,open,high,low,close,volume\n");
        for i in 0..s.len() {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.dates[i], s.open[i], s.high[i], s.low[i], s.close[i], s.volume[i]
            ));
        }
        std::fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug)]
pub struct IngestSummary {
    pub assets: usize,
    pub manifest: PathBuf,
}

pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<IngestSummary, CliError> {
    cfg.assets_must_exist()?;
    let schema = ColumnSchema::default();
    let mut series = Vec::new();
    for path in &cfg.data.assets {
        let s = load_ohlcv::<f64>(path, &schema).map_err(|e| {
            CliError::Validation(format!("'{}': {e}", path.display()))
        })?;
        series.push(s);
    }
    let series = align_assets(series);
    if series[0].is_empty() {
        return Err(CliError::Validation(
            "assets share no common dates after alignment".into(),
        ));
    }

    let mut per_asset = Vec::new();
    for s in &series {
        let features = compute_indicators(s, &cfg.indicators)
            .map_err(|e| CliError::Validation(format!("{}: {e}", s.asset_id)))?;
        let train_rows = date_row_range(
            &s.dates,
            cfg.data.train_start,
            cfg.data.train_end,
            features.first_valid,
        );
        if train_rows.is_empty() {
            return Err(CliError::Validation(format!(
                "{}: training range contains no valid rows after warm-up",
                s.asset_id
            )));
        }
        let stats = compute_norm_stats(&features, train_rows);
        let normalized = normalize_features(&features, &stats);
        per_asset.push((
            s.asset_id.clone(),
            s.dates.clone(),
            s.close.clone(),
            normalized,
            stats,
        ));
    }
    let manifest = write_store(
        &cfg.data.feature_store,
        cfg.data.window,
        cfg.data.train_start,
        cfg.data.train_end,
        &cfg.indicators,
        &per_asset,
    )?;
    Ok(IngestSummary {
        assets: manifest.assets.len(),
        manifest: crate::store::manifest_path(&cfg.data.feature_store),
    })
}

/// Rows with dates inside [start, end] that lie at or past the warm-up.
fn date_row_range(
    dates: &[NaiveDate],
    start: NaiveDate,
    end: NaiveDate,
    first_valid: usize,
) -> std::ops::Range<usize> {
    let lo = dates.partition_point(|d| *d < start).max(first_valid);
    let hi = dates.partition_point(|d| *d <= end);
    lo..hi.max(lo)
}

fn episode_from_store(
    store: &FeatureStore,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<EpisodeData<f64>, CliError> {
    let closes: Vec<Vec<f64>> = store.assets.iter().map(|a| a.closes.clone()).collect();
    let features: Vec<_> = store.assets.iter().map(|a| a.features.clone()).collect();
    EpisodeData::build(&closes, &features, store.manifest.window, start, end)
        .map_err(|e| CliError::Validation(e.to_string()))
}

#[derive(Debug)]
pub struct TrainSummary {
    pub steps: usize,
    pub updates: usize,
    pub episodes: usize,
    pub log_path: PathBuf,
    pub final_checkpoint: Option<PathBuf>,
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary, CliError> {
    let agent_cfg = cfg.require_agent()?.clone();
    let store = load_store(&cfg.data.feature_store)?;
    let data = episode_from_store(&store, cfg.data.train_start, cfg.data.train_end)?;
    let mut agent = Agent::<f64>::new(agent_cfg, data.shape)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let opts = TrainOptions {
        total_steps: cfg.train.total_steps,
        checkpoint_every: cfg.train.checkpoint_every,
        commission: cfg.env.commission,
        initial_wealth: cfg.env.initial_wealth,
    };
    let result = train(&mut agent, &data, &opts).map_err(|e| CliError::Runtime(e.to_string()))?;

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output dir: {e}")))?;
    let log_path = cfg.output_dir.join("train_log.csv");
    std::fs::write(&log_path, result.log.to_csv_string())
        .map_err(|e| CliError::Runtime(format!("cannot write train log: {e}")))?;
    let mut final_checkpoint = None;
    for (label, ckpt) in &result.checkpoints {
        let path = cfg.output_dir.join(format!("checkpoint_{label}.json"));
        write_checkpoint(&path, ckpt)?;
        if label == "final" {
            final_checkpoint = Some(path);
        }
    }
    Ok(TrainSummary {
        steps: opts.total_steps,
        updates: result.log.rows.len(),
        episodes: result.episodes_completed,
        log_path,
        final_checkpoint,
    })
}

fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CliError> {
    let json = serde_json::to_string(ckpt)
        .map_err(|e| CliError::Runtime(format!("checkpoint serialization: {e}")))?;
    std::fs::write(path, json)
        .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))
}

pub enum BacktestSource {
    Baseline(String),
    Checkpoint(PathBuf),
}

#[derive(Debug)]
pub struct BacktestSummary {
    pub algorithm: String,
    pub terminal_wealth: f64,
    pub report_json: PathBuf,
}

pub fn cmd_backtest(
    cfg: &ExperimentConfig,
    source: &BacktestSource,
    out_dir: Option<&Path>,
) -> Result<BacktestSummary, CliError> {
    let store = load_store(&cfg.data.feature_store)?;
    let data = episode_from_store(&store, cfg.data.test_start, cfg.data.test_end)?;
    let assets = data.shape.assets;
    let mut policy: Box<dyn Allocator<f64>> = match source {
        BacktestSource::Baseline(name) => {
            let id = StrategyId::parse(name).ok_or_else(|| {
                CliError::Validation(format!("unknown strategy '{name}'"))
            })?;
            Box::new(BaselineAllocator::new(id, assets, cfg.baselines.clone()))
        }
        BacktestSource::Checkpoint(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read checkpoint '{}': {e}", path.display()))
            })?;
            let ckpt: Checkpoint = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("checkpoint parse error: {e}")))?;
            let agent_cfg = cfg.require_agent()?.clone();
            let agent = Agent::<f64>::from_checkpoint(agent_cfg, &ckpt)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Box::new(agent)
        }
    };
    let report = run_backtest(
        policy.as_mut(),
        &data,
        cfg.env.commission,
        cfg.env.initial_wealth,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let dir = out_dir.unwrap_or(&cfg.output_dir);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output dir: {e}")))?;
    write_backtest_outputs(dir, &report, &store)?;
    Ok(BacktestSummary {
        algorithm: report.algorithm.clone(),
        terminal_wealth: *report.wealth.last().unwrap(),
        report_json: dir.join("report.json"),
    })
}

fn write_backtest_outputs(
    dir: &Path,
    report: &BacktestReport<f64>,
    store: &FeatureStore,
) -> Result<(), CliError> {
    // wealth.csv: date, wealth, then post-rebalance weights per asset
    let mut body = String::from("date,wealth");
    for asset in &store.manifest.assets {
        body.push_str(&format!(",w_{}", asset.id));
    }
    body.push('\n');
    let assets = store.manifest.assets.len();
    for (i, (date, wealth)) in report.dates.iter().zip(&report.wealth).enumerate() {
        body.push_str(&format!("{date},{wealth}"));
        if i == 0 {
            // seed row holds the initial uniform allocation
            for _ in 0..assets {
                body.push_str(&format!(",{}", 1.0 / assets as f64));
            }
        } else {
            for w in &report.weights[i - 1] {
                body.push_str(&format!(",{w}"));
            }
        }
        body.push('\n');
    }
    std::fs::write(dir.join("wealth.csv"), body)
        .map_err(|e| CliError::Runtime(format!("cannot write wealth.csv: {e}")))?;

    let json = serde_json::to_string_pretty(&report.metrics)
        .map_err(|e| CliError::Runtime(format!("report serialization: {e}")))?;
    std::fs::write(dir.join("report.json"), json)
        .map_err(|e| CliError::Runtime(format!("cannot write report.json: {e}")))?;
    std::fs::write(dir.join("report.csv"), report_table(std::slice::from_ref(&report.metrics)))
        .map_err(|e| CliError::Runtime(format!("cannot write report.csv: {e}")))?;
    Ok(())
}

/// The comparison-table schema shared by report.csv and `compare`.
pub fn report_table(rows: &[MetricsReport<f64>]) -> String {
    let mut out = String::from("Algorithm,CumRet,AnnRet,AnnVol,Sharpe,MDD,Calmar,APV\n");
    for r in rows {
        out.push_str(&r.table_row());
        out.push('\n');
    }
    out
}

pub fn cmd_compare(dirs: &[PathBuf], out: Option<&Path>) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for dir in dirs {
        let path = dir.join("report.json");
        let text = std::fs::read_to_string(&path).map_err(|_| {
            CliError::Validation(format!("missing report in '{}'", dir.display()))
        })?;
        let report: MetricsReport<f64> = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("'{}': {e}", path.display())))?;
        rows.push(report);
    }
    let table = report_table(&rows);
    if let Some(path) = out {
        std::fs::write(path, &table)
            .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))?;
    }
    Ok(table)
}

/// Convenience for tests: write one synthetic market and a matching config.
pub fn write_series_csv(series: &[OhlcvSeries<f64>], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create '{}': {e}", dir.display())))?;
    let mut paths = Vec::new();
    for s in series {
        let path = dir.join(format!("{}.csv", s.asset_id));
        let mut body = String::from("date,open,high,low,close,volume\n");
        for i in 0..s.len() {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.dates[i], s.open[i], s.high[i], s.low[i], s.close[i], s.volume[i]
            ));
        }
        std::fs::write(&path, body)
            .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}
