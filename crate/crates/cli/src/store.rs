//! The on-disk feature store `ingest` produces and `train`/`backtest`
//! consume: one CSV per asset (raw close plus normalized features) and a
//! manifest with checksums and the frozen normalization statistics.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use pikan_core::marketdata::{FeatureMatrix, IndicatorParams, NormStats, FEATURE_NAMES};
use pikan_core::rng::fnv1a;

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestAsset {
    pub id: String,
    pub file: String,
    pub checksum: String,
    pub first_valid: usize,
    pub norm_means: Vec<f64>,
    pub norm_stds: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub window: usize,
    pub feature_names: Vec<String>,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub indicator_params: IndicatorParams,
    pub assets: Vec<ManifestAsset>,
}

pub struct StoredAsset {
    pub features: FeatureMatrix<f64>,
    pub closes: Vec<f64>,
}

pub struct FeatureStore {
    pub manifest: Manifest,
    pub assets: Vec<StoredAsset>,
}

fn float_cell(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Render one asset's feature CSV: date, raw close, then the normalized
/// feature columns.
pub fn render_feature_csv(
    dates: &[NaiveDate],
    closes: &[f64],
    normalized: &FeatureMatrix<f64>,
) -> String {
    let mut out = String::from("date,raw_close,");
    out.push_str(&FEATURE_NAMES.join(","));
    out.push('\n');
    for (day, date) in dates.iter().enumerate() {
        out.push_str(&format!("{date},{}", float_cell(closes[day])));
        for &v in normalized.row(day) {
            out.push(',');
            out.push_str(&float_cell(v));
        }
        out.push('\n');
    }
    out
}

pub fn checksum_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}

/// Persist feature files plus the manifest; the manifest goes last so a
/// failed run never leaves a manifest pointing at missing files.
pub fn write_store(
    dir: &Path,
    window: usize,
    train_start: NaiveDate,
    train_end: NaiveDate,
    params: &IndicatorParams,
    per_asset: &[(String, Vec<NaiveDate>, Vec<f64>, FeatureMatrix<f64>, NormStats)],
) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create '{}': {e}", dir.display())))?;
    let mut assets = Vec::new();
    for (id, dates, closes, normalized, stats) in per_asset {
        let file = format!("{id}.features.csv");
        let body = render_feature_csv(dates, closes, normalized);
        let path = dir.join(&file);
        std::fs::write(&path, body.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write '{}': {e}", path.display())))?;
        assets.push(ManifestAsset {
            id: id.clone(),
            file,
            checksum: checksum_hex(body.as_bytes()),
            first_valid: normalized.first_valid,
            norm_means: stats.means.clone(),
            norm_stds: stats.stds.clone(),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        window,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        train_start,
        train_end,
        indicator_params: params.clone(),
        assets,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.json"), manifest_json)
        .map_err(|e| CliError::Runtime(format!("cannot write manifest: {e}")))?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn load_store(dir: &Path) -> Result<FeatureStore, CliError> {
    let manifest_file = manifest_path(dir);
    let text = std::fs::read_to_string(&manifest_file).map_err(|e| {
        CliError::Validation(format!(
            "feature store not built: cannot read '{}': {e}",
            manifest_file.display()
        ))
    })?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("manifest parse error: {e}")))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(CliError::Validation(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let mut assets = Vec::new();
    for entry in &manifest.assets {
        let path = dir.join(&entry.file);
        let body = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("cannot read '{}': {e}", path.display())))?;
        if checksum_hex(body.as_bytes()) != entry.checksum {
            return Err(CliError::Validation(format!(
                "checksum mismatch for '{}'; re-run ingest",
                entry.file
            )));
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let mut dates = Vec::new();
        let mut closes = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| CliError::Runtime(format!("'{}': {e}", entry.file)))?;
            dates.push(
                NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                    .map_err(|e| CliError::Runtime(format!("'{}': {e}", entry.file)))?,
            );
            closes.push(parse_float(&record[1], &entry.file)?);
            for i in 0..FEATURE_NAMES.len() {
                values.push(parse_float(&record[2 + i], &entry.file)?);
            }
        }
        let features =
            FeatureMatrix::from_parts(entry.id.clone(), dates, values, entry.first_valid)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        assets.push(StoredAsset { features, closes });
    }
    Ok(FeatureStore { manifest, assets })
}

fn parse_float(cell: &str, file: &str) -> Result<f64, CliError> {
    if cell == "NaN" {
        return Ok(f64::NAN);
    }
    cell.parse::<f64>()
        .map_err(|e| CliError::Runtime(format!("'{file}': bad number '{cell}': {e}")))
}
