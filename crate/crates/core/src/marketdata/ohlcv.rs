//! OHLCV ingestion and validation.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::MarketDataError;
use crate::scalar::Scalar;

/// Maps the required logical columns onto CSV header names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

/// One asset's daily bars, dates strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries<T> {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    pub open: Vec<T>,
    pub high: Vec<T>,
    pub low: Vec<T>,
    pub close: Vec<T>,
    pub volume: Vec<T>,
}

impl<T: Scalar> OhlcvSeries<T> {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Row-level bar sanity: high >= max(open, close), min(open, close) >= low.
    pub fn bar_is_valid(&self, i: usize) -> bool {
        let (o, h, l, c) = (self.open[i], self.high[i], self.low[i], self.close[i]);
        [o, h, l, c].iter().all(|v| v.is_finite() && *v > T::zero())
            && h >= o.max(c)
            && o.min(c) >= l
    }

    pub fn validate(&self) -> Result<(), MarketDataError> {
        let n = self.dates.len();
        for seq in [&self.open, &self.high, &self.low, &self.close, &self.volume] {
            if seq.len() != n {
                return Err(MarketDataError::LengthMismatch {
                    asset: self.asset_id.clone(),
                });
            }
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MarketDataError::NonMonotonicDates);
        }
        for i in 0..n {
            if !self.bar_is_valid(i) {
                return Err(MarketDataError::UnparseableRow { line: i + 2 });
            }
        }
        Ok(())
    }

    /// Keep only the rows whose dates appear in `keep` (already sorted).
    pub fn restrict_to_dates(&self, keep: &[NaiveDate]) -> Self {
        let mut out = Self {
            asset_id: self.asset_id.clone(),
            dates: Vec::with_capacity(keep.len()),
            open: Vec::new(),
            high: Vec::new(),
            low: Vec::new(),
            close: Vec::new(),
            volume: Vec::new(),
        };
        let mut j = 0;
        for (i, d) in self.dates.iter().enumerate() {
            while j < keep.len() && keep[j] < *d {
                j += 1;
            }
            if j < keep.len() && keep[j] == *d {
                out.dates.push(*d);
                out.open.push(self.open[i]);
                out.high.push(self.high[i]);
                out.low.push(self.low[i]);
                out.close.push(self.close[i]);
                out.volume.push(self.volume[i]);
            }
        }
        out
    }
}

/// Load and validate one asset's CSV. Rows must arrive date-sorted with no
/// duplicates; every bar must satisfy the OHLC ordering invariants.
pub fn load_ohlcv<T: Scalar>(
    path: &Path,
    schema: &ColumnSchema,
) -> Result<OhlcvSeries<T>, MarketDataError> {
    let asset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "asset".to_string());
    let mut reader = csv::Reader::from_path(path).map_err(|e| MarketDataError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| MarketDataError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, MarketDataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MarketDataError::MissingColumn {
                column: name.to_string(),
            })
    };
    let idx_date = col(&schema.date)?;
    let idx_open = col(&schema.open)?;
    let idx_high = col(&schema.high)?;
    let idx_low = col(&schema.low)?;
    let idx_close = col(&schema.close)?;
    let idx_volume = col(&schema.volume)?;

    let mut series = OhlcvSeries {
        asset_id,
        dates: Vec::new(),
        open: Vec::new(),
        high: Vec::new(),
        low: Vec::new(),
        close: Vec::new(),
        volume: Vec::new(),
    };
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header occupies line 1
        let record = record.map_err(|_| MarketDataError::UnparseableRow { line })?;
        let field = |i: usize| record.get(i).ok_or(MarketDataError::UnparseableRow { line });
        let date = NaiveDate::parse_from_str(field(idx_date)?, "%Y-%m-%d")
            .map_err(|_| MarketDataError::UnparseableRow { line })?;
        let num = |i: usize| -> Result<T, MarketDataError> {
            field(i)?
                .trim()
                .parse::<f64>()
                .ok()
                .map(T::c)
                .ok_or(MarketDataError::UnparseableRow { line })
        };
        series.dates.push(date);
        series.open.push(num(idx_open)?);
        series.high.push(num(idx_high)?);
        series.low.push(num(idx_low)?);
        series.close.push(num(idx_close)?);
        series.volume.push(num(idx_volume)?);
        if !series.bar_is_valid(series.len() - 1) {
            return Err(MarketDataError::UnparseableRow { line });
        }
    }
    if series.dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MarketDataError::NonMonotonicDates);
    }
    Ok(series)
}

/// Inner-join a set of series on their common dates.
pub fn align_assets<T: Scalar>(series: Vec<OhlcvSeries<T>>) -> Vec<OhlcvSeries<T>> {
    if series.is_empty() {
        return series;
    }
    let mut common: Vec<NaiveDate> = series[0].dates.clone();
    for s in &series[1..] {
        let set: std::collections::BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common.retain(|d| set.contains(d));
    }
    series.iter().map(|s| s.restrict_to_dates(&common)).collect()
}
