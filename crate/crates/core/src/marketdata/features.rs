//! Feature matrices, state-tensor assembly and train-range normalization.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::indicators::{self, IndicatorParams};
use super::ohlcv::OhlcvSeries;
use super::MarketDataError;
use crate::scalar::Scalar;
use crate::vecmath;

/// Fixed feature order; OHLCV first so the close price sits at index 3.
pub const FEATURE_NAMES: [&str; 18] = [
    "open", "high", "low", "close", "volume", "adx", "atr", "bb_upper", "bb_lower", "macd",
    "macds", "mom", "obv", "ret1", "ret5", "rsi", "rvol", "willr",
];

/// Index of the close-price column inside [`FEATURE_NAMES`].
pub const PRICE_FEATURE_INDEX: usize = 3;

/// Per-asset (days x features) matrix; rows before `first_valid` carry the
/// indicator warm-up and are excluded from state construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    values: Vec<T>,
    n_features: usize,
    pub first_valid: usize,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Reassemble a matrix from stored parts (for example a feature store
    /// on disk). `values` is row-major (days x features).
    pub fn from_parts(
        asset_id: String,
        dates: Vec<NaiveDate>,
        values: Vec<T>,
        first_valid: usize,
    ) -> Result<Self, MarketDataError> {
        let n_features = FEATURE_NAMES.len();
        if values.len() != dates.len() * n_features {
            return Err(MarketDataError::LengthMismatch { asset: asset_id });
        }
        Ok(Self {
            asset_id,
            dates,
            values,
            n_features,
            first_valid,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, day: usize) -> &[T] {
        &self.values[day * self.n_features..(day + 1) * self.n_features]
    }

    pub fn feature_names(&self) -> &'static [&'static str] {
        &FEATURE_NAMES
    }

    pub fn price_feature_index(&self) -> usize {
        PRICE_FEATURE_INDEX
    }

    pub fn column(&self, feature: usize) -> Vec<T> {
        (0..self.n_days()).map(|d| self.row(d)[feature]).collect()
    }
}

/// Per-feature normalization statistics frozen from the training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// All Table-style indicators for one asset. Fails when the series cannot
/// cover the longest warm-up (the Williams %R lookback dominates).
pub fn compute_indicators<T: Scalar>(
    series: &OhlcvSeries<T>,
    params: &IndicatorParams,
) -> Result<FeatureMatrix<T>, MarketDataError> {
    let n = series.len();
    let adx = indicators::adx(series, params.adx_period);
    let atr = indicators::atr(series, params.atr_period);
    let (bb_upper, bb_lower) = indicators::bollinger(&series.close, params.bb_period, T::c(params.bb_k));
    let (macd, macds) = indicators::macd(
        &series.close,
        params.macd_fast,
        params.macd_slow,
        params.macd_signal,
    );
    let mom = indicators::momentum(&series.close, params.mom_period);
    let obv = indicators::obv(&series.close, &series.volume);
    let ret1 = indicators::ret(&series.close, params.ret_horizons.0);
    let ret5 = indicators::ret(&series.close, params.ret_horizons.1);
    let rsi = indicators::rsi(&series.close, params.rsi_period);
    let rvol = indicators::rvol(&series.close, params.rvol_period);
    let willr = indicators::willr(series, params.willr_period);

    let columns: Vec<&[T]> = vec![
        &series.open,
        &series.high,
        &series.low,
        &series.close,
        &series.volume,
        &adx.values,
        &atr.values,
        &bb_upper.values,
        &bb_lower.values,
        &macd.values,
        &macds.values,
        &mom.values,
        &obv.values,
        &ret1.values,
        &ret5.values,
        &rsi.values,
        &rvol.values,
        &willr.values,
    ];
    let first_valid = [
        adx.first_valid,
        atr.first_valid,
        bb_upper.first_valid,
        bb_lower.first_valid,
        macd.first_valid,
        macds.first_valid,
        mom.first_valid,
        obv.first_valid,
        ret1.first_valid,
        ret5.first_valid,
        rsi.first_valid,
        rvol.first_valid,
        willr.first_valid,
    ]
    .into_iter()
    .max()
    .unwrap();
    if n <= first_valid {
        return Err(MarketDataError::SeriesTooShort {
            required: first_valid + 1,
            got: n,
        });
    }
    let n_features = columns.len();
    debug_assert_eq!(n_features, FEATURE_NAMES.len());
    let mut values = Vec::with_capacity(n * n_features);
    for day in 0..n {
        for col in &columns {
            values.push(col[day]);
        }
    }
    Ok(FeatureMatrix {
        asset_id: series.asset_id.clone(),
        dates: series.dates.clone(),
        values,
        n_features,
        first_valid,
    })
}

/// Per-feature mean and population std over `rows` (the training range).
pub fn compute_norm_stats<T: Scalar>(
    matrix: &FeatureMatrix<T>,
    rows: std::ops::Range<usize>,
) -> NormStats {
    let nf = matrix.n_features();
    let mut means = Vec::with_capacity(nf);
    let mut stds = Vec::with_capacity(nf);
    for f in 0..nf {
        let col: Vec<f64> = rows
            .clone()
            .map(|d| matrix.row(d)[f].to_f64_lossy())
            .filter(|v| v.is_finite())
            .collect();
        means.push(vecmath::mean(&col));
        stds.push(vecmath::std_dev(&col));
    }
    NormStats { means, stds }
}

/// (x - mean) / (std + eps) per feature column. Degenerate columns
/// (std = 0) map to all zeros with a warning.
pub fn normalize_features<T: Scalar>(matrix: &FeatureMatrix<T>, stats: &NormStats) -> FeatureMatrix<T> {
    let eps = T::c(1e-8);
    let nf = matrix.n_features();
    let mut out = matrix.clone();
    for f in 0..nf {
        if stats.stds[f] == 0.0 {
            log::warn!(
                "feature '{}' of {} is degenerate (zero std); column zeroed",
                FEATURE_NAMES[f],
                matrix.asset_id
            );
        }
    }
    for day in 0..matrix.n_days() {
        for f in 0..nf {
            let idx = day * nf + f;
            out.values[idx] = if stats.stds[f] == 0.0 {
                T::zero()
            } else {
                (matrix.values[idx] - T::c(stats.means[f])) / (T::c(stats.stds[f]) + eps)
            };
        }
    }
    out
}

/// Lookback window of features: values[k, i, j] = feature j of asset i on
/// day t - w + 1 + k, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor<T> {
    pub window: usize,
    pub assets: usize,
    pub features: usize,
    pub t_index: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> StateTensor<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Assemble the state for day `t` from per-asset feature matrices.
pub fn build_state<T: Scalar>(
    features: &[FeatureMatrix<T>],
    t: usize,
    window: usize,
) -> Result<StateTensor<T>, MarketDataError> {
    assert!(window >= 1, "window must be at least one day");
    let first = &features[0];
    for m in features {
        if m.dates != first.dates {
            return Err(MarketDataError::AssetDateMismatch {
                a: first.asset_id.clone(),
                b: m.asset_id.clone(),
            });
        }
    }
    let earliest = features.iter().map(|m| m.first_valid).max().unwrap_or(0);
    if t >= first.n_days() || t + 1 < window || t + 1 - window < earliest {
        return Err(MarketDataError::InsufficientHistory {
            t,
            window,
            first_valid: earliest,
        });
    }
    let assets = features.len();
    let nf = first.n_features();
    let mut values = Vec::with_capacity(window * assets * nf);
    for k in 0..window {
        let day = t + 1 - window + k;
        for m in features {
            values.extend_from_slice(m.row(day));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MarketDataError::NonFiniteState { t });
    }
    Ok(StateTensor {
        window,
        assets,
        features: nf,
        t_index: t,
        values,
    })
}
