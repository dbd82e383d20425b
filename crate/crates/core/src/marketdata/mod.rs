//! Market-data ingestion: OHLCV loading, the technical-indicator feature
//! set, state-tensor assembly and train-range normalization.

mod features;
mod indicators;
mod ohlcv;

pub use features::{
    build_state, compute_indicators, compute_norm_stats, normalize_features, FeatureMatrix,
    NormStats, StateTensor, FEATURE_NAMES, PRICE_FEATURE_INDEX,
};
pub use indicators::IndicatorParams;
pub use ohlcv::{align_assets, load_ohlcv, ColumnSchema, OhlcvSeries};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("missing required column '{column}'")]
    MissingColumn { column: String },
    #[error("unparseable or invalid row at line {line}")]
    UnparseableRow { line: usize },
    #[error("dates are not strictly increasing")]
    NonMonotonicDates,
    #[error("series too short: need {required} rows, got {got}")]
    SeriesTooShort { required: usize, got: usize },
    #[error("insufficient history for state at t={t} (window {window}, first valid row {first_valid})")]
    InsufficientHistory {
        t: usize,
        window: usize,
        first_valid: usize,
    },
    #[error("assets '{a}' and '{b}' do not share a date axis")]
    AssetDateMismatch { a: String, b: String },
    #[error("state at t={t} contains non-finite values")]
    NonFiniteState { t: usize },
    #[error("value sequences of '{asset}' have inconsistent lengths")]
    LengthMismatch { asset: String },
    #[error("failed to read '{path}': {detail}")]
    Io { path: String, detail: String },
}
