//! Episode assembly: pairs each decision day's state tensor with the price
//! relative its environment step consumes.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::env::{PriceRelatives, TradingEnv};
use crate::marketdata::{build_state, FeatureMatrix, MarketDataError, OhlcvSeries};
use crate::scalar::Scalar;

/// Dimensions of a flattened state tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateShape {
    pub window: usize,
    pub assets: usize,
    pub features: usize,
}

impl StateShape {
    pub fn flat_len(&self) -> usize {
        self.window * self.assets * self.features
    }
}

/// A contiguous run of decision days. `states[k]` is observed when choosing
/// the action whose step consumes `relatives[k]`; the next observation is
/// `states[k + 1]` (the final step reuses its own state as terminal
/// observation).
#[derive(Debug, Clone)]
pub struct EpisodeData<T> {
    pub shape: StateShape,
    pub dates: Vec<NaiveDate>,
    pub states: Vec<Vec<T>>,
    pub relatives: Vec<Vec<T>>,
    /// Close prices on each decision day (per asset), for strategies that
    /// track price history.
    pub prices: Vec<Vec<T>>,
}

impl<T: Scalar> EpisodeData<T> {
    /// Convenience wrapper taking whole OHLCV series.
    pub fn build_from_series(
        raw: &[OhlcvSeries<T>],
        features: &[FeatureMatrix<T>],
        window: usize,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Self, MarketDataError> {
        for (s, m) in raw.iter().zip(features) {
            if s.dates != m.dates {
                return Err(MarketDataError::AssetDateMismatch {
                    a: s.asset_id.clone(),
                    b: m.asset_id.clone(),
                });
            }
        }
        let closes: Vec<Vec<T>> = raw.iter().map(|s| s.close.clone()).collect();
        Self::build(&closes, features, window, start, end)
    }

    pub fn n_steps(&self) -> usize {
        self.states.len()
    }

    pub fn next_state(&self, k: usize) -> &[T] {
        if k + 1 < self.states.len() {
            &self.states[k + 1]
        } else {
            &self.states[k]
        }
    }

    pub fn is_terminal(&self, k: usize) -> bool {
        k + 1 == self.states.len()
    }

    pub fn to_env(&self, commission: T, initial_wealth: T) -> TradingEnv<T> {
        let relatives = self
            .relatives
            .iter()
            .map(|y| PriceRelatives::new(y.clone()).expect("episode relatives positive"))
            .collect();
        TradingEnv::new(relatives, commission, initial_wealth)
    }

    /// Assemble an episode over `[start, end]` from per-asset close-price
    /// columns (aligned with the feature dates) and the (normalized)
    /// feature matrices. Decision days need a full lookback window of valid
    /// rows plus a previous close for the price relative; warm-up may dip
    /// before `start`.
    pub fn build(
        closes: &[Vec<T>],
        features: &[FeatureMatrix<T>],
        window: usize,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Self, MarketDataError> {
        assert_eq!(closes.len(), features.len());
        assert!(!closes.is_empty());
        let dates = &features[0].dates;
        for (i, c) in closes.iter().enumerate() {
            if c.len() != dates.len() {
                return Err(MarketDataError::LengthMismatch {
                    asset: features[i].asset_id.clone(),
                });
            }
        }
        for m in features {
            if m.dates != *dates {
                return Err(MarketDataError::AssetDateMismatch {
                    a: features[0].asset_id.clone(),
                    b: m.asset_id.clone(),
                });
            }
        }
        let first_valid = features.iter().map(|m| m.first_valid).max().unwrap_or(0);
        let earliest_t = (first_valid + window - 1).max(1);
        let mut out = Self {
            shape: StateShape {
                window,
                assets: closes.len(),
                features: features[0].n_features(),
            },
            dates: Vec::new(),
            states: Vec::new(),
            relatives: Vec::new(),
            prices: Vec::new(),
        };
        for t in earliest_t..dates.len() {
            if dates[t] < start || dates[t] > end {
                continue;
            }
            let state = build_state(features, t, window)?;
            let y: Vec<T> = closes.iter().map(|c| c[t] / c[t - 1]).collect();
            out.dates.push(dates[t]);
            out.states.push(state.values);
            out.relatives.push(y);
            out.prices.push(closes.iter().map(|c| c[t]).collect());
        }
        if out.states.is_empty() {
            return Err(MarketDataError::InsufficientHistory {
                t: 0,
                window,
                first_valid,
            });
        }
        Ok(out)
    }
}
