//! Synthetic market generator: geometric Brownian motion with optional
//! momentum (AR(1) log-return autocorrelation). Ships for tests and
//! tutorials since real ticker data cannot be redistributed.

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::marketdata::OhlcvSeries;
use crate::rng::{standard_normal, substream, uniform};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub assets: usize,
    pub days: usize,
    pub seed: u64,
    /// Per-asset daily drift of log returns; cycled if shorter than assets.
    pub drift: Vec<f64>,
    /// Per-asset daily volatility of log returns; cycled if shorter.
    pub volatility: Vec<f64>,
    /// AR(1) coefficient on log returns; 0 disables momentum.
    pub momentum: f64,
    pub start_date: NaiveDate,
    pub base_price: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            assets: 3,
            days: 400,
            seed: 0,
            drift: vec![0.0004],
            volatility: vec![0.01],
            momentum: 0.0,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            base_price: 100.0,
        }
    }
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    loop {
        d = d.succ_opt().expect("date overflow");
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            return d;
        }
    }
}

/// Generate one OHLCV series per asset. Bars always satisfy the OHLC
/// ordering invariants.
pub fn generate<T: Scalar>(cfg: &SynthConfig) -> Vec<OhlcvSeries<T>> {
    let mut dates = Vec::with_capacity(cfg.days);
    let mut d = cfg.start_date;
    if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = next_weekday(d);
    }
    for _ in 0..cfg.days {
        dates.push(d);
        d = next_weekday(d);
    }

    (0..cfg.assets)
        .map(|a| {
            let mut rng = substream(cfg.seed, &format!("synth-asset-{a}"));
            let mu = cfg.drift[a % cfg.drift.len()];
            let sigma = cfg.volatility[a % cfg.volatility.len()];
            let mut close = Vec::with_capacity(cfg.days);
            let mut open = Vec::with_capacity(cfg.days);
            let mut high = Vec::with_capacity(cfg.days);
            let mut low = Vec::with_capacity(cfg.days);
            let mut volume = Vec::with_capacity(cfg.days);
            let mut price = cfg.base_price * (1.0 + 0.1 * a as f64);
            let mut prev_ret = 0.0_f64;
            for _ in 0..cfg.days {
                let z: f64 = standard_normal(&mut rng);
                let r = cfg.momentum * prev_ret + mu + sigma * z;
                prev_ret = r;
                let prev_price = price;
                price *= r.exp();
                let o = prev_price;
                let c = price;
                let span: f64 = uniform::<f64>(&mut rng) * sigma * prev_price;
                let h = o.max(c) + span;
                let l = (o.min(c) - span).max(o.min(c) * 0.5);
                let v = 1.0e6 * (1.0 + 0.2 * uniform::<f64>(&mut rng));
                open.push(T::c(o));
                high.push(T::c(h));
                low.push(T::c(l));
                close.push(T::c(c));
                volume.push(T::c(v));
            }
            OhlcvSeries {
                asset_id: format!("SYN{a}"),
                dates: dates.clone(),
                open,
                high,
                low,
                close,
                volume,
            }
        })
        .collect()
}
