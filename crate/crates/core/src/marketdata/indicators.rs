//! The technical-indicator set feeding the state tensor.
//!
//! Standard textbook definitions: Wilder smoothing for RSI/ATR/ADX, EMA
//! pairs for MACD with an EMA signal line, population std for Bollinger
//! bands and realized volatility. Values before an indicator's warm-up are
//! NaN and flagged by the returned first-valid index.

use serde::{Deserialize, Serialize};

use super::ohlcv::OhlcvSeries;
use crate::scalar::Scalar;
use crate::vecmath;

/// Per-indicator lookback parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorParams {
    pub adx_period: usize,
    pub atr_period: usize,
    pub bb_period: usize,
    pub bb_k: f64,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub mom_period: usize,
    pub ret_horizons: (usize, usize),
    pub rsi_period: usize,
    pub rvol_period: usize,
    pub willr_period: usize,
}

impl Default for IndicatorParams {
    fn default() -> Self {
        Self {
            adx_period: 14,
            atr_period: 14,
            bb_period: 20,
            bb_k: 2.0,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            mom_period: 10,
            ret_horizons: (1, 5),
            rsi_period: 14,
            rvol_period: 20,
            willr_period: 60,
        }
    }
}

pub struct Column<T> {
    pub values: Vec<T>,
    pub first_valid: usize,
}

fn nan_vec<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::nan(); n]
}

/// Simple moving average helper over a trailing window ending at t.
fn window_slice<T: Scalar>(xs: &[T], t: usize, period: usize) -> &[T] {
    &xs[t + 1 - period..=t]
}

/// EMA seeded with the SMA of the first `period` values.
pub fn ema<T: Scalar>(xs: &[T], period: usize, offset: usize) -> Column<T> {
    let n = xs.len();
    let mut values = nan_vec(n);
    let first = offset + period - 1;
    if first >= n {
        return Column {
            values,
            first_valid: first,
        };
    }
    let alpha = T::c(2.0) / T::c(period as f64 + 1.0);
    let mut current = vecmath::mean(&xs[offset..=first]);
    values[first] = current;
    for t in first + 1..n {
        current = alpha * xs[t] + (T::one() - alpha) * current;
        values[t] = current;
    }
    Column {
        values,
        first_valid: first,
    }
}

fn true_range<T: Scalar>(s: &OhlcvSeries<T>) -> Vec<T> {
    let n = s.len();
    let mut tr = vec![T::zero(); n];
    for t in 1..n {
        let hl = s.high[t] - s.low[t];
        let hc = (s.high[t] - s.close[t - 1]).abs();
        let lc = (s.low[t] - s.close[t - 1]).abs();
        tr[t] = hl.max(hc).max(lc);
    }
    tr
}

/// Average True Range with Wilder smoothing; first value at index `period`.
pub fn atr<T: Scalar>(s: &OhlcvSeries<T>, period: usize) -> Column<T> {
    let n = s.len();
    let tr = true_range(s);
    let mut values = nan_vec(n);
    if n <= period {
        return Column {
            values,
            first_valid: period,
        };
    }
    let p = T::c(period as f64);
    let mut current = vecmath::mean(&tr[1..=period]);
    values[period] = current;
    for t in period + 1..n {
        current = (current * (p - T::one()) + tr[t]) / p;
        values[t] = current;
    }
    Column {
        values,
        first_valid: period,
    }
}

/// Wilder RSI; a constant series (no gains, no losses) is defined as 50.
pub fn rsi<T: Scalar>(close: &[T], period: usize) -> Column<T> {
    let n = close.len();
    let mut values = nan_vec(n);
    if n <= period {
        return Column {
            values,
            first_valid: period,
        };
    }
    let p = T::c(period as f64);
    let hundred = T::c(100.0);
    let mut gains = vec![T::zero(); n];
    let mut losses = vec![T::zero(); n];
    for t in 1..n {
        let d = close[t] - close[t - 1];
        if d > T::zero() {
            gains[t] = d;
        } else {
            losses[t] = -d;
        }
    }
    let mut avg_gain = vecmath::mean(&gains[1..=period]);
    let mut avg_loss = vecmath::mean(&losses[1..=period]);
    let rsi_of = |g: T, l: T| {
        if g == T::zero() && l == T::zero() {
            T::c(50.0)
        } else if l == T::zero() {
            hundred
        } else {
            hundred - hundred / (T::one() + g / l)
        }
    };
    values[period] = rsi_of(avg_gain, avg_loss);
    for t in period + 1..n {
        avg_gain = (avg_gain * (p - T::one()) + gains[t]) / p;
        avg_loss = (avg_loss * (p - T::one()) + losses[t]) / p;
        values[t] = rsi_of(avg_gain, avg_loss);
    }
    Column {
        values,
        first_valid: period,
    }
}

/// Average Directional Index: Wilder-smoothed directional movement; the
/// first value (at 2 * period - 1) averages the first `period` DX readings.
pub fn adx<T: Scalar>(s: &OhlcvSeries<T>, period: usize) -> Column<T> {
    let n = s.len();
    let first = 2 * period - 1;
    let mut values = nan_vec(n);
    if n <= first {
        return Column {
            values,
            first_valid: first,
        };
    }
    let p = T::c(period as f64);
    let hundred = T::c(100.0);
    let tr = true_range(s);
    let mut plus_dm = vec![T::zero(); n];
    let mut minus_dm = vec![T::zero(); n];
    for t in 1..n {
        let up = s.high[t] - s.high[t - 1];
        let down = s.low[t - 1] - s.low[t];
        if up > down && up > T::zero() {
            plus_dm[t] = up;
        }
        if down > up && down > T::zero() {
            minus_dm[t] = down;
        }
    }
    // Wilder running sums seeded over rows 1..=period
    let mut sm_tr = vecmath::sum(&tr[1..=period]);
    let mut sm_plus = vecmath::sum(&plus_dm[1..=period]);
    let mut sm_minus = vecmath::sum(&minus_dm[1..=period]);
    let dx_of = |sm_tr: T, sm_plus: T, sm_minus: T| {
        if sm_tr == T::zero() {
            return T::zero();
        }
        let plus_di = hundred * sm_plus / sm_tr;
        let minus_di = hundred * sm_minus / sm_tr;
        let denom = plus_di + minus_di;
        if denom == T::zero() {
            T::zero()
        } else {
            hundred * (plus_di - minus_di).abs() / denom
        }
    };
    let mut dx = vec![T::zero(); n];
    dx[period] = dx_of(sm_tr, sm_plus, sm_minus);
    for t in period + 1..n {
        sm_tr = sm_tr - sm_tr / p + tr[t];
        sm_plus = sm_plus - sm_plus / p + plus_dm[t];
        sm_minus = sm_minus - sm_minus / p + minus_dm[t];
        dx[t] = dx_of(sm_tr, sm_plus, sm_minus);
    }
    let mut current = vecmath::mean(&dx[period..=first]);
    values[first] = current;
    for t in first + 1..n {
        current = (current * (p - T::one()) + dx[t]) / p;
        values[t] = current;
    }
    Column {
        values,
        first_valid: first,
    }
}

/// Bollinger bands: SMA +/- k population std. Returns (upper, lower).
pub fn bollinger<T: Scalar>(close: &[T], period: usize, k: T) -> (Column<T>, Column<T>) {
    let n = close.len();
    let mut upper = nan_vec(n);
    let mut lower = nan_vec(n);
    for t in period - 1..n {
        let w = window_slice(close, t, period);
        let m = vecmath::mean(w);
        let sd = vecmath::std_dev(w);
        upper[t] = m + k * sd;
        lower[t] = m - k * sd;
    }
    (
        Column {
            values: upper,
            first_valid: period - 1,
        },
        Column {
            values: lower,
            first_valid: period - 1,
        },
    )
}

/// MACD line and its EMA signal; constant series give exactly zero.
pub fn macd<T: Scalar>(
    close: &[T],
    fast: usize,
    slow: usize,
    signal: usize,
) -> (Column<T>, Column<T>) {
    let n = close.len();
    let fast_ema = ema(close, fast, 0);
    let slow_ema = ema(close, slow, 0);
    let first_macd = fast_ema.first_valid.max(slow_ema.first_valid);
    let mut line = nan_vec(n);
    for t in first_macd..n {
        line[t] = fast_ema.values[t] - slow_ema.values[t];
    }
    let signal_col = if first_macd < n {
        let tail = &line[first_macd..];
        let mut sig = ema(tail, signal, 0);
        let mut shifted = nan_vec(n);
        for (i, v) in sig.values.drain(..).enumerate() {
            shifted[first_macd + i] = v;
        }
        Column {
            values: shifted,
            first_valid: first_macd + signal - 1,
        }
    } else {
        Column {
            values: nan_vec(n),
            first_valid: first_macd + signal - 1,
        }
    };
    (
        Column {
            values: line,
            first_valid: first_macd,
        },
        signal_col,
    )
}

pub fn momentum<T: Scalar>(close: &[T], period: usize) -> Column<T> {
    let n = close.len();
    let mut values = nan_vec(n);
    for t in period..n {
        values[t] = close[t] - close[t - period];
    }
    Column {
        values,
        first_valid: period,
    }
}

/// On-balance volume, seeded with the first day's volume.
pub fn obv<T: Scalar>(close: &[T], volume: &[T]) -> Column<T> {
    let n = close.len();
    let mut values = nan_vec(n);
    if n == 0 {
        return Column {
            values,
            first_valid: 0,
        };
    }
    let mut current = volume[0];
    values[0] = current;
    for t in 1..n {
        if close[t] > close[t - 1] {
            current += volume[t];
        } else if close[t] < close[t - 1] {
            current -= volume[t];
        }
        values[t] = current;
    }
    Column {
        values,
        first_valid: 0,
    }
}

/// Simple return over `horizon` days.
pub fn ret<T: Scalar>(close: &[T], horizon: usize) -> Column<T> {
    let n = close.len();
    let mut values = nan_vec(n);
    for t in horizon..n {
        values[t] = (close[t] - close[t - horizon]) / close[t - horizon];
    }
    Column {
        values,
        first_valid: horizon,
    }
}

/// Realized volatility: population std of trailing 1-day returns.
pub fn rvol<T: Scalar>(close: &[T], period: usize) -> Column<T> {
    let n = close.len();
    let r1 = ret(close, 1);
    let mut values = nan_vec(n);
    for t in period..n {
        values[t] = vecmath::std_dev(&r1.values[t + 1 - period..=t]);
    }
    Column {
        values,
        first_valid: period,
    }
}

/// Williams %R in [-100, 0]; a zero high-low range maps to -50.
pub fn willr<T: Scalar>(s: &OhlcvSeries<T>, period: usize) -> Column<T> {
    let n = s.len();
    let mut values = nan_vec(n);
    for t in period - 1..n {
        let hh = window_slice(&s.high, t, period)
            .iter()
            .fold(T::neg_infinity(), |a, &b| a.max(b));
        let ll = window_slice(&s.low, t, period)
            .iter()
            .fold(T::infinity(), |a, &b| a.min(b));
        values[t] = if hh == ll {
            T::c(-50.0)
        } else {
            T::c(-100.0) * (hh - s.close[t]) / (hh - ll)
        };
    }
    Column {
        values,
        first_valid: period - 1,
    }
}
