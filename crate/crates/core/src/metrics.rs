//! Performance metrics computed from a daily portfolio-value series:
//! cumulative and annualized return, annualized volatility, Sharpe,
//! maximum drawdown, Calmar and terminal value.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::vecmath;

/// Average count of trading days per year.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {required} data points, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("series contains a non-positive value")]
    NonPositiveValue,
    #[error("volatility is zero; Sharpe ratio undefined")]
    ZeroVolatility,
    #[error("maximum drawdown is zero; Calmar ratio undefined")]
    ZeroDrawdown,
    #[error("horizon must be positive")]
    NonPositiveHorizon,
}

/// Daily portfolio values P_0..P_T, strictly positive.
#[derive(Debug, Clone)]
pub struct WealthSeries<T> {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
}

impl<T: Scalar> WealthSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<T>) -> Result<Self, MetricsError> {
        if values.len() < 2 {
            return Err(MetricsError::InsufficientData {
                required: 2,
                got: values.len(),
            });
        }
        if dates.len() != values.len() {
            return Err(MetricsError::InsufficientData {
                required: values.len(),
                got: dates.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(MetricsError::NonPositiveValue);
        }
        Ok(Self { dates, values })
    }

    /// Simple daily returns P_t / P_{t-1} - 1.
    pub fn daily_returns(&self) -> Vec<T> {
        self.values
            .windows(2)
            .map(|w| w[1] / w[0] - T::one())
            .collect()
    }

    /// Trading-day count / 252.
    pub fn years(&self) -> T {
        T::c((self.values.len() - 1) as f64) / T::c(TRADING_DAYS_PER_YEAR)
    }
}

/// The report row backing the comparison tables. `sharpe` and `calmar` are
/// undefined for flat series and stay empty there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub algorithm: String,
    /// Total growth in percent.
    pub cum_ret_pct: T,
    /// Geometric average return, fraction per year.
    pub ann_ret: T,
    /// Annualized standard deviation of daily returns, fraction.
    pub ann_vol: T,
    pub sharpe: Option<T>,
    /// Largest peak-to-trough decline in percent, in [0, 100).
    pub mdd_pct: T,
    pub calmar: Option<T>,
    /// Terminal portfolio value. The comparison tables label this column
    /// "APV"; every row satisfies APV = P_0 * (1 + CumRet/100), so it is the
    /// final value despite the name.
    pub apv: T,
}

impl<T: Scalar> MetricsReport<T> {
    /// One comparison-table CSV row: Algorithm,CumRet,AnnRet,AnnVol,Sharpe,
    /// MDD,Calmar,APV with the return and volatility columns in percent and
    /// empty cells where a ratio is undefined.
    pub fn table_row(&self) -> String {
        fn cell<T: Scalar>(v: Option<T>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        let hundred = T::c(100.0);
        format!(
            "{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.cum_ret_pct,
            self.ann_ret * hundred,
            self.ann_vol * hundred,
            cell(self.sharpe),
            self.mdd_pct,
            cell(self.calmar),
            self.apv
        )
    }
}

/// (P_T - P_0) / P_0 * 100.
pub fn cumulative_return<T: Scalar>(series: &WealthSeries<T>) -> T {
    let p0 = series.values[0];
    let pt = *series.values.last().unwrap();
    (pt - p0) / p0 * T::c(100.0)
}

/// (P_T / P_0)^(1/years) - 1.
pub fn annualized_return<T: Scalar>(series: &WealthSeries<T>, years: T) -> Result<T, MetricsError> {
    if years <= T::zero() {
        return Err(MetricsError::NonPositiveHorizon);
    }
    let ratio = *series.values.last().unwrap() / series.values[0];
    Ok(ratio.powf(T::one() / years) - T::one())
}

/// Population std of daily returns, scaled by sqrt(252).
pub fn annualized_volatility<T: Scalar>(daily_returns: &[T]) -> Result<T, MetricsError> {
    if daily_returns.len() < 2 {
        return Err(MetricsError::InsufficientData {
            required: 2,
            got: daily_returns.len(),
        });
    }
    Ok(vecmath::std_dev(daily_returns) * T::c(TRADING_DAYS_PER_YEAR).sqrt())
}

/// (annualized return - risk free) / annualized volatility.
pub fn sharpe_ratio<T: Scalar>(series: &WealthSeries<T>, risk_free: T) -> Result<T, MetricsError> {
    let vol = annualized_volatility(&series.daily_returns())?;
    if vol == T::zero() {
        return Err(MetricsError::ZeroVolatility);
    }
    let ann = annualized_return(series, series.years())?;
    Ok((ann - risk_free) / vol)
}

/// Single-pass peak tracking; result in percent.
pub fn max_drawdown<T: Scalar>(series: &WealthSeries<T>) -> T {
    let mut peak = series.values[0];
    let mut worst = T::zero();
    for &v in &series.values {
        if v > peak {
            peak = v;
        }
        let dd = (peak - v) / peak;
        if dd > worst {
            worst = dd;
        }
    }
    worst * T::c(100.0)
}

/// Annualized return / |max drawdown| (drawdown as a fraction).
pub fn calmar_ratio<T: Scalar>(ann_return: T, mdd_pct: T) -> Result<T, MetricsError> {
    if mdd_pct == T::zero() {
        return Err(MetricsError::ZeroDrawdown);
    }
    Ok(ann_return / (mdd_pct.abs() / T::c(100.0)))
}

/// All metrics computed consistently from one series.
pub fn full_report<T: Scalar>(algorithm: &str, series: &WealthSeries<T>) -> Result<MetricsReport<T>, MetricsError> {
    let years = series.years();
    let ann_ret = annualized_return(series, years)?;
    let ann_vol = annualized_volatility(&series.daily_returns())?;
    let mdd_pct = max_drawdown(series);
    let sharpe = if ann_vol == T::zero() {
        None
    } else {
        Some(ann_ret / ann_vol)
    };
    let calmar = calmar_ratio(ann_ret, mdd_pct).ok();
    Ok(MetricsReport {
        algorithm: algorithm.to_string(),
        cum_ret_pct: cumulative_return(series),
        ann_ret,
        ann_vol,
        sharpe,
        mdd_pct,
        calmar,
        apv: *series.values.last().unwrap(),
    })
}
