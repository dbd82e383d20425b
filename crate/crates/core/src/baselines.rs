//! Classical online portfolio-selection baselines: uniform buy-and-hold,
//! constant rebalancing, and the OLMAR / RMR / PAMR mean-reversion family.
//!
//! The mean-reversion strategies use the exact Euclidean projection onto the
//! simplex (sort-based), not the softmax map the RL agents use.

use std::collections::VecDeque;

use crate::env::{drift_weights, PriceRelatives, WeightVector};
use crate::scalar::Scalar;
use crate::vecmath;

/// Exact Euclidean projection onto the probability simplex.
///
/// Sorts the point, finds the largest support whose shifted entries stay
/// positive, and clips. O(m log m).
pub fn euclidean_simplex_projection<T: Scalar>(raw: &[T]) -> WeightVector<T> {
    let m = raw.len();
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    let mut support = 0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let k = T::c((j + 1) as f64);
        let candidate = (cumsum - T::one()) / k;
        if u - candidate > T::zero() {
            theta = candidate;
            support = j + 1;
        }
    }
    if support == 0 {
        // entries so spread out that the shift rounds away: all mass on the
        // largest coordinate
        let argmax = (0..m)
            .max_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap())
            .unwrap();
        let mut values = vec![T::zero(); m];
        values[argmax] = T::one();
        return WeightVector::new(values).expect("unit vector on simplex");
    }
    let mut values: Vec<T> = raw.iter().map(|&v| (v - theta).max(T::zero())).collect();
    // renormalize away accumulated rounding so the simplex invariant holds
    let total = vecmath::sum(&values);
    for v in &mut values {
        *v /= total;
    }
    WeightVector::new(values).expect("projection output on simplex")
}

/// Geometric (L1) median of a point cloud via Weiszfeld iteration, starting
/// from the centroid. Falls back to the coordinate-wise median when the
/// iteration fails to converge.
pub fn geometric_median<T: Scalar>(points: &[Vec<T>], tolerance: T, max_iter: usize) -> Vec<T> {
    let dim = points[0].len();
    let n = T::c(points.len() as f64);
    let mut y: Vec<T> = (0..dim)
        .map(|d| points.iter().fold(T::zero(), |acc, p| acc + p[d]) / n)
        .collect();
    let tiny = T::c(1e-12);
    for _ in 0..max_iter {
        let mut num = vec![T::zero(); dim];
        let mut denom = T::zero();
        for p in points {
            let mut dist = T::zero();
            for d in 0..dim {
                let diff = p[d] - y[d];
                dist += diff * diff;
            }
            let dist = dist.sqrt().max(tiny);
            let w = T::one() / dist;
            for d in 0..dim {
                num[d] += p[d] * w;
            }
            denom += w;
        }
        let next: Vec<T> = num.into_iter().map(|v| v / denom).collect();
        let shift = vecmath::l1_distance(&next, &y);
        let scale = y.iter().fold(T::zero(), |a, v| a + v.abs()).max(T::one());
        y = next;
        if shift < tolerance * scale {
            return y;
        }
    }
    log::warn!("Weiszfeld iteration did not converge; falling back to coordinate-wise median");
    coordinate_median(points)
}

fn coordinate_median<T: Scalar>(points: &[Vec<T>]) -> Vec<T> {
    let dim = points[0].len();
    (0..dim)
        .map(|d| {
            let mut col: Vec<T> = points.iter().map(|p| p[d]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                (col[n / 2 - 1] + col[n / 2]) / T::c(2.0)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    Ubah,
    Crp,
    Olmar,
    Rmr,
    Pamr,
}

impl StrategyId {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyId::Ubah => "UBAH",
            StrategyId::Crp => "CRP",
            StrategyId::Olmar => "OLMAR",
            StrategyId::Rmr => "RMR",
            StrategyId::Pamr => "PAMR",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ubah" => Some(StrategyId::Ubah),
            "crp" => Some(StrategyId::Crp),
            "olmar" => Some(StrategyId::Olmar),
            "rmr" => Some(StrategyId::Rmr),
            "pamr" => Some(StrategyId::Pamr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BaselineParams {
    /// Price window for the reversion forecasts.
    pub window: usize,
    /// Reversion threshold for OLMAR / RMR.
    pub epsilon_olmar: f64,
    /// Mean-reversion sensitivity for PAMR.
    pub epsilon_pamr: f64,
    pub weiszfeld_tolerance: f64,
    pub weiszfeld_max_iter: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            window: 5,
            epsilon_olmar: 10.0,
            epsilon_pamr: 0.5,
            weiszfeld_tolerance: 1e-6,
            weiszfeld_max_iter: 200,
        }
    }
}

/// Strategy state threaded through a backtest: current weights plus the
/// rolling price window the reversion strategies require.
#[derive(Debug, Clone)]
pub struct StrategyState<T> {
    pub strategy_id: StrategyId,
    pub current_weights: WeightVector<T>,
    pub price_history: VecDeque<Vec<T>>,
    pub params: BaselineParams,
}

impl<T: Scalar> StrategyState<T> {
    pub fn new(strategy_id: StrategyId, assets: usize, params: BaselineParams) -> Self {
        Self {
            strategy_id,
            current_weights: WeightVector::uniform(assets),
            price_history: VecDeque::new(),
            params,
        }
    }

    /// Record today's close prices before deciding.
    pub fn observe_prices(&mut self, prices: &[T]) {
        self.price_history.push_back(prices.to_vec());
        while self.price_history.len() > self.params.window {
            self.price_history.pop_front();
        }
    }

    /// Next target weights given today's realized price relative.
    pub fn decide(&mut self, y_t: &PriceRelatives<T>) -> WeightVector<T> {
        let next = match self.strategy_id {
            StrategyId::Ubah => ubah_weights(self, y_t),
            StrategyId::Crp => crp_weights(self, y_t),
            StrategyId::Olmar => olmar_weights(self, y_t),
            StrategyId::Rmr => rmr_weights(self, y_t),
            StrategyId::Pamr => pamr_weights(self, y_t),
        };
        self.current_weights = next.clone();
        next
    }
}

/// Buy and hold: weights drift with prices and are never rebalanced.
pub fn ubah_weights<T: Scalar>(state: &StrategyState<T>, y_t: &PriceRelatives<T>) -> WeightVector<T> {
    drift_weights(&state.current_weights, y_t)
}

/// Constant rebalanced portfolio: return the fixed (uniform) target.
pub fn crp_weights<T: Scalar>(state: &StrategyState<T>, _y_t: &PriceRelatives<T>) -> WeightVector<T> {
    WeightVector::uniform(state.current_weights.len())
}

/// Shared passive-aggressive step: project w + tau * centered onto the
/// simplex; `centered` must be mean-centered.
fn pa_update<T: Scalar>(w: &WeightVector<T>, centered: &[T], tau: T) -> WeightVector<T> {
    let raw: Vec<T> = w
        .values()
        .iter()
        .zip(centered)
        .map(|(&wi, &ci)| wi + tau * ci)
        .collect();
    euclidean_simplex_projection(&raw)
}

/// Moving-average reversion: predict the next price relative from the
/// window mean over today's price, then take a passive-aggressive step.
pub fn olmar_weights<T: Scalar>(state: &StrategyState<T>, _y_t: &PriceRelatives<T>) -> WeightVector<T> {
    let w = &state.current_weights;
    if state.price_history.len() < 2 {
        return w.clone();
    }
    let today = state.price_history.back().unwrap();
    let m = today.len();
    let n = T::c(state.price_history.len() as f64);
    let x_hat: Vec<T> = (0..m)
        .map(|i| {
            let ma = state.price_history.iter().fold(T::zero(), |acc, p| acc + p[i]) / n;
            ma / today[i]
        })
        .collect();
    reversion_step(w, &x_hat, T::c(state.params.epsilon_olmar))
}

/// Robust median reversion: as OLMAR with the L1-median of the price window
/// as the forecast anchor.
pub fn rmr_weights<T: Scalar>(state: &StrategyState<T>, _y_t: &PriceRelatives<T>) -> WeightVector<T> {
    let w = &state.current_weights;
    if state.price_history.len() < 2 {
        return w.clone();
    }
    let points: Vec<Vec<T>> = state.price_history.iter().cloned().collect();
    let median = geometric_median(
        &points,
        T::c(state.params.weiszfeld_tolerance),
        state.params.weiszfeld_max_iter,
    );
    let today = state.price_history.back().unwrap();
    let x_hat: Vec<T> = median.iter().zip(today).map(|(&mi, &pi)| mi / pi).collect();
    reversion_step(w, &x_hat, T::c(state.params.epsilon_olmar))
}

fn reversion_step<T: Scalar>(w: &WeightVector<T>, x_hat: &[T], epsilon: T) -> WeightVector<T> {
    let x_mean = vecmath::mean(x_hat);
    let centered: Vec<T> = x_hat.iter().map(|&x| x - x_mean).collect();
    let denom = vecmath::dot(&centered, &centered);
    if denom <= T::c(1e-12) {
        // constant forecast up to rounding: degenerate update, keep weights
        return w.clone();
    }
    let margin = epsilon - vecmath::dot(w.values(), x_hat);
    let tau = (margin / denom).max(T::zero());
    if tau == T::zero() {
        return w.clone();
    }
    pa_update(w, &centered, tau)
}

/// Passive-aggressive mean reversion on the realized relative y_t.
pub fn pamr_weights<T: Scalar>(state: &StrategyState<T>, y_t: &PriceRelatives<T>) -> WeightVector<T> {
    let w = &state.current_weights;
    let loss = (vecmath::dot(w.values(), y_t.values()) - T::c(state.params.epsilon_pamr)).max(T::zero());
    if loss == T::zero() {
        return w.clone();
    }
    let y_mean = vecmath::mean(y_t.values());
    let centered: Vec<T> = y_t.values().iter().map(|&y| y - y_mean).collect();
    let denom = vecmath::dot(&centered, &centered);
    if denom <= T::c(1e-12) {
        return w.clone();
    }
    let tau = loss / denom;
    let raw: Vec<T> = w
        .values()
        .iter()
        .zip(&centered)
        .map(|(&wi, &ci)| wi - tau * ci)
        .collect();
    euclidean_simplex_projection(&raw)
}
