//! Finite-horizon trading environment: price relatives, weight drift,
//! turnover, proportional commission and the multiplicative wealth update
//! with its log-return reward.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::vecmath;

/// Tolerance for the simplex sum check on incoming weight vectors.
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("non-positive price encountered")]
    NonPositivePrice,
    #[error("weight vector violates simplex constraints")]
    InvalidWeights,
    #[error("asset-count mismatch: expected {expected}, got {got}")]
    AssetCountMismatch { expected: usize, got: usize },
    #[error("episode terminated: wealth is no longer positive")]
    EpisodeTerminated,
    #[error("episode exhausted: no price relative left at step {0}")]
    EpisodeExhausted(usize),
}

/// Per-period gross returns y_t, elementwise v_t / v_{t-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceRelatives<T> {
    values: Vec<T>,
}

impl<T: Scalar> PriceRelatives<T> {
    pub fn new(values: Vec<T>) -> Result<Self, EnvError> {
        if values.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(EnvError::NonPositivePrice);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Long-only, fully invested allocation: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, EnvError> {
        let total = vecmath::sum(&values);
        let ok = values.iter().all(|w| w.is_finite() && *w >= T::zero())
            && (total - T::one()).abs() <= T::c(SIMPLEX_TOL);
        if ok {
            Ok(Self { values })
        } else {
            Err(EnvError::InvalidWeights)
        }
    }

    /// Uniform 1/m allocation.
    pub fn uniform(m: usize) -> Self {
        let w = T::one() / T::c(m as f64);
        Self {
            values: vec![w; m],
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Wealth plus current allocation at day index `t`.
#[derive(Debug, Clone)]
pub struct PortfolioState<T> {
    pub wealth: T,
    pub weights: WeightVector<T>,
    pub t: usize,
}

/// Everything one environment step produces.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub next_state: PortfolioState<T>,
    /// ln(cost factor x gross growth); log units.
    pub reward: T,
    pub turnover: T,
    pub cost_factor: T,
    pub drifted_weights: WeightVector<T>,
}

/// Elementwise close / previous close.
pub fn price_relatives<T: Scalar>(prev_close: &[T], close: &[T]) -> Result<PriceRelatives<T>, EnvError> {
    if prev_close.len() != close.len() {
        return Err(EnvError::AssetCountMismatch {
            expected: prev_close.len(),
            got: close.len(),
        });
    }
    if prev_close
        .iter()
        .chain(close.iter())
        .any(|v| !v.is_finite() || *v <= T::zero())
    {
        return Err(EnvError::NonPositivePrice);
    }
    let values = close
        .iter()
        .zip(prev_close)
        .map(|(&c, &p)| c / p)
        .collect();
    PriceRelatives::new(values)
}

/// Post-price-move allocation before rebalancing: (y (.) w) / <w, y>.
pub fn drift_weights<T: Scalar>(w_prev: &WeightVector<T>, y: &PriceRelatives<T>) -> WeightVector<T> {
    let growth = vecmath::dot(w_prev.values(), y.values());
    let values = w_prev
        .values()
        .iter()
        .zip(y.values())
        .map(|(&w, &r)| w * r / growth)
        .collect();
    WeightVector { values }
}

/// L1 distance between target and drifted weights; in [0, 2] on the simplex.
pub fn turnover<T: Scalar>(w_new: &WeightVector<T>, w_drifted: &WeightVector<T>) -> T {
    vecmath::l1_distance(w_new.values(), w_drifted.values())
}

/// Net-of-fee factor mu = 1 - c * turnover.
pub fn cost_factor<T: Scalar>(turnover: T, commission: T) -> T {
    T::one() - commission * turnover
}

/// One trading period: old weights earn y, then the rebalance to `action`
/// pays proportional costs. The reward shares the wealth update's exact
/// floating path so exp-summed rewards reproduce terminal wealth.
pub fn step<T: Scalar>(
    state: &PortfolioState<T>,
    action: &WeightVector<T>,
    y: &PriceRelatives<T>,
    commission: T,
) -> Result<StepOutcome<T>, EnvError> {
    let m = state.weights.len();
    if action.len() != m || y.len() != m {
        return Err(EnvError::AssetCountMismatch {
            expected: m,
            got: action.len().max(y.len()),
        });
    }
    let drifted = drift_weights(&state.weights, y);
    let to = turnover(action, &drifted);
    let mu = cost_factor(to, commission);
    let growth = vecmath::dot(state.weights.values(), y.values());
    let factor = growth * mu;
    let next_wealth = state.wealth * factor;
    if next_wealth <= T::zero() {
        // unreachable for c < 0.5 and positive prices; kept defensively
        return Err(EnvError::EpisodeTerminated);
    }
    Ok(StepOutcome {
        next_state: PortfolioState {
            wealth: next_wealth,
            weights: action.clone(),
            t: state.t + 1,
        },
        reward: factor.ln(),
        turnover: to,
        cost_factor: mu,
        drifted_weights: drifted,
    })
}

/// Softmax map from unconstrained raw scores onto the simplex.
pub fn project_to_simplex<T: Scalar>(raw: &[T]) -> WeightVector<T> {
    WeightVector {
        values: vecmath::softmax(raw),
    }
}

/// A whole episode: the per-period relatives plus commission and start state.
#[derive(Debug, Clone)]
pub struct TradingEnv<T> {
    relatives: Vec<PriceRelatives<T>>,
    commission: T,
    initial_wealth: T,
    state: PortfolioState<T>,
}

impl<T: Scalar> TradingEnv<T> {
    /// `relatives[k]` is consumed by the k-th call to [`TradingEnv::step`].
    pub fn new(relatives: Vec<PriceRelatives<T>>, commission: T, initial_wealth: T) -> Self {
        let m = relatives.first().map(|y| y.len()).unwrap_or(0);
        Self {
            relatives,
            commission,
            initial_wealth,
            state: PortfolioState {
                wealth: initial_wealth,
                weights: WeightVector::uniform(m),
                t: 0,
            },
        }
    }

    pub fn reset(&mut self) -> &PortfolioState<T> {
        let m = self.relatives.first().map(|y| y.len()).unwrap_or(0);
        self.state = PortfolioState {
            wealth: self.initial_wealth,
            weights: WeightVector::uniform(m),
            t: 0,
        };
        &self.state
    }

    pub fn state(&self) -> &PortfolioState<T> {
        &self.state
    }

    pub fn horizon(&self) -> usize {
        self.relatives.len()
    }

    pub fn commission(&self) -> T {
        self.commission
    }

    pub fn remaining(&self) -> usize {
        self.relatives.len().saturating_sub(self.state.t)
    }

    /// Current period's price relative, i.e. the one the next step consumes.
    pub fn current_relative(&self) -> Option<&PriceRelatives<T>> {
        self.relatives.get(self.state.t)
    }

    /// Advance one period with the given target allocation.
    pub fn step(&mut self, action: &WeightVector<T>) -> Result<StepOutcome<T>, EnvError> {
        let y = self
            .relatives
            .get(self.state.t)
            .ok_or(EnvError::EpisodeExhausted(self.state.t))?;
        let outcome = step(&self.state, action, y, self.commission)?;
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.relatives.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, uniform};

    fn wv(values: &[f64]) -> WeightVector<f64> {
        WeightVector::new(values.to_vec()).unwrap()
    }

    fn pr(values: &[f64]) -> PriceRelatives<f64> {
        PriceRelatives::new(values.to_vec()).unwrap()
    }

    #[test]
    fn price_relatives_of_unchanged_prices_are_ones() {
        let y = price_relatives(&[3.0, 7.0], &[3.0, 7.0]).unwrap();
        assert_eq!(y.values(), &[1.0, 1.0]);
    }

    #[test]
    fn price_relatives_direct_case() {
        let y = price_relatives(&[100.0, 50.0], &[110.0, 45.0]).unwrap();
        assert!((y.values()[0] - 1.10_f64).abs() < 1e-12);
        assert!((y.values()[1] - 0.90_f64).abs() < 1e-12);
    }

    #[test]
    fn price_relatives_reject_zero_price() {
        assert_eq!(
            price_relatives(&[100.0, 0.0], &[110.0, 45.0]).unwrap_err(),
            EnvError::NonPositivePrice
        );
        assert_eq!(
            price_relatives(&[100.0, 50.0], &[110.0, 0.0]).unwrap_err(),
            EnvError::NonPositivePrice
        );
    }

    #[test]
    fn drift_is_identity_under_flat_prices() {
        let w = wv(&[0.3, 0.7]);
        let d = drift_weights(&w, &pr(&[1.0, 1.0]));
        assert_eq!(d.values(), w.values());
    }

    #[test]
    fn drift_direct_case() {
        let d = drift_weights(&wv(&[0.5, 0.5]), &pr(&[2.0, 1.0]));
        assert!((d.values()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.values()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn drift_of_single_asset_portfolio_is_fixed() {
        let d = drift_weights(&wv(&[1.0, 0.0]), &pr(&[0.5, 3.0]));
        assert_eq!(d.values(), &[1.0, 0.0]);
    }

    #[test]
    fn drift_stays_on_simplex() {
        let mut rng = substream(5, "drift");
        for _ in 0..200 {
            let raw: Vec<f64> = (0..6).map(|_| uniform::<f64>(&mut rng) * 4.0 - 2.0).collect();
            let w = project_to_simplex(&raw);
            let y: Vec<f64> = (0..6).map(|_| 0.5 + uniform::<f64>(&mut rng)).collect();
            let d = drift_weights(&w, &pr(&y));
            let total = vecmath::sum(d.values());
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.values().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn turnover_cases() {
        assert_eq!(turnover(&wv(&[0.4, 0.6]), &wv(&[0.4, 0.6])), 0.0);
        assert_eq!(turnover(&wv(&[1.0, 0.0]), &wv(&[0.0, 1.0])), 2.0);
        let t = turnover(&wv(&[0.5, 0.5]), &wv(&[0.6, 0.4]));
        assert!((t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cost_factor_cases() {
        assert_eq!(cost_factor(0.0, 0.0025), 1.0);
        assert_eq!(cost_factor(2.0, 0.0025), 0.995);
        assert!((cost_factor(0.2_f64, 0.0025) - 0.9995).abs() < 1e-15);
    }

    #[test]
    fn step_flat_market_holds_wealth() {
        let state = PortfolioState {
            wealth: 1000.0,
            weights: wv(&[0.5, 0.5]),
            t: 0,
        };
        let out = step(&state, &wv(&[0.5, 0.5]), &pr(&[1.0, 1.0]), 0.0025).unwrap();
        assert_eq!(out.next_state.wealth, 1000.0);
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.turnover, 0.0);
    }

    #[test]
    fn step_zero_turnover_single_asset() {
        let state = PortfolioState {
            wealth: 1000.0,
            weights: wv(&[1.0, 0.0]),
            t: 0,
        };
        let y = pr(&[1.10, 1.0]);
        let drifted = drift_weights(&state.weights, &y);
        let out = step(&state, &drifted, &y, 0.0025).unwrap();
        assert!((out.next_state.wealth - 1100.0).abs() < 1e-9);
        assert!((out.reward - 1.10_f64.ln()).abs() < 1e-12);
        assert_eq!(out.turnover, 0.0);
    }

    /// Chained evaluation of the full step against values worked out
    /// independently (growth 1.5, drift [2/3, 1/3], turnover 1/3).
    #[test]
    fn step_chained_case_matches_hand_computation() {
        let c = 0.0025;
        let state = PortfolioState {
            wealth: 1000.0,
            weights: wv(&[0.5, 0.5]),
            t: 0,
        };
        let out = step(&state, &wv(&[0.5, 0.5]), &pr(&[2.0, 1.0]), c).unwrap();
        let expected_turnover = (0.5f64 - 2.0 / 3.0).abs() + (0.5f64 - 1.0 / 3.0).abs();
        let expected_mu = 1.0 - c * expected_turnover;
        let expected_wealth = 1000.0 * 1.5 * expected_mu;
        assert!((out.turnover - expected_turnover).abs() < 1e-12);
        assert!((out.drifted_weights.values()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.cost_factor - expected_mu).abs() < 1e-15);
        assert!((out.next_state.wealth - expected_wealth).abs() < 1e-9);
        assert!((out.reward - (1.5 * expected_mu).ln()).abs() < 1e-12);
    }

    #[test]
    fn reward_is_log_wealth_ratio_over_episode() {
        let mut rng = substream(17, "episode");
        let m = 4;
        let t_max = 200;
        let relatives: Vec<PriceRelatives<f64>> = (0..t_max)
            .map(|_| pr(&(0..m).map(|_| 0.8 + 0.4 * uniform::<f64>(&mut rng)).collect::<Vec<_>>()))
            .collect();
        let mut env = TradingEnv::new(relatives, 0.0025, 1000.0);
        let mut log_sum = 0.0;
        while !env.done() {
            let raw: Vec<f64> = (0..m).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let out = env.step(&project_to_simplex(&raw)).unwrap();
            log_sum += out.reward;
        }
        let implied = 1000.0 * log_sum.exp();
        let rel = (implied - env.state().wealth).abs() / env.state().wealth;
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn zero_cost_wealth_is_product_of_growth_factors() {
        let mut rng = substream(23, "zerocost");
        let m = 3;
        let relatives: Vec<PriceRelatives<f64>> = (0..100)
            .map(|_| pr(&(0..m).map(|_| 0.9 + 0.2 * uniform::<f64>(&mut rng)).collect::<Vec<_>>()))
            .collect();
        let mut env = TradingEnv::new(relatives.clone(), 0.0, 1000.0);
        let mut product = 1000.0;
        let mut k = 0;
        while !env.done() {
            let w = env.state().weights.clone();
            let raw: Vec<f64> = (0..m).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let action = project_to_simplex(&raw);
            product *= vecmath::dot(w.values(), relatives[k].values());
            env.step(&action).unwrap();
            k += 1;
        }
        let rel = (product - env.state().wealth).abs() / env.state().wealth;
        assert!(rel < 1e-12, "relative error {rel}");
    }

    #[test]
    fn step_is_deterministic() {
        let state = PortfolioState {
            wealth: 123.0,
            weights: wv(&[0.25, 0.75]),
            t: 3,
        };
        let y = pr(&[1.01, 0.97]);
        let a = wv(&[0.6, 0.4]);
        let o1 = step(&state, &a, &y, 0.0025).unwrap();
        let o2 = step(&state, &a, &y, 0.0025).unwrap();
        assert_eq!(o1.next_state.wealth.to_bits(), o2.next_state.wealth.to_bits());
        assert_eq!(o1.reward.to_bits(), o2.reward.to_bits());
    }

    #[test]
    fn cost_factor_monotone_in_turnover() {
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let mu = cost_factor(0.1 * k as f64, 0.0025);
            assert!(mu <= prev);
            prev = mu;
        }
    }

    #[test]
    fn softmax_projection_cases() {
        let w = project_to_simplex(&[0.7_f64; 5]);
        for &x in w.values() {
            assert!((x - 0.2).abs() < 1e-12);
        }
        let w = project_to_simplex(&[60.0, -60.0]);
        assert!(w.values()[0] > 1.0 - 1e-9);
        let w = project_to_simplex(&[0.0, (3.0_f64).ln()]);
        assert!((w.values()[0] - 0.25).abs() < 1e-12);
        assert!((w.values()[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn invalid_weight_vectors_are_rejected() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0]).is_err());
    }
}
