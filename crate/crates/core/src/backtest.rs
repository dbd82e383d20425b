//! Deterministic backtests: run any allocation policy (trained agent or
//! classical baseline) through the environment over an episode and report
//! the wealth series plus the performance-metric row.

use chrono::NaiveDate;

use crate::agents::{Agent, AgentError};
use crate::baselines::{BaselineParams, StrategyId, StrategyState};
use crate::dataset::EpisodeData;
use crate::env::{PriceRelatives, WeightVector};
use crate::metrics::{full_report, MetricsError, MetricsReport, WealthSeries};
use crate::scalar::Scalar;

/// Everything a policy may look at when allocating for one period.
pub struct DecisionContext<'a, T> {
    /// Flattened state tensor for the decision day.
    pub state: &'a [T],
    /// Raw close prices on the decision day (one per asset).
    pub prices: &'a [T],
    /// The price relative the upcoming step consumes.
    pub relative: &'a PriceRelatives<T>,
    pub t: usize,
}

/// An allocation policy driving the environment.
pub trait Allocator<T: Scalar> {
    fn name(&self) -> String;
    fn allocate(&mut self, ctx: &DecisionContext<'_, T>) -> Result<WeightVector<T>, AgentError>;
}

impl<T: Scalar> Allocator<T> for Agent<T> {
    fn name(&self) -> String {
        self.cfg.algorithm.name().to_string()
    }

    fn allocate(&mut self, ctx: &DecisionContext<'_, T>) -> Result<WeightVector<T>, AgentError> {
        Ok(self.act(ctx.state, false)?.weights)
    }
}

/// Baseline strategies observe prices, then decide from the realized
/// relative.
pub struct BaselineAllocator<T> {
    state: StrategyState<T>,
}

impl<T: Scalar> BaselineAllocator<T> {
    pub fn new(id: StrategyId, assets: usize, params: BaselineParams) -> Self {
        Self {
            state: StrategyState::new(id, assets, params),
        }
    }
}

impl<T: Scalar> Allocator<T> for BaselineAllocator<T> {
    fn name(&self) -> String {
        self.state.strategy_id.name().to_string()
    }

    fn allocate(&mut self, ctx: &DecisionContext<'_, T>) -> Result<WeightVector<T>, AgentError> {
        self.state.observe_prices(ctx.prices);
        Ok(self.state.decide(ctx.relative))
    }
}

#[derive(Debug, Clone)]
pub struct BacktestReport<T> {
    pub algorithm: String,
    pub dates: Vec<NaiveDate>,
    pub wealth: Vec<T>,
    /// Weights held after each rebalance, flattened (days x assets).
    pub weights: Vec<Vec<T>>,
    pub metrics: MetricsReport<T>,
}

impl<T: Scalar> BacktestReport<T> {
    pub fn wealth_series(&self) -> Result<WealthSeries<T>, MetricsError> {
        WealthSeries::new(self.dates.clone(), self.wealth.clone())
    }
}

/// Drive a policy through the episode with the given commission. The wealth
/// series starts at the initial capital on the day before the first step.
pub fn run_backtest<T: Scalar>(
    policy: &mut dyn Allocator<T>,
    data: &EpisodeData<T>,
    commission: f64,
    initial_wealth: f64,
) -> Result<BacktestReport<T>, AgentError> {
    let mut env = data.to_env(T::c(commission), T::c(initial_wealth));
    let mut dates = Vec::with_capacity(data.n_steps() + 1);
    let mut wealth = Vec::with_capacity(data.n_steps() + 1);
    let mut weights = Vec::with_capacity(data.n_steps());
    // seed the series one day before the first decision
    dates.push(data.dates[0].pred_opt().expect("valid date"));
    wealth.push(T::c(initial_wealth));
    for k in 0..data.n_steps() {
        let relative = PriceRelatives::new(data.relatives[k].clone())?;
        let ctx = DecisionContext {
            state: &data.states[k],
            prices: &data.prices[k],
            relative: &relative,
            t: k,
        };
        let action = policy.allocate(&ctx)?;
        let outcome = env.step(&action)?;
        dates.push(data.dates[k]);
        wealth.push(outcome.next_state.wealth);
        weights.push(action.values().to_vec());
    }
    let series = WealthSeries::new(dates.clone(), wealth.clone())
        .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
    let metrics = full_report(&policy.name(), &series)
        .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
    Ok(BacktestReport {
        algorithm: policy.name(),
        dates,
        wealth,
        weights,
        metrics,
    })
}
