//! Physics-informed Kolmogorov-Arnold reinforcement-learning agents for
//! long-only portfolio allocation, plus the trading environment, classical
//! online portfolio-selection baselines and backtest metrics they are
//! evaluated against.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`];
//! the aliases at the crate root fix `f64`, which is what the CLI and the
//! test suites use.

pub mod agents;
pub mod backtest;
pub mod baselines;
pub mod dataset;
pub mod env;
pub mod marketdata;
pub mod metrics;
pub mod physics;
pub mod kan;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod vecmath;

/// Default scalar type used by the CLI and the acceptance suites.
pub type F = f64;

pub type WeightVector = env::WeightVector<F>;
pub type PriceRelatives = env::PriceRelatives<F>;
pub type PortfolioState = env::PortfolioState<F>;
pub type StepOutcome = env::StepOutcome<F>;
pub type TradingEnv = env::TradingEnv<F>;
pub type SplineGrid = kan::SplineGrid<F>;
pub type KanNetwork = kan::KanNetwork<F>;
pub type OhlcvSeries = marketdata::OhlcvSeries<F>;
pub type FeatureMatrix = marketdata::FeatureMatrix<F>;
pub type StateTensor = marketdata::StateTensor<F>;
pub type PhysicsConfig = physics::PhysicsConfig<F>;
pub type EmaTracker = physics::EmaTracker<F>;
pub type WealthSeries = metrics::WealthSeries<F>;
pub type MetricsReport = metrics::MetricsReport<F>;
pub type Agent = agents::Agent<F>;
pub type EpisodeData = dataset::EpisodeData<F>;
pub type BacktestReport = backtest::BacktestReport<F>;

/// Single-precision aliases for the core math types.
pub mod f32_types {
    pub type WeightVector = crate::env::WeightVector<f32>;
    pub type PriceRelatives = crate::env::PriceRelatives<f32>;
    pub type TradingEnv = crate::env::TradingEnv<f32>;
    pub type SplineGrid = crate::kan::SplineGrid<f32>;
    pub type KanNetwork = crate::kan::KanNetwork<f32>;
    pub type EmaTracker = crate::physics::EmaTracker<f32>;
    pub type WealthSeries = crate::metrics::WealthSeries<f32>;
}
