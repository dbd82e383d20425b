//! Newtonian regularization: velocity/acceleration extraction from state
//! tensors, the squared-residual physics loss, EMA normalization of loss
//! streams, the adaptive loss weight and the volatility-regime EMA.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::vecmath;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// How velocities are extracted from a pair of flattened state tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityMode {
    /// Relative change of the close-price feature at the last window step;
    /// output is (batch x assets). Off-policy agents default to this.
    PriceMode,
    /// Raw state difference over dt, averaged over the feature axis at the
    /// last window step. On-policy agents default to this.
    FeatureMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicsConfig<T> {
    /// Market-inertia constant m > 0; actions play the role of forces.
    pub mass: T,
    /// Time step in trading days.
    pub dt: T,
    /// Base physics-loss weight.
    pub lambda_base: T,
    /// Optional clamp applied to the raw physics loss.
    pub loss_clamp: Option<(T, T)>,
    /// Clamp applied to the adaptive weight.
    pub lambda_clamp: (T, T),
    /// EMA rate for loss mean/variance trackers.
    pub ema_beta: T,
    /// EMA rate for the volatility-regime tracker.
    pub vol_beta: T,
    /// Guard for divisions and square roots.
    pub epsilon: T,
    pub mode: VelocityMode,
}

impl<T: Scalar> PhysicsConfig<T> {
    /// Defaults for the deterministic-actor (off-policy) updates.
    pub fn off_policy() -> Self {
        Self {
            mass: T::one(),
            dt: T::one(),
            lambda_base: T::one(),
            loss_clamp: Some((T::zero(), T::c(10.0))),
            lambda_clamp: (T::c(0.1), T::c(10.0)),
            ema_beta: T::c(0.99),
            vol_beta: T::c(0.99),
            epsilon: T::c(1e-8),
            mode: VelocityMode::PriceMode,
        }
    }

    /// Defaults for the PPO-style update: fixed weight, no loss clamp.
    pub fn ppo() -> Self {
        Self {
            loss_clamp: None,
            mode: VelocityMode::FeatureMean,
            ..Self::off_policy()
        }
    }

    /// Defaults for the A2C-style update: symmetric clamp, feature-mean
    /// velocities, dynamically scaled weight.
    pub fn a2c() -> Self {
        Self {
            loss_clamp: Some((T::c(-10.0), T::c(10.0))),
            mode: VelocityMode::FeatureMean,
            ..Self::off_policy()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mass <= T::zero() {
            return Err("mass must be positive".into());
        }
        if self.dt <= T::zero() {
            return Err("dt must be positive".into());
        }
        if let Some((lo, hi)) = self.loss_clamp {
            if lo > hi {
                return Err("loss clamp interval is inverted".into());
            }
        }
        if self.lambda_clamp.0 > self.lambda_clamp.1 {
            return Err("lambda clamp interval is inverted".into());
        }
        for (name, b) in [("ema_beta", self.ema_beta), ("vol_beta", self.vol_beta)] {
            if b <= T::zero() || b >= T::one() {
                return Err(format!("{name} must lie strictly inside (0, 1)"));
            }
        }
        if self.epsilon <= T::zero() {
            return Err("epsilon must be positive".into());
        }
        Ok(())
    }
}

/// Exponential moving estimates of a loss stream's mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaTracker<T> {
    pub mean: T,
    pub var: T,
    pub initialized: bool,
}

impl<T: Scalar> Default for EmaTracker<T> {
    fn default() -> Self {
        Self {
            mean: T::zero(),
            var: T::zero(),
            initialized: false,
        }
    }
}

/// mu <- beta mu + (1 - beta) batch_mean, likewise for the variance.
/// The first call seeds both directly from the batch.
pub fn ema_update<T: Scalar>(tracker: &mut EmaTracker<T>, batch_mean: T, batch_var: T, beta: T) {
    if !tracker.initialized {
        tracker.mean = batch_mean;
        tracker.var = batch_var;
        tracker.initialized = true;
    } else {
        tracker.mean = beta * tracker.mean + (T::one() - beta) * batch_mean;
        tracker.var = beta * tracker.var + (T::one() - beta) * batch_var;
    }
    if tracker.var < T::zero() {
        tracker.var = T::zero();
    }
}

/// (value - mu) / sqrt(sigma^2 + eps).
pub fn normalize_loss<T: Scalar>(value: T, tracker: &EmaTracker<T>, epsilon: T) -> T {
    (value - tracker.mean) / (tracker.var + epsilon).sqrt()
}

/// Per-asset returns (batch x assets), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField<T> {
    pub batch: usize,
    pub assets: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> VelocityField<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.assets..(i + 1) * self.assets]
    }
}

/// Guarded relative change (p_next - p) / (p + eps), elementwise.
pub fn velocity<T: Scalar>(
    p_t: &VelocityField<T>,
    p_next: &VelocityField<T>,
    epsilon: T,
) -> Result<VelocityField<T>, PhysicsError> {
    if p_t.batch != p_next.batch || p_t.assets != p_next.assets {
        return Err(PhysicsError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            p_t.batch, p_t.assets, p_next.batch, p_next.assets
        )));
    }
    let values = p_t
        .values
        .iter()
        .zip(&p_next.values)
        .map(|(&p, &q)| (q - p) / (p + epsilon))
        .collect();
    Ok(VelocityField {
        batch: p_t.batch,
        assets: p_t.assets,
        values,
    })
}

/// The one-step form v / dt the agent updates use.
pub fn observed_acceleration<T: Scalar>(v: &VelocityField<T>, dt: T) -> VelocityField<T> {
    VelocityField {
        batch: v.batch,
        assets: v.assets,
        values: v.values.iter().map(|&x| x / dt).collect(),
    }
}

/// Actions as forces: a / m.
pub fn predicted_acceleration<T: Scalar>(actions: &VelocityField<T>, mass: T) -> VelocityField<T> {
    VelocityField {
        batch: actions.batch,
        assets: actions.assets,
        values: actions.values.iter().map(|&a| a / mass).collect(),
    }
}

/// Reduction flavor of [`physics_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Mean over every element.
    Scalar,
    /// Mean over the asset axis only: one value per sample.
    PerSample,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossValue<T> {
    Scalar(T),
    PerSample(Vec<T>),
}

/// Mean squared error between predicted and observed accelerations, with the
/// configured clamp applied to the result.
pub fn physics_loss<T: Scalar>(
    pred: &VelocityField<T>,
    obs: &VelocityField<T>,
    clamp: Option<(T, T)>,
    reduction: Reduction,
) -> Result<LossValue<T>, PhysicsError> {
    if pred.batch != obs.batch || pred.assets != obs.assets {
        return Err(PhysicsError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            pred.batch, pred.assets, obs.batch, obs.assets
        )));
    }
    let apply = |x: T| match clamp {
        Some((lo, hi)) => vecmath::clamp(x, lo, hi),
        None => x,
    };
    match reduction {
        Reduction::Scalar => {
            let mut acc = T::zero();
            for (&p, &o) in pred.values.iter().zip(&obs.values) {
                let d = p - o;
                acc += d * d;
            }
            let mse = acc / T::c(pred.values.len() as f64);
            Ok(LossValue::Scalar(apply(mse)))
        }
        Reduction::PerSample => {
            let mut out = Vec::with_capacity(pred.batch);
            for i in 0..pred.batch {
                let a = pred.row(i);
                let b = obs.row(i);
                let mut acc = T::zero();
                for (&p, &o) in a.iter().zip(b) {
                    let d = p - o;
                    acc += d * d;
                }
                out.push(apply(acc / T::c(pred.assets as f64)));
            }
            Ok(LossValue::PerSample(out))
        }
    }
}

/// lambda = clamp(lambda_base * |actor| / (|mean(phys)| + sqrt(var(phys) + 1e-6)), lo, hi).
pub fn adaptive_lambda<T: Scalar>(
    actor_loss_mean: T,
    phys_norm: &[T],
    lambda_base: T,
    clamp: (T, T),
) -> T {
    let mag_actor = actor_loss_mean.abs();
    let mag_phys = vecmath::mean(phys_norm).abs();
    let var_penalty = (vecmath::variance(phys_norm) + T::c(1e-6)).sqrt();
    vecmath::clamp(lambda_base * mag_actor / (mag_phys + var_penalty), clamp.0, clamp.1)
}

/// EMA of the batch mean of per-sample return std; a volatility-regime
/// diagnostic that is logged, not fed into the loss.
pub fn vol_ema_update<T: Scalar>(current: &mut EmaTracker<T>, v: &VelocityField<T>, vol_beta: T) {
    let mut acc = T::zero();
    for i in 0..v.batch {
        acc += vecmath::std_dev(v.row(i));
    }
    let batch_std = acc / T::c(v.batch.max(1) as f64);
    if !current.initialized {
        current.mean = batch_std;
        current.initialized = true;
    } else {
        current.mean = vol_beta * current.mean + (T::one() - vol_beta) * batch_std;
    }
}

/// Pull the close-price feature (one value per asset) out of a flattened
/// (window x assets x features) state at the last window step.
pub fn last_step_prices<T: Scalar>(
    state: &[T],
    window: usize,
    assets: usize,
    features: usize,
    price_index: usize,
) -> Vec<T> {
    debug_assert_eq!(state.len(), window * assets * features);
    let base = (window - 1) * assets * features;
    (0..assets)
        .map(|i| state[base + i * features + price_index])
        .collect()
}

/// Feature-mean velocities at the last window step: for each sample the raw
/// state difference over dt, averaged over the feature axis per asset.
pub fn feature_mean_velocity<T: Scalar>(
    s_t: &[T],
    s_next: &[T],
    window: usize,
    assets: usize,
    features: usize,
    dt: T,
) -> Vec<T> {
    debug_assert_eq!(s_t.len(), window * assets * features);
    debug_assert_eq!(s_next.len(), s_t.len());
    let base = (window - 1) * assets * features;
    (0..assets)
        .map(|i| {
            let mut acc = T::zero();
            for f in 0..features {
                let idx = base + i * features + f;
                acc += (s_next[idx] - s_t[idx]) / dt;
            }
            acc / T::c(features as f64)
        })
        .collect()
}
