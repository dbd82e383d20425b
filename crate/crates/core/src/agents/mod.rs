//! The four physics-informed actor-critic agents plus their vanilla
//! counterparts, acting through KAN policies on the trading environment.
//!
//! Vanilla variants run the same code paths with the physics branch
//! disabled, so a PINN agent with physics off reproduces its vanilla twin
//! bit for bit under the same seed.

mod a2c;
mod buffers;
mod checkpoint;
mod ddpg;
mod optim;
mod policy;
mod ppo;
mod td3;
#[cfg(test)]
mod tests;
mod train;

pub use buffers::{compute_gae, ReplayBuffer, RolloutBuffer, RolloutStep, Transition};
pub use checkpoint::Checkpoint;
pub use optim::{clip_grad_norm, Adam, AdamState};
pub use policy::{
    entropy_loss, gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grads, softmax_vjp,
};
pub use train::{evaluate, train, EvalSummary, TrainLog, TrainLogRow, TrainOptions, TrainResult};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::StateShape;
use crate::env::{project_to_simplex, EnvError, WeightVector};
use crate::kan::{KanConfig, KanError, KanNetwork};
use crate::physics::{EmaTracker, PhysicsConfig};
use crate::rng::{standard_normal, substream};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer too small: need {required}, got {got}")]
    BufferTooSmall { required: usize, got: usize },
    #[error("rollout buffer is empty")]
    EmptyRollout,
    #[error("sequence length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("checkpoint does not match the requested agent: {0}")]
    CheckpointShapeMismatch(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kan(#[from] KanError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ddpg,
    DdpgPinn,
    Td3,
    Td3Pinn,
    Ppo,
    PpoPinn,
    A2c,
    A2cPinn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Ddpg,
        Algorithm::DdpgPinn,
        Algorithm::Td3,
        Algorithm::Td3Pinn,
        Algorithm::Ppo,
        Algorithm::PpoPinn,
        Algorithm::A2c,
        Algorithm::A2cPinn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::DdpgPinn => "ddpg_pinn",
            Algorithm::Td3 => "td3",
            Algorithm::Td3Pinn => "td3_pinn",
            Algorithm::Ppo => "ppo",
            Algorithm::PpoPinn => "ppo_pinn",
            Algorithm::A2c => "a2c",
            Algorithm::A2cPinn => "a2c_pinn",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_pinn(&self) -> bool {
        matches!(
            self,
            Algorithm::DdpgPinn | Algorithm::Td3Pinn | Algorithm::PpoPinn | Algorithm::A2cPinn
        )
    }

    pub fn is_off_policy(&self) -> bool {
        matches!(
            self,
            Algorithm::Ddpg | Algorithm::DdpgPinn | Algorithm::Td3 | Algorithm::Td3Pinn
        )
    }

    fn n_critics(&self) -> usize {
        match self {
            Algorithm::Td3 | Algorithm::Td3Pinn => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Hidden layer widths of every KAN in the agent.
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Discount factor, in [0, 1).
    pub gamma: f64,
    /// Polyak rate, in (0, 1].
    pub tau: f64,
    pub policy_delay: usize,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub exploration_noise: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_starts: usize,
    /// Rollout length for the on-policy agents.
    pub n_steps: usize,
    pub n_epochs: usize,
    pub minibatch_size: usize,
    pub clip_ratio: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub clip_vf: Option<f64>,
    pub target_kl: Option<f64>,
    pub gae_lambda: f64,
    pub normalize_advantage: bool,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub physics: PhysicsConfig<f64>,
    pub kan: KanConfig,
    pub seed: u64,
}

impl AgentConfig {
    pub fn defaults_for(algorithm: Algorithm) -> Self {
        let physics = match algorithm {
            Algorithm::Ppo | Algorithm::PpoPinn => PhysicsConfig::ppo(),
            Algorithm::A2c | Algorithm::A2cPinn => PhysicsConfig::a2c(),
            _ => PhysicsConfig::off_policy(),
        };
        Self {
            algorithm,
            hidden: vec![16],
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            policy_delay: match algorithm {
                Algorithm::Td3 | Algorithm::Td3Pinn => 2,
                _ => 1,
            },
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            batch_size: 64,
            buffer_capacity: 100_000,
            learning_starts: 64,
            n_steps: 64,
            n_epochs: 10,
            minibatch_size: 32,
            clip_ratio: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.0,
            clip_vf: None,
            target_kl: match algorithm {
                Algorithm::Ppo | Algorithm::PpoPinn => Some(0.03),
                _ => None,
            },
            gae_lambda: 0.95,
            normalize_advantage: true,
            max_grad_norm: 10.0,
            init_log_std: 0.0,
            physics,
            kan: KanConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(AgentError::InvalidConfig("tau must lie in (0, 1]".into()));
        }
        if self.policy_delay == 0 {
            return Err(AgentError::InvalidConfig("policy_delay must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(AgentError::InvalidConfig("batch_size must be at least 2".into()));
        }
        if self.minibatch_size == 0 || self.n_steps == 0 || self.n_epochs == 0 {
            return Err(AgentError::InvalidConfig(
                "rollout and minibatch sizes must be positive".into(),
            ));
        }
        self.physics
            .validate()
            .map_err(AgentError::InvalidConfig)?;
        Ok(())
    }
}

/// What [`Agent::act`] produced: the executed allocation plus the raw
/// pre-softmax sample and, for the stochastic policies, its log-probability
/// and the value estimate at collection time.
#[derive(Debug, Clone)]
pub struct ActOutput<T> {
    pub weights: WeightVector<T>,
    pub raw: Vec<T>,
    pub log_prob: Option<T>,
    pub value: Option<T>,
}

/// A complete learner: networks, targets, optimizers, EMA trackers and the
/// named random streams everything draws from.
pub struct Agent<T: Scalar> {
    pub cfg: AgentConfig,
    pub shape: StateShape,
    pub physics: PhysicsConfig<T>,
    pub actor: KanNetwork<T>,
    pub critics: Vec<KanNetwork<T>>,
    pub actor_target: Option<KanNetwork<T>>,
    pub critic_targets: Vec<KanNetwork<T>>,
    pub log_std: Vec<T>,
    pub(crate) actor_opt: Adam<T>,
    pub(crate) critic_opt: Adam<T>,
    pub actor_ema: EmaTracker<T>,
    pub phys_ema: EmaTracker<T>,
    pub vol_ema: EmaTracker<T>,
    pub update_count: u64,
    pub(crate) rng_explore: ChaCha8Rng,
    pub(crate) rng_sample: ChaCha8Rng,
    pub(crate) rng_noise: ChaCha8Rng,
}

impl<T: Scalar> Agent<T> {
    pub fn new(cfg: AgentConfig, shape: StateShape) -> Result<Self, AgentError> {
        cfg.validate()?;
        if shape.features <= crate::marketdata::PRICE_FEATURE_INDEX {
            return Err(AgentError::InvalidConfig(format!(
                "state needs more than {} features to carry a close-price column",
                crate::marketdata::PRICE_FEATURE_INDEX
            )));
        }
        let mut rng_init = substream(cfg.seed, "init");
        let flat = shape.flat_len();
        let m = shape.assets;
        let off_policy = cfg.algorithm.is_off_policy();

        let mut actor_dims = vec![flat];
        actor_dims.extend_from_slice(&cfg.hidden);
        actor_dims.push(m);
        let critic_in = if off_policy { flat + m } else { flat };
        let mut critic_dims = vec![critic_in];
        critic_dims.extend_from_slice(&cfg.hidden);
        critic_dims.push(1);

        let actor = KanNetwork::new(&actor_dims, &cfg.kan, &mut rng_init);
        let critics: Vec<KanNetwork<T>> = (0..cfg.algorithm.n_critics())
            .map(|_| KanNetwork::new(&critic_dims, &cfg.kan, &mut rng_init))
            .collect();
        let (actor_target, critic_targets) = if off_policy {
            (Some(actor.clone()), critics.clone())
        } else {
            (None, Vec::new())
        };
        let log_std = if off_policy {
            Vec::new()
        } else {
            vec![T::c(cfg.init_log_std); m]
        };

        let actor_group = actor.param_count() + log_std.len()
            + if off_policy { 0 } else { critics[0].param_count() };
        let critic_group: usize = if off_policy {
            critics.iter().map(|c| c.param_count()).sum()
        } else {
            0
        };
        let agent = Self {
            physics: cast_physics(&cfg.physics),
            actor_opt: Adam::new(T::c(cfg.actor_lr), actor_group),
            critic_opt: Adam::new(T::c(cfg.critic_lr), critic_group),
            actor_ema: EmaTracker::default(),
            phys_ema: EmaTracker::default(),
            vol_ema: EmaTracker::default(),
            update_count: 0,
            rng_explore: substream(cfg.seed, "exploration"),
            rng_sample: substream(cfg.seed, "sampling"),
            rng_noise: substream(cfg.seed, "target-noise"),
            actor,
            critics,
            actor_target,
            critic_targets,
            log_std,
            cfg,
            shape,
        };
        Ok(agent)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.cfg.algorithm
    }

    pub fn n_assets(&self) -> usize {
        self.shape.assets
    }

    /// Produce an allocation for a flattened state. Deterministic when
    /// `explore` is false (no random draws).
    pub fn act(&mut self, state: &[T], explore: bool) -> Result<ActOutput<T>, AgentError> {
        let mut raw = self.actor.forward(state)?;
        if self.cfg.algorithm.is_off_policy() {
            if explore {
                let std = T::c(self.cfg.exploration_noise);
                for r in raw.iter_mut() {
                    *r += std * standard_normal::<T>(&mut self.rng_explore);
                }
            }
            Ok(ActOutput {
                weights: project_to_simplex(&raw),
                raw,
                log_prob: None,
                value: None,
            })
        } else {
            let mu = raw.clone();
            if explore {
                for (r, &ls) in raw.iter_mut().zip(&self.log_std) {
                    *r += ls.exp() * standard_normal::<T>(&mut self.rng_explore);
                }
            }
            let log_prob = policy::gaussian_log_prob(&raw, &mu, &self.log_std);
            let value = self.critics[0].forward(state)?[0];
            Ok(ActOutput {
                weights: project_to_simplex(&raw),
                raw,
                log_prob: Some(log_prob),
                value: Some(value),
            })
        }
    }

    /// Value estimate for bootstrapping rollout tails.
    pub fn value_of(&self, state: &[T]) -> Result<T, AgentError> {
        Ok(self.critics[0].forward(state)?[0])
    }

    /// theta_target <- tau * theta_online + (1 - tau) * theta_target.
    pub(crate) fn polyak_actor(&mut self) {
        let tau = T::c(self.cfg.tau);
        if let Some(target) = self.actor_target.as_mut() {
            target.zip_params_mut(&self.actor, |t, o| *t = tau * o + (T::one() - tau) * *t);
        }
    }

    pub(crate) fn polyak_critics(&mut self) {
        let tau = T::c(self.cfg.tau);
        for (target, online) in self.critic_targets.iter_mut().zip(&self.critics) {
            target.zip_params_mut(online, |t, o| *t = tau * o + (T::one() - tau) * *t);
        }
    }

    // --- flat parameter groups for the optimizers --------------------------

    pub(crate) fn actor_group_export(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.actor.export_params(&mut out);
        if !self.cfg.algorithm.is_off_policy() {
            let mut tail = Vec::new();
            self.critics[0].export_params(&mut tail);
            out.extend_from_slice(&tail);
            out.extend_from_slice(&self.log_std);
        }
        out
    }

    pub(crate) fn actor_group_import(&mut self, params: &[T]) {
        let na = self.actor.param_count();
        self.actor.import_params(&params[..na]);
        if !self.cfg.algorithm.is_off_policy() {
            let nc = self.critics[0].param_count();
            self.critics[0].import_params(&params[na..na + nc]);
            self.log_std.copy_from_slice(&params[na + nc..]);
        }
    }

    pub(crate) fn critic_group_export(&self) -> Vec<T> {
        let mut out = Vec::new();
        let mut tmp = Vec::new();
        for c in &self.critics {
            c.export_params(&mut tmp);
            out.extend_from_slice(&tmp);
        }
        out
    }

    pub(crate) fn critic_group_import(&mut self, params: &[T]) {
        let mut offset = 0;
        for c in self.critics.iter_mut() {
            let n = c.param_count();
            c.import_params(&params[offset..offset + n]);
            offset += n;
        }
    }

    /// Apply one Adam step with global-norm clipping to the actor group.
    pub(crate) fn step_actor(&mut self, mut grads: Vec<T>) {
        clip_grad_norm(&mut grads, T::c(self.cfg.max_grad_norm));
        let mut params = self.actor_group_export();
        self.actor_opt.step(&mut params, &grads);
        self.actor_group_import(&params);
    }

    pub(crate) fn step_critics(&mut self, mut grads: Vec<T>) {
        clip_grad_norm(&mut grads, T::c(self.cfg.max_grad_norm));
        let mut params = self.critic_group_export();
        self.critic_opt.step(&mut params, &grads);
        self.critic_group_import(&params);
    }

    /// Dispatch one gradient update for the off-policy agents.
    pub fn update_off_policy(
        &mut self,
        buffer: &ReplayBuffer<T>,
    ) -> Result<UpdateMetrics, AgentError> {
        match self.cfg.algorithm {
            Algorithm::Ddpg | Algorithm::DdpgPinn => self.ddpg_update(buffer),
            Algorithm::Td3 | Algorithm::Td3Pinn => self.td3_update(buffer),
            _ => Err(AgentError::InvalidConfig(
                "update_off_policy called on an on-policy agent".into(),
            )),
        }
    }

    /// Dispatch the update phase for the on-policy agents; returns one
    /// metrics row per gradient step.
    pub fn update_on_policy(
        &mut self,
        rollout: &RolloutBuffer<T>,
    ) -> Result<Vec<UpdateMetrics>, AgentError> {
        match self.cfg.algorithm {
            Algorithm::Ppo | Algorithm::PpoPinn => self.ppo_update(rollout),
            Algorithm::A2c | Algorithm::A2cPinn => Ok(vec![self.a2c_update(rollout)?]),
            _ => Err(AgentError::InvalidConfig(
                "update_on_policy called on an off-policy agent".into(),
            )),
        }
    }
}

pub(crate) fn cast_physics<T: Scalar>(p: &PhysicsConfig<f64>) -> PhysicsConfig<T> {
    PhysicsConfig {
        mass: T::c(p.mass),
        dt: T::c(p.dt),
        lambda_base: T::c(p.lambda_base),
        loss_clamp: p.loss_clamp.map(|(a, b)| (T::c(a), T::c(b))),
        lambda_clamp: (T::c(p.lambda_clamp.0), T::c(p.lambda_clamp.1)),
        ema_beta: T::c(p.ema_beta),
        vol_beta: T::c(p.vol_beta),
        epsilon: T::c(p.epsilon),
        mode: p.mode,
    }
}

/// Per-update diagnostics; fields stay empty where an algorithm does not
/// produce them (for example actor metrics on TD3's non-delay steps).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateMetrics {
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy_loss: Option<f64>,
    pub physics_raw: Option<f64>,
    pub physics_norm: Option<f64>,
    pub lambda: Option<f64>,
    pub vol_ema: Option<f64>,
    pub approx_kl: Option<f64>,
}

mod offpolicy_shared {
    use super::*;
    use crate::physics::{self, Reduction, VelocityField};
    use crate::vecmath;

    /// Everything the DDPG/TD3 actor update shares: EMA-normalized actor
    /// loss on Q1, the Newtonian physics branch, and the assembled actor
    /// gradient. `reduction` picks the per-algorithm loss shape.
    pub(crate) struct ActorPhysicsOutcome {
        pub actor_loss: f64,
        pub physics_raw: Option<f64>,
        pub physics_norm: Option<f64>,
        pub lambda: Option<f64>,
        pub vol_ema: Option<f64>,
    }

    impl<T: Scalar> Agent<T> {
        /// Extract (batch x assets) close prices at the last window step.
        fn last_step_close_matrix(&self, states: &[&[T]]) -> VelocityField<T> {
            let mut values = Vec::with_capacity(states.len() * self.shape.assets);
            for s in states {
                values.extend(physics::last_step_prices(
                    s,
                    self.shape.window,
                    self.shape.assets,
                    self.shape.features,
                    crate::marketdata::PRICE_FEATURE_INDEX,
                ));
            }
            VelocityField {
                batch: states.len(),
                assets: self.shape.assets,
                values,
            }
        }

        pub(crate) fn actor_physics_update(
            &mut self,
            states: &[&[T]],
            next_states: &[&[T]],
            reduction: Reduction,
        ) -> Result<ActorPhysicsOutcome, AgentError> {
            let (grads, outcome) = self.actor_physics_gradients(states, next_states, reduction)?;
            self.step_actor(grads);
            Ok(outcome)
        }

        /// Gradient assembly without the optimizer step; EMA trackers are
        /// still advanced in their usual order.
        pub(crate) fn actor_physics_gradients(
            &mut self,
            states: &[&[T]],
            next_states: &[&[T]],
            reduction: Reduction,
        ) -> Result<(Vec<T>, ActorPhysicsOutcome), AgentError> {
            let batch = states.len();
            let b = T::c(batch as f64);
            let m = self.shape.assets;
            let pinn = self.cfg.algorithm.is_pinn();
            let eps = self.physics.epsilon;

            // forward passes with caches
            let mut actor_caches = Vec::with_capacity(batch);
            let mut critic_caches = Vec::with_capacity(batch);
            let mut actions = Vec::with_capacity(batch);
            let mut q1 = Vec::with_capacity(batch);
            for s in states {
                let (raw, a_cache) = self.actor.forward_cached(s)?;
                let a = vecmath::softmax(&raw);
                let mut critic_in = s.to_vec();
                critic_in.extend_from_slice(&a);
                let (q, c_cache) = self.critics[0].forward_cached(&critic_in)?;
                actor_caches.push(a_cache);
                critic_caches.push(c_cache);
                actions.push(a);
                q1.push(q[0]);
            }

            // EMA updates come first: actor EMA from Q1, then volatility, then physics
            physics::ema_update(
                &mut self.actor_ema,
                vecmath::mean(&q1),
                vecmath::variance(&q1),
                self.physics.ema_beta,
            );
            let actor_denom = (self.actor_ema.var + eps).sqrt();
            let actor_losses: Vec<T> = q1
                .iter()
                .map(|&q| -(q - self.actor_ema.mean) / actor_denom)
                .collect();
            let actor_loss_mean = vecmath::mean(&actor_losses);

            // physics branch
            let mut phys_grad: Option<Vec<T>> = None; // dL/d action, batch-major
            let mut outcome = ActorPhysicsOutcome {
                actor_loss: actor_loss_mean.to_f64_lossy(),
                physics_raw: None,
                physics_norm: None,
                lambda: None,
                vol_ema: None,
            };
            if pinn {
                let p_t = self.last_step_close_matrix(states);
                let p_next = self.last_step_close_matrix(next_states);
                let v = physics::velocity(&p_t, &p_next, eps)
                    .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
                physics::vol_ema_update(&mut self.vol_ema, &v, self.physics.vol_beta);
                let alpha = physics::observed_acceleration(&v, self.physics.dt);
                let action_field = VelocityField {
                    batch,
                    assets: m,
                    values: actions.iter().flatten().copied().collect(),
                };
                let alpha_hat = physics::predicted_acceleration(&action_field, self.physics.mass);
                let loss = physics::physics_loss(
                    &alpha_hat,
                    &alpha,
                    self.physics.loss_clamp,
                    reduction,
                )
                .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;

                let beta = self.physics.ema_beta;
                let lam_denom;
                let (raw_mean, norm_for_lambda): (T, Vec<T>) = match &loss {
                    physics::LossValue::Scalar(raw) => {
                        physics::ema_update(&mut self.phys_ema, *raw, T::zero(), beta);
                        lam_denom = (self.phys_ema.var + eps).sqrt();
                        let norm = (*raw - self.phys_ema.mean) / lam_denom;
                        (*raw, vec![norm])
                    }
                    physics::LossValue::PerSample(raws) => {
                        physics::ema_update(
                            &mut self.phys_ema,
                            vecmath::mean(raws),
                            vecmath::variance(raws),
                            beta,
                        );
                        lam_denom = (self.phys_ema.var + eps).sqrt();
                        let norm: Vec<T> = raws
                            .iter()
                            .map(|&r| (r - self.phys_ema.mean) / lam_denom)
                            .collect();
                        (vecmath::mean(raws), norm)
                    }
                };
                let lambda = physics::adaptive_lambda(
                    actor_loss_mean,
                    &norm_for_lambda,
                    self.physics.lambda_base,
                    self.physics.lambda_clamp,
                );
                outcome.physics_raw = Some(raw_mean.to_f64_lossy());
                outcome.physics_norm = Some(vecmath::mean(&norm_for_lambda).to_f64_lossy());
                outcome.lambda = Some(lambda.to_f64_lossy());
                outcome.vol_ema = Some(self.vol_ema.mean.to_f64_lossy());

                // gradient of lambda * mean(norm) w.r.t. each action entry;
                // clamped samples contribute nothing
                let mut grad = vec![T::zero(); batch * m];
                let pass = |raw: T| -> bool {
                    match self.physics.loss_clamp {
                        Some((lo, hi)) => raw >= lo && raw <= hi,
                        None => true,
                    }
                };
                match &loss {
                    physics::LossValue::Scalar(_) => {
                        let raw_unclamped = {
                            // recompute unclamped MSE to decide the clamp gate
                            let mut acc = T::zero();
                            for (p, o) in alpha_hat.values.iter().zip(&alpha.values) {
                                let d = *p - *o;
                                acc += d * d;
                            }
                            acc / T::c((batch * m) as f64)
                        };
                        if pass(raw_unclamped) {
                            let scale = lambda / lam_denom * T::c(2.0)
                                / (b * T::c(m as f64) * self.physics.mass);
                            for i in 0..batch * m {
                                grad[i] = scale * (alpha_hat.values[i] - alpha.values[i]);
                            }
                        }
                    }
                    physics::LossValue::PerSample(_) => {
                        for s in 0..batch {
                            let mut acc = T::zero();
                            for i in 0..m {
                                let d = alpha_hat.values[s * m + i] - alpha.values[s * m + i];
                                acc += d * d;
                            }
                            let raw_s = acc / T::c(m as f64);
                            if pass(raw_s) {
                                let scale = lambda / (b * lam_denom) * T::c(2.0)
                                    / (T::c(m as f64) * self.physics.mass);
                                for i in 0..m {
                                    let idx = s * m + i;
                                    grad[idx] =
                                        scale * (alpha_hat.values[idx] - alpha.values[idx]);
                                }
                            }
                        }
                    }
                }
                phys_grad = Some(grad);
            }

            // assemble actor gradients
            let mut actor_grads = vec![T::zero(); self.actor.param_count()];
            let dq = -T::one() / (b * actor_denom);
            for s in 0..batch {
                let input_grad = self.critics[0].backward(&critic_caches[s], &[dq], None)?;
                let state_len = states[s].len();
                let mut g_action: Vec<T> = input_grad[state_len..].to_vec();
                if let Some(pg) = &phys_grad {
                    for i in 0..m {
                        g_action[i] += pg[s * m + i];
                    }
                }
                let g_raw = policy::softmax_vjp(&actions[s], &g_action);
                self.actor
                    .backward(&actor_caches[s], &g_raw, Some(&mut actor_grads))?;
            }
            Ok((actor_grads, outcome))
        }
    }
}
