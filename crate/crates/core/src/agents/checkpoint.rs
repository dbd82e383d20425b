//! Agent snapshots: network specs, optimizer moments, EMA trackers and the
//! positions of every random stream, all in one versioned JSON document.

use serde::{Deserialize, Serialize};

use super::optim::AdamState;
use super::{Agent, AgentConfig, AgentError};
use crate::dataset::StateShape;
use crate::kan::{KanNetwork, NetworkSpec};
use crate::physics::EmaTracker;
use crate::rng::{restore_state, save_state, RngState};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub algorithm: String,
    pub shape: StateShape,
    pub actor: NetworkSpec,
    pub critics: Vec<NetworkSpec>,
    pub actor_target: Option<NetworkSpec>,
    pub critic_targets: Vec<NetworkSpec>,
    pub log_std: Vec<f64>,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub actor_ema: EmaTracker<f64>,
    pub phys_ema: EmaTracker<f64>,
    pub vol_ema: EmaTracker<f64>,
    pub update_count: u64,
    pub rng_explore: RngState,
    pub rng_sample: RngState,
    pub rng_noise: RngState,
}

fn tracker_to_f64<T: Scalar>(t: &EmaTracker<T>) -> EmaTracker<f64> {
    EmaTracker {
        mean: t.mean.to_f64_lossy(),
        var: t.var.to_f64_lossy(),
        initialized: t.initialized,
    }
}

fn tracker_from_f64<T: Scalar>(t: &EmaTracker<f64>) -> EmaTracker<T> {
    EmaTracker {
        mean: T::c(t.mean),
        var: T::c(t.var),
        initialized: t.initialized,
    }
}

impl<T: Scalar> Agent<T> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            algorithm: self.cfg.algorithm.name().to_string(),
            shape: self.shape,
            actor: self.actor.to_spec(),
            critics: self.critics.iter().map(|c| c.to_spec()).collect(),
            actor_target: self.actor_target.as_ref().map(|a| a.to_spec()),
            critic_targets: self.critic_targets.iter().map(|c| c.to_spec()).collect(),
            log_std: self.log_std.iter().map(|x| x.to_f64_lossy()).collect(),
            actor_opt: self.actor_opt.state(),
            critic_opt: self.critic_opt.state(),
            actor_ema: tracker_to_f64(&self.actor_ema),
            phys_ema: tracker_to_f64(&self.phys_ema),
            vol_ema: tracker_to_f64(&self.vol_ema),
            update_count: self.update_count,
            rng_explore: save_state(&self.rng_explore),
            rng_sample: save_state(&self.rng_sample),
            rng_noise: save_state(&self.rng_noise),
        }
    }

    /// Rebuild an agent from a snapshot. The configuration must describe
    /// the same algorithm and network layout the snapshot was taken from.
    pub fn from_checkpoint(cfg: AgentConfig, ckpt: &Checkpoint) -> Result<Self, AgentError> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(AgentError::CheckpointShapeMismatch(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        if ckpt.algorithm != cfg.algorithm.name() {
            return Err(AgentError::CheckpointShapeMismatch(format!(
                "checkpoint algorithm '{}' does not match config '{}'",
                ckpt.algorithm,
                cfg.algorithm.name()
            )));
        }
        let mut agent = Agent::new(cfg, ckpt.shape)?;
        let actor = KanNetwork::from_spec(&ckpt.actor)?;
        if actor.in_dim() != agent.actor.in_dim()
            || actor.out_dim() != agent.actor.out_dim()
            || actor.param_count() != agent.actor.param_count()
        {
            return Err(AgentError::CheckpointShapeMismatch(
                "actor network layout differs from the configured one".into(),
            ));
        }
        if ckpt.critics.len() != agent.critics.len()
            || ckpt.critic_targets.len() != agent.critic_targets.len()
            || ckpt.actor_target.is_some() != agent.actor_target.is_some()
            || ckpt.log_std.len() != agent.log_std.len()
        {
            return Err(AgentError::CheckpointShapeMismatch(
                "component counts differ from the configured agent".into(),
            ));
        }
        agent.actor = actor;
        for (slot, spec) in agent.critics.iter_mut().zip(&ckpt.critics) {
            let net = KanNetwork::from_spec(spec)?;
            if net.param_count() != slot.param_count() || net.in_dim() != slot.in_dim() {
                return Err(AgentError::CheckpointShapeMismatch(
                    "critic network layout differs from the configured one".into(),
                ));
            }
            *slot = net;
        }
        if let (Some(slot), Some(spec)) = (agent.actor_target.as_mut(), ckpt.actor_target.as_ref())
        {
            *slot = KanNetwork::from_spec(spec)?;
        }
        for (slot, spec) in agent.critic_targets.iter_mut().zip(&ckpt.critic_targets) {
            *slot = KanNetwork::from_spec(spec)?;
        }
        agent.log_std = ckpt.log_std.iter().map(|&x| T::c(x)).collect();
        if ckpt.actor_opt.m.len() != agent.actor_opt.n_params()
            || ckpt.critic_opt.m.len() != agent.critic_opt.n_params()
        {
            return Err(AgentError::CheckpointShapeMismatch(
                "optimizer state size differs from the configured agent".into(),
            ));
        }
        agent.actor_opt.restore(&ckpt.actor_opt);
        agent.critic_opt.restore(&ckpt.critic_opt);
        agent.actor_ema = tracker_from_f64(&ckpt.actor_ema);
        agent.phys_ema = tracker_from_f64(&ckpt.phys_ema);
        agent.vol_ema = tracker_from_f64(&ckpt.vol_ema);
        agent.update_count = ckpt.update_count;
        agent.rng_explore = restore_state(&ckpt.rng_explore);
        agent.rng_sample = restore_state(&ckpt.rng_sample);
        agent.rng_noise = restore_state(&ckpt.rng_noise);
        Ok(agent)
    }
}
