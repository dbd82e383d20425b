//! Deterministic-policy update with a single critic: one-step TD critic
//! regression plus the EMA-normalized actor objective and, in PINN mode,
//! the Newtonian physics term with adaptive weighting.

use super::{Agent, AgentError, ReplayBuffer, Transition, UpdateMetrics};
use crate::physics::Reduction;
use crate::scalar::Scalar;
use crate::vecmath;

impl<T: Scalar> Agent<T> {
    pub(crate) fn ddpg_update(
        &mut self,
        buffer: &ReplayBuffer<T>,
    ) -> Result<UpdateMetrics, AgentError> {
        let idx = buffer.sample_indices(self.cfg.batch_size, &mut self.rng_sample)?;
        let batch: Vec<&Transition<T>> = idx.iter().map(|&i| buffer.get(i)).collect();
        let critic_loss = self.ddpg_critic_update(&batch)?;
        self.update_count += 1;

        let mut metrics = UpdateMetrics {
            critic_loss: Some(critic_loss),
            ..Default::default()
        };
        if self.update_count % self.cfg.policy_delay as u64 == 0 {
            let states: Vec<&[T]> = batch.iter().map(|t| t.state.as_slice()).collect();
            let next_states: Vec<&[T]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
            let out = self.actor_physics_update(&states, &next_states, Reduction::Scalar)?;
            metrics.actor_loss = Some(out.actor_loss);
            metrics.physics_raw = out.physics_raw;
            metrics.physics_norm = out.physics_norm;
            metrics.lambda = out.lambda;
            metrics.vol_ema = out.vol_ema;
        }
        // both targets drift every gradient step
        self.polyak_critics();
        self.polyak_actor();
        Ok(metrics)
    }

    fn ddpg_critic_update(&mut self, batch: &[&Transition<T>]) -> Result<f64, AgentError> {
        let b = T::c(batch.len() as f64);
        let gamma = T::c(self.cfg.gamma);
        let group: usize = self.critics.iter().map(|c| c.param_count()).sum();
        let mut grads = vec![T::zero(); group];
        let mut loss = T::zero();
        for tr in batch {
            let raw_next = self
                .actor_target
                .as_ref()
                .expect("off-policy agent has an actor target")
                .forward(&tr.next_state)?;
            let a_next = vecmath::softmax(&raw_next);
            let mut target_in = tr.next_state.clone();
            target_in.extend_from_slice(&a_next);
            let q_next = self.critic_targets[0].forward(&target_in)?[0];
            let not_done = if tr.done { T::zero() } else { T::one() };
            let y = tr.reward + gamma * not_done * q_next;

            let mut online_in = tr.state.clone();
            online_in.extend_from_slice(&tr.action);
            let (q, cache) = self.critics[0].forward_cached(&online_in)?;
            let diff = q[0] - y;
            loss += diff * diff / b;
            self.critics[0]
                .backward(&cache, &[T::c(2.0) * diff / b], Some(&mut grads))?;
        }
        self.step_critics(grads);
        Ok(loss.to_f64_lossy())
    }
}
