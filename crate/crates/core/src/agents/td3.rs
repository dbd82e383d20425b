//! Twin-critic delayed update: min-twin TD targets with clipped target
//! noise, actor and physics branch gated on the policy delay, per-sample
//! physics reduction before EMA normalization.

use super::{Agent, AgentError, ReplayBuffer, Transition, UpdateMetrics};
use crate::physics::Reduction;
use crate::rng::standard_normal;
use crate::scalar::Scalar;
use crate::vecmath;

impl<T: Scalar> Agent<T> {
    pub(crate) fn td3_update(
        &mut self,
        buffer: &ReplayBuffer<T>,
    ) -> Result<UpdateMetrics, AgentError> {
        let idx = buffer.sample_indices(self.cfg.batch_size, &mut self.rng_sample)?;
        let batch: Vec<&Transition<T>> = idx.iter().map(|&i| buffer.get(i)).collect();
        let critic_loss = self.td3_critic_update(&batch)?;
        // critic targets drift every step; the actor side only on delay hits
        self.polyak_critics();
        self.update_count += 1;

        let mut metrics = UpdateMetrics {
            critic_loss: Some(critic_loss),
            ..Default::default()
        };
        if self.update_count % self.cfg.policy_delay as u64 == 0 {
            let states: Vec<&[T]> = batch.iter().map(|t| t.state.as_slice()).collect();
            let next_states: Vec<&[T]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
            let out = self.actor_physics_update(&states, &next_states, Reduction::PerSample)?;
            metrics.actor_loss = Some(out.actor_loss);
            metrics.physics_raw = out.physics_raw;
            metrics.physics_norm = out.physics_norm;
            metrics.lambda = out.lambda;
            metrics.vol_ema = out.vol_ema;
            self.polyak_actor();
        }
        Ok(metrics)
    }

    fn td3_critic_update(&mut self, batch: &[&Transition<T>]) -> Result<f64, AgentError> {
        let b = T::c(batch.len() as f64);
        let gamma = T::c(self.cfg.gamma);
        let noise_std = T::c(self.cfg.target_noise_std);
        let noise_clip = T::c(self.cfg.target_noise_clip);
        let n0 = self.critics[0].param_count();
        let n1 = self.critics[1].param_count();
        let mut grads = vec![T::zero(); n0 + n1];
        let mut loss = T::zero();
        for tr in batch {
            // target-policy smoothing on the raw logits, then softmax
            let mut raw_next = self
                .actor_target
                .as_ref()
                .expect("off-policy agent has an actor target")
                .forward(&tr.next_state)?;
            for r in raw_next.iter_mut() {
                let noise = vecmath::clamp(
                    noise_std * standard_normal::<T>(&mut self.rng_noise),
                    -noise_clip,
                    noise_clip,
                );
                *r += noise;
            }
            let a_next = vecmath::softmax(&raw_next);
            let mut target_in = tr.next_state.clone();
            target_in.extend_from_slice(&a_next);
            let q1t = self.critic_targets[0].forward(&target_in)?[0];
            let q2t = self.critic_targets[1].forward(&target_in)?[0];
            let q_min = q1t.min(q2t);
            let not_done = if tr.done { T::zero() } else { T::one() };
            let y = tr.reward + gamma * not_done * q_min;

            let mut online_in = tr.state.clone();
            online_in.extend_from_slice(&tr.action);
            for (ci, offset, len) in [(0usize, 0usize, n0), (1, n0, n1)] {
                let (q, cache) = self.critics[ci].forward_cached(&online_in)?;
                let diff = q[0] - y;
                loss += diff * diff / b;
                self.critics[ci].backward(
                    &cache,
                    &[T::c(2.0) * diff / b],
                    Some(&mut grads[offset..offset + len]),
                )?;
            }
        }
        self.step_critics(grads);
        Ok(loss.to_f64_lossy())
    }
}
