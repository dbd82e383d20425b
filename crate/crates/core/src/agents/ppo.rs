//! Clipped-surrogate update over shuffled minibatches with GAE advantages,
//! optional value clipping, entropy bonus, KL early stopping, and a fixed
//! physics weight computed from state-difference velocities.

use rand::RngExt;

use super::policy::{
    entropy_loss, gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grads,
};
use super::{Agent, AgentError, RolloutBuffer, UpdateMetrics};
use crate::physics::{self, VelocityField};
use crate::scalar::Scalar;
use crate::vecmath;

impl<T: Scalar> Agent<T> {
    pub(crate) fn ppo_update(
        &mut self,
        rollout: &RolloutBuffer<T>,
    ) -> Result<Vec<UpdateMetrics>, AgentError> {
        if rollout.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        assert!(rollout.is_prepared(), "advantages must be computed first");
        let n = rollout.len();
        let mut rows = Vec::new();
        'epochs: for _epoch in 0..self.cfg.n_epochs {
            let mut perm: Vec<usize> = (0..n).collect();
            for k in 0..n.saturating_sub(1) {
                let j = k + self.rng_sample.random_range(0..n - k);
                perm.swap(k, j);
            }
            for chunk in perm.chunks(self.cfg.minibatch_size) {
                let (metrics, kl_breach) = self.ppo_minibatch(rollout, chunk)?;
                if kl_breach {
                    // stop without applying this minibatch
                    break 'epochs;
                }
                self.update_count += 1;
                rows.push(metrics);
            }
        }
        Ok(rows)
    }

    fn ppo_minibatch(
        &mut self,
        rollout: &RolloutBuffer<T>,
        chunk: &[usize],
    ) -> Result<(UpdateMetrics, bool), AgentError> {
        let b = chunk.len();
        let bf = T::c(b as f64);
        let eps_clip = T::c(self.cfg.clip_ratio);
        let steps = rollout.steps();

        let adv_raw: Vec<T> = chunk.iter().map(|&i| rollout.advantages()[i]).collect();
        let adv = if self.cfg.normalize_advantage && b > 1 {
            let m = vecmath::mean(&adv_raw);
            let s = vecmath::std_dev(&adv_raw);
            adv_raw
                .iter()
                .map(|&a| (a - m) / (s + T::c(1e-8)))
                .collect()
        } else {
            adv_raw
        };

        // policy evaluation pass
        let mut mus = Vec::with_capacity(b);
        let mut actor_caches = Vec::with_capacity(b);
        let mut values = Vec::with_capacity(b);
        let mut critic_caches = Vec::with_capacity(b);
        let mut log_probs = Vec::with_capacity(b);
        let mut ratios = Vec::with_capacity(b);
        for &i in chunk {
            let step = &steps[i];
            let (mu, a_cache) = self.actor.forward_cached(&step.state)?;
            let (v, c_cache) = self.critics[0].forward_cached(&step.state)?;
            let logp = gaussian_log_prob(&step.raw_action, &mu, &self.log_std);
            ratios.push((logp - step.log_prob).exp());
            log_probs.push(logp);
            mus.push(mu);
            actor_caches.push(a_cache);
            values.push(v[0]);
            critic_caches.push(c_cache);
        }

        // approximate KL gate, checked before the update is applied
        let kl_terms: Vec<T> = ratios
            .iter()
            .zip(&log_probs)
            .zip(chunk)
            .map(|((&r, &lp), &i)| (r - T::one()) - (lp - steps[i].log_prob))
            .collect();
        let approx_kl = vecmath::mean(&kl_terms);
        if let Some(target_kl) = self.cfg.target_kl {
            if approx_kl.to_f64_lossy() > 1.5 * target_kl {
                return Ok((
                    UpdateMetrics {
                        approx_kl: Some(approx_kl.to_f64_lossy()),
                        ..Default::default()
                    },
                    true,
                ));
            }
        }

        // losses
        let mut policy_terms = Vec::with_capacity(b);
        for s in 0..b {
            let u1 = ratios[s] * adv[s];
            let u2 = vecmath::clamp(ratios[s], T::one() - eps_clip, T::one() + eps_clip) * adv[s];
            policy_terms.push(u1.min(u2));
        }
        let policy_loss = -vecmath::mean(&policy_terms);

        let mut value_terms = Vec::with_capacity(b);
        let mut value_used = Vec::with_capacity(b);
        for (s, &i) in chunk.iter().enumerate() {
            let ret = rollout.returns()[i];
            let v_used = match self.cfg.clip_vf {
                Some(eps_vf) => {
                    let old_v = steps[i].value;
                    old_v + vecmath::clamp(values[s] - old_v, T::c(-eps_vf), T::c(eps_vf))
                }
                None => values[s],
            };
            let d = v_used - ret;
            value_terms.push(d * d);
            value_used.push(v_used);
        }
        let value_loss = vecmath::mean(&value_terms);

        let entropies: Vec<T> = (0..b).map(|_| gaussian_entropy(&self.log_std)).collect();
        let ent_loss = entropy_loss(Some(&entropies), &log_probs);

        // fixed-weight physics term from stored transitions; actions come
        // from the buffer so it shifts the reported loss, not the gradient
        let mut physics_raw = None;
        let mut vol = None;
        if self.cfg.algorithm.is_pinn() {
            let m = self.shape.assets;
            let mut alpha = Vec::with_capacity(b * m);
            let mut actions = Vec::with_capacity(b * m);
            for &i in chunk {
                let step = &steps[i];
                alpha.extend(physics::feature_mean_velocity(
                    &step.state,
                    &step.next_state,
                    self.shape.window,
                    self.shape.assets,
                    self.shape.features,
                    self.physics.dt,
                ));
                actions.extend_from_slice(&step.action);
            }
            let alpha_field = VelocityField {
                batch: b,
                assets: m,
                values: alpha,
            };
            physics::vol_ema_update(&mut self.vol_ema, &alpha_field, self.physics.vol_beta);
            let action_field = VelocityField {
                batch: b,
                assets: m,
                values: actions,
            };
            let raw = match physics::physics_loss(
                &action_field,
                &alpha_field,
                self.physics.loss_clamp,
                physics::Reduction::Scalar,
            ) {
                Ok(physics::LossValue::Scalar(v)) => v,
                _ => unreachable!("scalar reduction"),
            };
            physics_raw = Some(raw.to_f64_lossy());
            vol = Some(self.vol_ema.mean.to_f64_lossy());
        }

        // gradient assembly over the joint [actor | critic | log_std] group
        let na = self.actor.param_count();
        let nc = self.critics[0].param_count();
        let mut grads = vec![T::zero(); na + nc + self.log_std.len()];
        let vf_coef = T::c(self.cfg.vf_coef);
        let ent_coef = T::c(self.cfg.ent_coef);
        for (s, &i) in chunk.iter().enumerate() {
            let step = &steps[i];
            // policy branch gradient through logp
            let u1 = ratios[s] * adv[s];
            let u2 = vecmath::clamp(ratios[s], T::one() - eps_clip, T::one() + eps_clip) * adv[s];
            // when the clipped branch wins, the ratio sits outside the
            // clip range and its derivative vanishes
            let d_logp = if u1 <= u2 {
                -adv[s] * ratios[s] / bf
            } else {
                T::zero()
            };
            let (d_mu, d_ls) = gaussian_log_prob_grads(&step.raw_action, &mus[s], &self.log_std);
            if d_logp != T::zero() {
                let g_mu: Vec<T> = d_mu.iter().map(|&g| g * d_logp).collect();
                self.actor
                    .backward(&actor_caches[s], &g_mu, Some(&mut grads[..na]))?;
            }
            for d in 0..self.log_std.len() {
                let mut g = d_logp * d_ls[d];
                g -= ent_coef / bf; // entropy bonus: d(-mean(entropy))/d log_std = -1/b
                grads[na + nc + d] += g;
            }
            // value branch
            let pass = match self.cfg.clip_vf {
                Some(eps_vf) => (values[s] - step.value).abs() <= T::c(eps_vf),
                None => true,
            };
            if pass {
                let dv = vf_coef * T::c(2.0) * (value_used[s] - rollout.returns()[i]) / bf;
                self.critics[0]
                    .backward(&critic_caches[s], &[dv], Some(&mut grads[na..na + nc]))?;
            }
        }
        self.step_actor(grads);

        Ok((
            UpdateMetrics {
                policy_loss: Some(policy_loss.to_f64_lossy()),
                value_loss: Some(value_loss.to_f64_lossy()),
                entropy_loss: Some(ent_loss.to_f64_lossy()),
                physics_raw,
                lambda: if self.cfg.algorithm.is_pinn() {
                    Some(self.physics.lambda_base.to_f64_lossy())
                } else {
                    None
                },
                vol_ema: vol,
                approx_kl: Some(approx_kl.to_f64_lossy()),
                ..Default::default()
            },
            false,
        ))
    }
}
