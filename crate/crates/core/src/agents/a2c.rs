//! Synchronous advantage actor-critic: one full-buffer pass per update with
//! normalized observations and velocities in the physics branch, an
//! MSE-plus-variance physics loss, and dynamic scaling of the physics
//! weight by the policy-loss magnitude.

use super::policy::{
    entropy_loss, gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grads,
};
use super::{Agent, AgentError, RolloutBuffer, UpdateMetrics};
use crate::physics::{self, VelocityField};
use crate::scalar::Scalar;
use crate::vecmath;

/// Standardize every element of a batch of flat tensors by the batch-global
/// mean and std.
fn global_normalize<T: Scalar>(batch: &[&[T]], eps: T) -> Vec<Vec<T>> {
    let all: Vec<T> = batch.iter().flat_map(|s| s.iter().copied()).collect();
    let mean = vecmath::mean(&all);
    let std = vecmath::std_dev(&all);
    batch
        .iter()
        .map(|s| s.iter().map(|&x| (x - mean) / (std + eps)).collect())
        .collect()
}

impl<T: Scalar> Agent<T> {
    pub(crate) fn a2c_update(
        &mut self,
        rollout: &RolloutBuffer<T>,
    ) -> Result<UpdateMetrics, AgentError> {
        if rollout.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        assert!(rollout.is_prepared(), "advantages must be computed first");
        let steps = rollout.steps();
        let b = steps.len();
        let bf = T::c(b as f64);
        let eps = self.physics.epsilon;

        let adv = if self.cfg.normalize_advantage && b > 1 {
            let raw = rollout.advantages();
            let m = vecmath::mean(raw);
            let s = vecmath::std_dev(raw);
            raw.iter().map(|&a| (a - m) / (s + T::c(1e-8))).collect()
        } else {
            rollout.advantages().to_vec()
        };

        // physics branch: normalized observations and velocities,
        // feature-mean acceleration over dt, MSE plus variance, clamped
        let mut physics_term = None;
        if self.cfg.algorithm.is_pinn() {
            let m = self.shape.assets;
            let nf = self.shape.features;
            let last_base = (self.shape.window - 1) * m * nf;
            let s_t: Vec<&[T]> = steps.iter().map(|s| s.state.as_slice()).collect();
            let s_next: Vec<&[T]> = steps.iter().map(|s| s.next_state.as_slice()).collect();
            let s_n = global_normalize(&s_t, eps);
            let s_next_n = global_normalize(&s_next, eps);
            let v: Vec<Vec<T>> = s_n
                .iter()
                .zip(&s_next_n)
                .map(|(a, c)| {
                    a.iter()
                        .zip(c.iter())
                        .map(|(&x, &y)| (y - x) / self.physics.dt)
                        .collect()
                })
                .collect();
            let v_refs: Vec<&[T]> = v.iter().map(|x| x.as_slice()).collect();
            let v_n = global_normalize(&v_refs, eps);

            // feature-mean of the last window step, then once more over dt
            let mut fm = Vec::with_capacity(b * m);
            for row in &v_n {
                for i in 0..m {
                    let mut acc = T::zero();
                    for f in 0..nf {
                        acc += row[last_base + i * nf + f];
                    }
                    fm.push(acc / T::c(nf as f64));
                }
            }
            let fm_field = VelocityField {
                batch: b,
                assets: m,
                values: fm,
            };
            physics::vol_ema_update(&mut self.vol_ema, &fm_field, self.physics.vol_beta);
            let alpha: Vec<T> = fm_field.values.iter().map(|&x| x / self.physics.dt).collect();

            let mut sq = Vec::with_capacity(b * m);
            for (s_idx, step) in steps.iter().enumerate() {
                for i in 0..m {
                    let a_hat = step.action[i] / self.physics.mass;
                    let d = a_hat - alpha[s_idx * m + i];
                    sq.push(d * d);
                }
            }
            let raw = vecmath::mean(&sq) + vecmath::variance(&sq);
            let clamped = match self.physics.loss_clamp {
                Some((lo, hi)) => vecmath::clamp(raw, lo, hi),
                None => raw,
            };
            physics_term = Some(clamped);
        }

        // policy evaluation
        let mut log_probs = Vec::with_capacity(b);
        let mut mus = Vec::with_capacity(b);
        let mut actor_caches = Vec::with_capacity(b);
        let mut values = Vec::with_capacity(b);
        let mut critic_caches = Vec::with_capacity(b);
        for step in steps {
            let (mu, a_cache) = self.actor.forward_cached(&step.state)?;
            let (v, c_cache) = self.critics[0].forward_cached(&step.state)?;
            log_probs.push(gaussian_log_prob(&step.raw_action, &mu, &self.log_std));
            mus.push(mu);
            actor_caches.push(a_cache);
            values.push(v[0]);
            critic_caches.push(c_cache);
        }

        let policy_terms: Vec<T> = adv
            .iter()
            .zip(&log_probs)
            .map(|(&a, &lp)| a * lp)
            .collect();
        let policy_loss = -vecmath::mean(&policy_terms);
        let value_terms: Vec<T> = values
            .iter()
            .zip(rollout.returns())
            .map(|(&v, &r)| (v - r) * (v - r))
            .collect();
        let value_loss = vecmath::mean(&value_terms);
        let entropies: Vec<T> = (0..b).map(|_| gaussian_entropy(&self.log_std)).collect();
        let ent_loss = entropy_loss(Some(&entropies), &log_probs);

        // dynamic scaling by detached magnitudes
        let effective_lambda = physics_term.map(|lp| {
            let scale = policy_loss.abs() / (lp.abs() + eps);
            self.physics.lambda_base * scale
        });

        // gradients over the joint group
        let na = self.actor.param_count();
        let nc = self.critics[0].param_count();
        let mut grads = vec![T::zero(); na + nc + self.log_std.len()];
        let vf_coef = T::c(self.cfg.vf_coef);
        let ent_coef = T::c(self.cfg.ent_coef);
        for (s, step) in steps.iter().enumerate() {
            let d_logp = -adv[s] / bf;
            let (d_mu, d_ls) = gaussian_log_prob_grads(&step.raw_action, &mus[s], &self.log_std);
            let g_mu: Vec<T> = d_mu.iter().map(|&g| g * d_logp).collect();
            self.actor
                .backward(&actor_caches[s], &g_mu, Some(&mut grads[..na]))?;
            for d in 0..self.log_std.len() {
                grads[na + nc + d] += d_logp * d_ls[d] - ent_coef / bf;
            }
            let dv = vf_coef * T::c(2.0) * (values[s] - rollout.returns()[s]) / bf;
            self.critics[0]
                .backward(&critic_caches[s], &[dv], Some(&mut grads[na..na + nc]))?;
        }
        self.step_actor(grads);
        self.update_count += 1;

        Ok(UpdateMetrics {
            policy_loss: Some(policy_loss.to_f64_lossy()),
            value_loss: Some(value_loss.to_f64_lossy()),
            entropy_loss: Some(ent_loss.to_f64_lossy()),
            physics_raw: physics_term.map(|x| x.to_f64_lossy()),
            lambda: effective_lambda.map(|x| x.to_f64_lossy()),
            vol_ema: if self.cfg.algorithm.is_pinn() {
                Some(self.vol_ema.mean.to_f64_lossy())
            } else {
                None
            },
            ..Default::default()
        })
    }
}
