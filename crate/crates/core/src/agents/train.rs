//! The training orchestrator: rollout collection, buffer writes, update
//! cadence per algorithm family, checkpoint snapshots and the per-update
//! metric log. Fully deterministic given the agent's seed.

use super::buffers::{ReplayBuffer, RolloutBuffer, RolloutStep, Transition};
use super::checkpoint::Checkpoint;
use super::{Agent, AgentError, Algorithm, UpdateMetrics};
use crate::dataset::EpisodeData;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub total_steps: usize,
    /// Emit a checkpoint every this many environment steps; 0 disables
    /// periodic snapshots (initial and final ones are always produced).
    pub checkpoint_every: usize,
    pub commission: f64,
    pub initial_wealth: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            total_steps: 0,
            checkpoint_every: 0,
            commission: 0.0025,
            initial_wealth: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub update: u64,
    pub step: usize,
    pub episode: usize,
    pub reward: f64,
    pub metrics: UpdateMetrics,
}

/// Per-gradient-step training log; renders to CSV with a schema that
/// depends on the algorithm family, and PINN-only columns that vanilla
/// variants do not emit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub algorithm: Algorithm,
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = vec!["update", "step", "episode", "reward"];
        if self.algorithm.is_off_policy() {
            cols.extend_from_slice(&["actor_loss", "critic_loss"]);
            if self.algorithm.is_pinn() {
                cols.extend_from_slice(&["physics_raw", "physics_norm", "lambda_adapt", "vol_ema"]);
            }
        } else {
            cols.extend_from_slice(&["policy_loss", "value_loss", "entropy_loss"]);
            if self.algorithm.is_pinn() {
                cols.extend_from_slice(&["physics_raw", "lambda_adapt", "vol_ema"]);
            }
        }
        cols
    }

    pub fn to_csv_string(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        let mut out = String::new();
        out.push_str(&self.columns().join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields = vec![
                format!("{}", row.update),
                format!("{}", row.step),
                format!("{}", row.episode),
                format!("{}", row.reward),
            ];
            let m = &row.metrics;
            if self.algorithm.is_off_policy() {
                fields.push(cell(m.actor_loss));
                fields.push(cell(m.critic_loss));
                if self.algorithm.is_pinn() {
                    fields.push(cell(m.physics_raw));
                    fields.push(cell(m.physics_norm));
                    fields.push(cell(m.lambda));
                    fields.push(cell(m.vol_ema));
                }
            } else {
                fields.push(cell(m.policy_loss));
                fields.push(cell(m.value_loss));
                fields.push(cell(m.entropy_loss));
                if self.algorithm.is_pinn() {
                    fields.push(cell(m.physics_raw));
                    fields.push(cell(m.lambda));
                    fields.push(cell(m.vol_ema));
                }
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
pub struct TrainResult {
    pub log: TrainLog,
    /// Labeled snapshots: "init", optional "step_<n>" entries, "final".
    pub checkpoints: Vec<(String, Checkpoint)>,
    pub episodes_completed: usize,
}

/// Run the configured agent over repeated passes of the episode data.
pub fn train<T: Scalar>(
    agent: &mut Agent<T>,
    data: &EpisodeData<T>,
    opts: &TrainOptions,
) -> Result<TrainResult, AgentError> {
    if data.shape != agent.shape {
        return Err(AgentError::CheckpointShapeMismatch(format!(
            "episode shape {:?} does not match agent shape {:?}",
            data.shape, agent.shape
        )));
    }
    let mut env = data.to_env(T::c(opts.commission), T::c(opts.initial_wealth));
    let mut rows: Vec<TrainLogRow> = Vec::new();
    let mut checkpoints = vec![("init".to_string(), agent.to_checkpoint())];
    let mut replay = ReplayBuffer::new(agent.cfg.buffer_capacity);
    let mut rollout = RolloutBuffer::new();
    let off_policy = agent.cfg.algorithm.is_off_policy();
    let mut k = 0usize;
    let mut episode = 0usize;
    let mut rollout_rewards: Vec<f64> = Vec::new();
    let mut logged_updates = 0u64;

    for step in 1..=opts.total_steps {
        let state = &data.states[k];
        let act = agent.act(state, true)?;
        let outcome = env.step(&act.weights)?;
        let done = data.is_terminal(k);
        let reward = outcome.reward.to_f64_lossy();

        if off_policy {
            replay.push(Transition {
                state: state.clone(),
                action: act.weights.values().to_vec(),
                reward: outcome.reward,
                next_state: data.next_state(k).to_vec(),
                done,
            });
            let warm = agent.cfg.learning_starts.max(agent.cfg.batch_size);
            if replay.len() >= warm {
                let metrics = agent.update_off_policy(&replay)?;
                logged_updates += 1;
                rows.push(TrainLogRow {
                    update: logged_updates,
                    step,
                    episode,
                    reward,
                    metrics,
                });
            }
        } else {
            rollout.push(RolloutStep {
                state: state.clone(),
                raw_action: act.raw.clone(),
                action: act.weights.values().to_vec(),
                reward: outcome.reward,
                next_state: data.next_state(k).to_vec(),
                done,
                value: act.value.expect("on-policy act produces a value"),
                log_prob: act.log_prob.expect("on-policy act produces a log prob"),
            });
            rollout_rewards.push(reward);
            if rollout.len() >= agent.cfg.n_steps || step == opts.total_steps {
                let bootstrap = agent.value_of(data.next_state(k))?;
                rollout.prepare(bootstrap, T::c(agent.cfg.gamma), T::c(agent.cfg.gae_lambda))?;
                let mean_reward =
                    rollout_rewards.iter().sum::<f64>() / rollout_rewards.len() as f64;
                let all_metrics = agent.update_on_policy(&rollout)?;
                for metrics in all_metrics {
                    logged_updates += 1;
                    rows.push(TrainLogRow {
                        update: logged_updates,
                        step,
                        episode,
                        reward: mean_reward,
                        metrics,
                    });
                }
                rollout.clear();
                rollout_rewards.clear();
            }
        }

        if done {
            env.reset();
            k = 0;
            episode += 1;
        } else {
            k += 1;
        }
        if opts.checkpoint_every > 0 && step % opts.checkpoint_every == 0 {
            checkpoints.push((format!("step_{step:08}"), agent.to_checkpoint()));
        }
    }

    if opts.total_steps > 0 {
        checkpoints.push(("final".to_string(), agent.to_checkpoint()));
    }
    Ok(TrainResult {
        log: TrainLog {
            algorithm: agent.cfg.algorithm,
            rows,
        },
        checkpoints,
        episodes_completed: episode,
    })
}

/// Deterministic evaluation pass (no exploration, no RNG consumption).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub total_reward: f64,
    pub terminal_wealth: f64,
    pub n_steps: usize,
}

pub fn evaluate<T: Scalar>(
    agent: &mut Agent<T>,
    data: &EpisodeData<T>,
    commission: f64,
    initial_wealth: f64,
) -> Result<EvalSummary, AgentError> {
    let mut env = data.to_env(T::c(commission), T::c(initial_wealth));
    let mut total_reward = 0.0;
    for k in 0..data.n_steps() {
        let act = agent.act(&data.states[k], false)?;
        let outcome = env.step(&act.weights)?;
        total_reward += outcome.reward.to_f64_lossy();
    }
    Ok(EvalSummary {
        total_reward,
        terminal_wealth: env.state().wealth.to_f64_lossy(),
        n_steps: data.n_steps(),
    })
}
