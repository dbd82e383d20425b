//! Physics-aware experience storage: a ring replay buffer carrying next
//! observations, and the on-policy rollout buffer with GAE.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::AgentError;
use crate::scalar::Scalar;

/// One environment transition; states are flattened tensors.
#[derive(Debug, Clone)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_state: Vec<T>,
    pub done: bool,
}

/// Fixed-capacity ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    data: Vec<Transition<T>>,
    cursor: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            data: Vec::with_capacity(capacity),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition<T>) {
        debug_assert_eq!(t.state.len(), t.next_state.len());
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> &Transition<T> {
        &self.data[idx]
    }

    /// Uniform sample of distinct indices from the filled region (partial
    /// Fisher-Yates).
    pub fn sample_indices(
        &self,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, AgentError> {
        if self.len() < batch_size {
            return Err(AgentError::BufferTooSmall {
                required: batch_size,
                got: self.len(),
            });
        }
        let mut pool: Vec<usize> = (0..self.len()).collect();
        for k in 0..batch_size {
            let j = k + rng.random_range(0..pool.len() - k);
            pool.swap(k, j);
        }
        pool.truncate(batch_size);
        Ok(pool)
    }
}

/// One on-policy step: the executed simplex action plus the raw Gaussian
/// sample behind it, with the value and log-probability at collection time.
#[derive(Debug, Clone)]
pub struct RolloutStep<T> {
    pub state: Vec<T>,
    pub raw_action: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_state: Vec<T>,
    pub done: bool,
    pub value: T,
    pub log_prob: T,
}

/// Ordered trajectory segment plus per-step advantages and returns.
/// Advantages must be computed before consumption; the buffer is cleared
/// after each policy-update phase.
#[derive(Debug, Clone)]
pub struct RolloutBuffer<T> {
    steps: Vec<RolloutStep<T>>,
    advantages: Vec<T>,
    returns: Vec<T>,
    prepared: bool,
}

impl<T: Scalar> Default for RolloutBuffer<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> RolloutBuffer<T> {
    pub fn new() -> Self {
        Self {
            steps: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
            prepared: false,
        }
    }

    pub fn push(&mut self, step: RolloutStep<T>) {
        self.steps.push(step);
        self.prepared = false;
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[RolloutStep<T>] {
        &self.steps
    }

    pub fn advantages(&self) -> &[T] {
        debug_assert!(self.prepared);
        &self.advantages
    }

    pub fn returns(&self) -> &[T] {
        debug_assert!(self.prepared);
        &self.returns
    }

    pub fn is_prepared(&self) -> bool {
        self.prepared
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
        self.prepared = false;
    }

    /// Run GAE over the stored steps with a bootstrap value for the state
    /// after the final step.
    pub fn prepare(&mut self, bootstrap_value: T, gamma: T, lambda: T) -> Result<(), AgentError> {
        if self.steps.is_empty() {
            return Err(AgentError::EmptyRollout);
        }
        let rewards: Vec<T> = self.steps.iter().map(|s| s.reward).collect();
        let values: Vec<T> = self.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = self.steps.iter().map(|s| s.done).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, lambda, bootstrap_value)?;
        self.advantages = adv;
        self.returns = ret;
        self.prepared = true;
        Ok(())
    }
}

/// Standard GAE recursion; `returns = advantages + values`.
///
/// `dones[t]` marks the transition at t as episode-terminal, cutting the
/// bootstrap chain there.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    gamma: T,
    lambda_gae: T,
    bootstrap_value: T,
) -> Result<(Vec<T>, Vec<T>), AgentError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(AgentError::LengthMismatch {
            expected: n,
            got: values.len().min(dones.len()),
        });
    }
    let mut advantages = vec![T::zero(); n];
    let mut acc = T::zero();
    for t in (0..n).rev() {
        let not_done = if dones[t] { T::zero() } else { T::one() };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let delta = rewards[t] + gamma * not_done * next_value - values[t];
        acc = delta + gamma * lambda_gae * not_done * acc;
        advantages[t] = acc;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(&a, &v)| a + v)
        .collect();
    Ok((advantages, returns))
}
