//! Gradient-descent optimizer with adaptive per-parameter moments
//! (bias-corrected first/second accumulators) plus global-norm clipping.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::vecmath;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, n_params: usize) -> Self {
        Self {
            lr,
            beta1: T::c(0.9),
            beta2: T::c(0.999),
            eps: T::c(1e-8),
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let t = T::c(self.t as f64);
        let bc1 = T::one() - self.beta1.powf(t);
        let bc2 = T::one() - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn n_params(&self) -> usize {
        self.m.len()
    }

    pub fn state(&self) -> AdamState {
        AdamState {
            m: self.m.iter().map(|x| x.to_f64_lossy()).collect(),
            v: self.v.iter().map(|x| x.to_f64_lossy()).collect(),
            t: self.t,
        }
    }

    pub fn restore(&mut self, state: &AdamState) {
        assert_eq!(state.m.len(), self.m.len(), "optimizer state size mismatch");
        self.m = state.m.iter().map(|&x| T::c(x)).collect();
        self.v = state.v.iter().map(|&x| T::c(x)).collect();
        self.t = state.t;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

/// Scale gradients so the global L2 norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [T], max_norm: T) -> T {
    let norm = vecmath::l2_norm(grads);
    if norm > max_norm && norm > T::zero() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
