//! Policy-head math shared by the agents: diagonal Gaussian over raw action
//! logits and the softmax Jacobian-vector product.

use crate::scalar::Scalar;
use crate::vecmath;

/// log N(raw | mu, diag(exp(log_std))^2), summed over dimensions.
pub fn gaussian_log_prob<T: Scalar>(raw: &[T], mu: &[T], log_std: &[T]) -> T {
    let half_ln_2pi = T::c(0.5) * (T::c(2.0) * T::PI()).ln();
    let mut acc = T::zero();
    for i in 0..raw.len() {
        let std = log_std[i].exp();
        let z = (raw[i] - mu[i]) / std;
        acc += -T::c(0.5) * z * z - log_std[i] - half_ln_2pi;
    }
    acc
}

/// Entropy of the diagonal Gaussian, summed over dimensions; independent of
/// the mean.
pub fn gaussian_entropy<T: Scalar>(log_std: &[T]) -> T {
    let half_ln_2pi_e = T::c(0.5) * (T::c(2.0) * T::PI() * T::E()).ln();
    log_std
        .iter()
        .fold(T::zero(), |acc, &ls| acc + ls + half_ln_2pi_e)
}

/// d logp / d mu and d logp / d log_std for the summed Gaussian log-prob.
pub fn gaussian_log_prob_grads<T: Scalar>(
    raw: &[T],
    mu: &[T],
    log_std: &[T],
) -> (Vec<T>, Vec<T>) {
    let mut d_mu = Vec::with_capacity(raw.len());
    let mut d_log_std = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        let std = log_std[i].exp();
        let z = (raw[i] - mu[i]) / std;
        d_mu.push(z / std);
        d_log_std.push(z * z - T::one());
    }
    (d_mu, d_log_std)
}

/// Backward pass of softmax: given a = softmax(z) and dL/da, return dL/dz.
pub fn softmax_vjp<T: Scalar>(softmax_out: &[T], grad_out: &[T]) -> Vec<T> {
    let inner = vecmath::dot(grad_out, softmax_out);
    softmax_out
        .iter()
        .zip(grad_out)
        .map(|(&a, &g)| a * (g - inner))
        .collect()
}

/// Entropy loss: -mean(entropy) when the distribution provides one, else
/// the -mean(-logp) fallback.
pub fn entropy_loss<T: Scalar>(entropies: Option<&[T]>, log_probs: &[T]) -> T {
    match entropies {
        Some(e) => -vecmath::mean(e),
        None => {
            let neg_logp: Vec<T> = log_probs.iter().map(|&lp| -lp).collect();
            -vecmath::mean(&neg_logp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, uniform};

    #[test]
    fn log_prob_matches_density_of_standard_normal() {
        let lp = gaussian_log_prob(&[0.0_f64], &[0.0], &[0.0]);
        let want = -(0.5 * (2.0 * std::f64::consts::PI).ln());
        assert!((lp - want).abs() < 1e-12);
    }

    #[test]
    fn log_prob_grads_match_finite_differences() {
        let mut rng = substream(71, "gauss");
        let h = 1e-6;
        for _ in 0..20 {
            let raw: Vec<f64> = (0..3).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let mu: Vec<f64> = (0..3).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let ls: Vec<f64> = (0..3).map(|_| uniform::<f64>(&mut rng) - 0.5).collect();
            let (d_mu, d_ls) = gaussian_log_prob_grads(&raw, &mu, &ls);
            for d in 0..3 {
                let mut mu_p = mu.clone();
                let mut mu_m = mu.clone();
                mu_p[d] += h;
                mu_m[d] -= h;
                let fd = (gaussian_log_prob(&raw, &mu_p, &ls) - gaussian_log_prob(&raw, &mu_m, &ls)) / (2.0 * h);
                assert!((d_mu[d] - fd).abs() < 1e-6);
                let mut ls_p = ls.clone();
                let mut ls_m = ls.clone();
                ls_p[d] += h;
                ls_m[d] -= h;
                let fd = (gaussian_log_prob(&raw, &mu, &ls_p) - gaussian_log_prob(&raw, &mu, &ls_m)) / (2.0 * h);
                assert!((d_ls[d] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn entropy_increases_with_log_std() {
        let a = gaussian_entropy(&[0.0_f64, 0.0]);
        let b = gaussian_entropy(&[0.5_f64, 0.5]);
        assert!(b > a);
        assert!((b - a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_vjp_matches_finite_differences() {
        let mut rng = substream(73, "smax");
        let h = 1e-6;
        for _ in 0..20 {
            let z: Vec<f64> = (0..4).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let g: Vec<f64> = (0..4).map(|_| uniform::<f64>(&mut rng) * 2.0 - 1.0).collect();
            let a = vecmath::softmax(&z);
            let got = softmax_vjp(&a, &g);
            for d in 0..4 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[d] += h;
                zm[d] -= h;
                let fd = (vecmath::dot(&vecmath::softmax(&zp), &g)
                    - vecmath::dot(&vecmath::softmax(&zm), &g))
                    / (2.0 * h);
                assert!((got[d] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn entropy_loss_fallback_branch() {
        let with = entropy_loss(Some(&[1.5_f64, 2.5]), &[-3.0, -4.0]);
        assert!((with + 2.0).abs() < 1e-12);
        let without = entropy_loss(None, &[-3.0_f64, -4.0]);
        assert!((without + 3.5).abs() < 1e-12);
    }
}
