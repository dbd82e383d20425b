//! Small dense-vector helpers shared across modules.
//!
//! Reductions are sequential left folds so results are bit-reproducible.

use crate::scalar::Scalar;

pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    sum(xs) / T::c(xs.len() as f64)
}

/// Population variance (divide by N).
pub fn variance<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, &x| {
        let d = x - m;
        acc + d * d
    });
    ss / T::c(xs.len() as f64)
}

/// Population standard deviation.
pub fn std_dev<T: Scalar>(xs: &[T]) -> T {
    variance(xs).sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn l1_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs())
}

pub fn l2_norm<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

pub fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

/// Numerically stable softmax (max-subtraction).
pub fn softmax<T: Scalar>(raw: &[T]) -> Vec<T> {
    let max = raw.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let exps: Vec<T> = raw.iter().map(|&x| (x - max).exp()).collect();
    let total = sum(&exps);
    exps.into_iter().map(|e| e / total).collect()
}

/// silu(x) = x * sigmoid(x), and its derivative.
pub fn silu<T: Scalar>(x: T) -> T {
    x / (T::one() + (-x).exp())
}

pub fn silu_grad<T: Scalar>(x: T) -> T {
    let s = T::one() / (T::one() + (-x).exp());
    s * (T::one() + x * (T::one() - s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let w = softmax(&[0.0_f64, ((3.0_f64).ln())]);
        assert!((w[0] - 0.25).abs() < 1e-12);
        assert!((w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_inputs() {
        let w = softmax(&[1e4_f64, -1e4]);
        assert!(w.iter().all(|x| x.is_finite()));
        assert!((sum(&w) - 1.0).abs() < 1e-12);
        assert!(w[0] > 0.999999);
    }

    #[test]
    fn silu_grad_matches_finite_difference() {
        let h = 1e-6_f64;
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_grad(x) - fd).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn population_variance() {
        let xs = [0.0_f64, 10.0];
        assert!((variance(&xs) - 25.0).abs() < 1e-12);
        assert!((std_dev(&xs) - 5.0).abs() < 1e-12);
    }
}
