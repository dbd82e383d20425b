//! Clamped B-spline grids and basis evaluation via the Cox-de Boor
//! recursion. Inputs outside the grid range are clamped to the boundary.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Knot grid shared by every edge of a layer.
///
/// The knot sequence is clamped: `order + 1` copies of each boundary around
/// `num_intervals` uniform interior spans, for a total of
/// `num_intervals + 2 * order + 1` knots and `num_intervals + order` basis
/// functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid<T> {
    order: usize,
    num_intervals: usize,
    lo: T,
    hi: T,
    knots: Vec<T>,
}

impl<T: Scalar> SplineGrid<T> {
    pub fn uniform(order: usize, num_intervals: usize, lo: T, hi: T) -> Self {
        assert!(lo < hi, "grid range must be non-degenerate");
        assert!(num_intervals >= 1);
        let h = (hi - lo) / T::c(num_intervals as f64);
        let mut knots = Vec::with_capacity(num_intervals + 2 * order + 1);
        for _ in 0..=order {
            knots.push(lo);
        }
        for j in 1..num_intervals {
            knots.push(lo + h * T::c(j as f64));
        }
        for _ in 0..=order {
            knots.push(hi);
        }
        Self {
            order,
            num_intervals,
            lo,
            hi,
            knots,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    pub fn bounds(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions = coefficient count per edge.
    pub fn basis_len(&self) -> usize {
        self.num_intervals + self.order
    }

    /// Clamp an input to the grid range; the flag records whether it was
    /// already inside (gradients vanish outside).
    pub fn clamp_input(&self, x: T) -> (T, bool) {
        if x < self.lo {
            (self.lo, false)
        } else if x > self.hi {
            (self.hi, false)
        } else {
            (x, true)
        }
    }

    fn degree_zero(&self, x: T) -> Vec<T> {
        let n = self.knots.len() - 1;
        let mut vals = vec![T::zero(); n];
        let mut idx = None;
        for i in 0..n {
            if self.knots[i] <= x && x < self.knots[i + 1] {
                idx = Some(i);
                break;
            }
        }
        // x at the right boundary belongs to the last non-empty interval
        let idx = idx.unwrap_or_else(|| {
            (0..n)
                .rev()
                .find(|&i| self.knots[i] < self.knots[i + 1])
                .expect("grid has at least one non-empty interval")
        });
        vals[idx] = T::one();
        vals
    }

    /// All basis values at `x` (after clamping); length [`Self::basis_len`],
    /// entries nonnegative and summing to 1 on the grid.
    pub fn basis(&self, x: T) -> Vec<T> {
        let (xc, _) = self.clamp_input(x);
        let mut vals = self.degree_zero(xc);
        for d in 1..=self.order {
            elevate_in_place(&self.knots, &mut vals, d, xc);
        }
        vals.truncate(self.basis_len());
        vals
    }

    /// Basis values and their first derivatives at `x` (after clamping).
    pub fn basis_and_deriv(&self, x: T) -> (Vec<T>, Vec<T>) {
        let (xc, _) = self.clamp_input(x);
        let k = self.order;
        let mut vals = self.degree_zero(xc);
        for d in 1..k {
            elevate_in_place(&self.knots, &mut vals, d, xc);
        }
        let n = self.basis_len();
        let mut deriv = vec![T::zero(); n];
        if k == 0 {
            vals.truncate(n);
            return (vals, deriv);
        }
        // derivative from the degree k-1 values before the final elevation
        let t = &self.knots;
        let kf = T::c(k as f64);
        for (i, d) in deriv.iter_mut().enumerate() {
            let denom_l = t[i + k] - t[i];
            let denom_r = t[i + k + 1] - t[i + 1];
            let left = if denom_l > T::zero() {
                vals[i] / denom_l
            } else {
                T::zero()
            };
            let right = if denom_r > T::zero() {
                vals[i + 1] / denom_r
            } else {
                T::zero()
            };
            *d = kf * (left - right);
        }
        elevate_in_place(&self.knots, &mut vals, k, xc);
        vals.truncate(n);
        (vals, deriv)
    }
}

fn elevate_in_place<T: Scalar>(knots: &[T], vals: &mut Vec<T>, d: usize, x: T) {
    let n_new = knots.len() - 1 - d;
    for i in 0..n_new {
        let denom_l = knots[i + d] - knots[i];
        let denom_r = knots[i + d + 1] - knots[i + 1];
        let left = if denom_l > T::zero() {
            (x - knots[i]) / denom_l * vals[i]
        } else {
            T::zero()
        };
        let right = if denom_r > T::zero() {
            (knots[i + d + 1] - x) / denom_r * vals[i + 1]
        } else {
            T::zero()
        };
        vals[i] = left + right;
    }
    vals.truncate(n_new);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, uniform};
    use crate::vecmath;

    /// Independent scalar Cox-de Boor oracle: evaluates one basis function
    /// by the textbook recursion, no sharing with the production path.
    fn cox_de_boor_oracle(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
        if k == 0 {
            let inside = knots[i] <= x && x < knots[i + 1];
            let at_end = x == *knots.last().unwrap()
                && knots[i] < knots[i + 1]
                && knots[i + 1] == *knots.last().unwrap();
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut acc = 0.0;
        if knots[i + k] > knots[i] {
            acc += (x - knots[i]) / (knots[i + k] - knots[i]) * cox_de_boor_oracle(knots, i, k - 1, x);
        }
        if knots[i + k + 1] > knots[i + 1] {
            acc += (knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1])
                * cox_de_boor_oracle(knots, i + 1, k - 1, x);
        }
        acc
    }

    #[test]
    fn knot_layout() {
        let g = SplineGrid::<f64>::uniform(3, 5, -2.0, 2.0);
        assert_eq!(g.knots().len(), 5 + 2 * 3 + 1);
        assert_eq!(g.basis_len(), 8);
        assert!(g.knots().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degree_zero_basis_is_indicator() {
        let g = SplineGrid::<f64>::uniform(0, 4, 0.0, 4.0);
        for (x, expect) in [(0.0, 0), (0.5, 0), (1.0, 1), (2.7, 2), (4.0, 3)] {
            let b = g.basis(x);
            assert_eq!(b.len(), 4);
            for (i, &v) in b.iter().enumerate() {
                assert_eq!(v, if i == expect { 1.0 } else { 0.0 }, "x={x}");
            }
        }
    }

    #[test]
    fn partition_of_unity_all_degrees() {
        let mut rng = substream(1, "pou");
        for k in 1..=4usize {
            let g = SplineGrid::<f64>::uniform(k, 5, -2.0, 2.0);
            for _ in 0..200 {
                let x = -2.0 + 4.0 * uniform::<f64>(&mut rng);
                let b = g.basis(x);
                assert!(b.iter().all(|&v| v >= 0.0));
                assert!((vecmath::sum(&b) - 1.0).abs() < 1e-12, "k={k} x={x}");
            }
            for x in [-2.0, 2.0] {
                assert!((vecmath::sum(&g.basis(x)) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubic_basis_matches_recursive_oracle() {
        let g = SplineGrid::<f64>::uniform(3, 5, -2.0, 2.0);
        let mut rng = substream(2, "oracle");
        let mut points: Vec<f64> = (0..50).map(|_| -2.0 + 4.0 * uniform::<f64>(&mut rng)).collect();
        points.push(-1.6); // interval midpoint
        points.push(2.0);
        for x in points {
            let got = g.basis(x);
            for i in 0..g.basis_len() {
                let want = cox_de_boor_oracle(g.knots(), i, 3, x);
                assert!((got[i] - want).abs() < 1e-12, "i={i} x={x}");
            }
        }
    }

    #[test]
    fn out_of_range_inputs_clamp() {
        let g = SplineGrid::<f64>::uniform(3, 5, -2.0, 2.0);
        assert_eq!(g.basis(-10.0), g.basis(-2.0));
        assert_eq!(g.basis(10.0), g.basis(2.0));
    }

    #[test]
    fn basis_derivative_matches_finite_difference() {
        let g = SplineGrid::<f64>::uniform(3, 5, -2.0, 2.0);
        let h = 1e-6;
        let mut rng = substream(3, "deriv");
        for _ in 0..50 {
            let x = -1.9 + 3.8 * uniform::<f64>(&mut rng);
            let (_, deriv) = g.basis_and_deriv(x);
            let plus = g.basis(x + h);
            let minus = g.basis(x - h);
            for i in 0..g.basis_len() {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                assert!((deriv[i] - fd).abs() < 1e-6, "i={i} x={x}");
            }
        }
    }

    #[test]
    fn derivative_sums_to_zero_inside_grid() {
        let g = SplineGrid::<f64>::uniform(2, 6, -1.0, 3.0);
        for x in [-0.3, 0.9, 1.5, 2.2] {
            let (_, deriv) = g.basis_and_deriv(x);
            assert!(vecmath::sum(&deriv).abs() < 1e-12);
        }
    }
}
