//! Stacked KAN layers: every edge applies a learnable univariate function
//! (spline plus optional silu residual), summed at each output node.
//!
//! Forward, cached forward and exact reverse-mode gradients with respect to
//! inputs, spline coefficients and the two per-edge scales are all here.
//! Parameters flatten in a fixed canonical order so optimizers and target
//! networks can treat a network as one contiguous vector.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grid::SplineGrid;
use crate::rng::standard_normal;
use crate::scalar::Scalar;
use crate::vecmath::{dot, silu, silu_grad};

#[derive(Debug, Error, PartialEq)]
pub enum KanError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network spec is inconsistent: {0}")]
    BadSpec(String),
}

/// Structural hyperparameters for every layer of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanConfig {
    /// Spline degree k.
    pub degree: usize,
    /// Grid intervals G.
    pub intervals: usize,
    /// Grid range; inputs are clamped to it for the spline term.
    pub grid_lo: f64,
    pub grid_hi: f64,
    /// Include the silu residual path with trainable scale. Disabling it
    /// recovers the pure-spline sum form.
    pub base_enabled: bool,
}

impl Default for KanConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            intervals: 5,
            grid_lo: -2.0,
            grid_hi: 2.0,
            base_enabled: true,
        }
    }
}

/// One learnable univariate edge function.
#[derive(Debug, Clone, PartialEq)]
pub struct KanEdge<T> {
    pub coefficients: Vec<T>,
    pub base_scale: T,
    pub spline_scale: T,
}

impl<T: Scalar> KanEdge<T> {
    /// base_scale * silu(x) + spline_scale * <coefficients, basis(x)>.
    pub fn eval(&self, grid: &SplineGrid<T>, x: T, base_enabled: bool) -> T {
        let spline = dot(&self.coefficients, &grid.basis(x));
        let base = if base_enabled {
            self.base_scale * silu(x)
        } else {
            T::zero()
        };
        base + self.spline_scale * spline
    }
}

/// A single KAN layer: `out_dim x in_dim` edges over a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer<T> {
    in_dim: usize,
    out_dim: usize,
    grid: SplineGrid<T>,
    base_enabled: bool,
    /// Edge (i, j) for output i, input j lives at `edges[i * in_dim + j]`.
    edges: Vec<KanEdge<T>>,
}

/// Per-sample cache recorded by a forward pass, consumed by backward.
pub struct LayerCache<T> {
    silu_vals: Vec<T>,
    silu_grads: Vec<T>,
    basis: Vec<Vec<T>>,
    basis_deriv: Vec<Vec<T>>,
    inside: Vec<bool>,
    spline_dots: Vec<T>,
}

impl<T: Scalar> KanLayer<T> {
    pub fn new(in_dim: usize, out_dim: usize, cfg: &KanConfig, rng: &mut ChaCha8Rng) -> Self {
        let grid = SplineGrid::uniform(
            cfg.degree,
            cfg.intervals,
            T::c(cfg.grid_lo),
            T::c(cfg.grid_hi),
        );
        let n_basis = grid.basis_len();
        let coef_std = T::c(0.1) / T::c(n_basis as f64).sqrt();
        // summing in_dim edge outputs per node: keep node outputs O(1) by
        // down-scaling the residual path with the fan-in
        let base_init = T::one() / T::c(in_dim as f64);
        let edges = (0..in_dim * out_dim)
            .map(|_| KanEdge {
                coefficients: (0..n_basis)
                    .map(|_| standard_normal::<T>(rng) * coef_std)
                    .collect(),
                base_scale: if cfg.base_enabled { base_init } else { T::zero() },
                spline_scale: T::one(),
            })
            .collect();
        Self {
            in_dim,
            out_dim,
            grid,
            base_enabled: cfg.base_enabled,
            edges,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn grid(&self) -> &SplineGrid<T> {
        &self.grid
    }

    pub fn edges(&self) -> &[KanEdge<T>] {
        &self.edges
    }

    pub fn edges_mut(&mut self) -> &mut [KanEdge<T>] {
        &mut self.edges
    }

    fn n_basis(&self) -> usize {
        self.grid.basis_len()
    }

    /// Parameters per layer: each edge holds its coefficients plus the two
    /// scales, flattened output-major.
    pub fn param_count(&self) -> usize {
        self.edges.len() * (self.n_basis() + 2)
    }

    pub fn forward(&self, input: &[T], output: &mut Vec<T>) {
        output.clear();
        output.resize(self.out_dim, T::zero());
        let mut basis_cache: Vec<Vec<T>> = Vec::with_capacity(self.in_dim);
        let mut silu_cache: Vec<T> = Vec::with_capacity(self.in_dim);
        for &x in input {
            basis_cache.push(self.grid.basis(x));
            silu_cache.push(if self.base_enabled { silu(x) } else { T::zero() });
        }
        for i in 0..self.out_dim {
            let mut acc = T::zero();
            for j in 0..self.in_dim {
                let e = &self.edges[i * self.in_dim + j];
                let spline = dot(&e.coefficients, &basis_cache[j]);
                acc += e.spline_scale * spline;
                if self.base_enabled {
                    acc += e.base_scale * silu_cache[j];
                }
            }
            output[i] = acc;
        }
    }

    pub fn forward_cached(&self, input: &[T]) -> (Vec<T>, LayerCache<T>) {
        let mut silu_vals = Vec::with_capacity(self.in_dim);
        let mut silu_grads = Vec::with_capacity(self.in_dim);
        let mut basis = Vec::with_capacity(self.in_dim);
        let mut basis_deriv = Vec::with_capacity(self.in_dim);
        let mut inside = Vec::with_capacity(self.in_dim);
        for &x in input {
            let (b, d) = self.grid.basis_and_deriv(x);
            basis.push(b);
            basis_deriv.push(d);
            inside.push(self.grid.clamp_input(x).1);
            if self.base_enabled {
                silu_vals.push(silu(x));
                silu_grads.push(silu_grad(x));
            } else {
                silu_vals.push(T::zero());
                silu_grads.push(T::zero());
            }
        }
        let mut output = vec![T::zero(); self.out_dim];
        let mut spline_dots = vec![T::zero(); self.edges.len()];
        for i in 0..self.out_dim {
            let mut acc = T::zero();
            for j in 0..self.in_dim {
                let idx = i * self.in_dim + j;
                let e = &self.edges[idx];
                let spline = dot(&e.coefficients, &basis[j]);
                spline_dots[idx] = spline;
                acc += e.spline_scale * spline;
                if self.base_enabled {
                    acc += e.base_scale * silu_vals[j];
                }
            }
            output[i] = acc;
        }
        (
            output,
            LayerCache {
                silu_vals,
                silu_grads,
                basis,
                basis_deriv,
                inside,
                spline_dots,
            },
        )
    }

    /// Accumulate parameter gradients into `param_grads` (the layer's slice
    /// of the flat buffer) and return the gradient w.r.t. the layer input.
    /// `param_grads = None` computes input gradients only.
    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        upstream: &[T],
        mut param_grads: Option<&mut [T]>,
    ) -> Vec<T> {
        let n_basis = self.n_basis();
        let stride = n_basis + 2;
        let mut input_grad = vec![T::zero(); self.in_dim];
        for i in 0..self.out_dim {
            let up = upstream[i];
            if up == T::zero() {
                continue;
            }
            for j in 0..self.in_dim {
                let idx = i * self.in_dim + j;
                let e = &self.edges[idx];
                // input gradient: silu path flows everywhere, spline path
                // only inside the grid (clamped inputs have zero slope)
                let mut dx = T::zero();
                if self.base_enabled {
                    dx += e.base_scale * cache.silu_grads[j];
                }
                if cache.inside[j] {
                    dx += e.spline_scale * dot(&e.coefficients, &cache.basis_deriv[j]);
                }
                input_grad[j] += up * dx;
                if let Some(grads) = param_grads.as_deref_mut() {
                    let off = idx * stride;
                    let b = &cache.basis[j];
                    for (g, &bv) in grads[off..off + n_basis].iter_mut().zip(b.iter()) {
                        *g += up * e.spline_scale * bv;
                    }
                    if self.base_enabled {
                        grads[off + n_basis] += up * cache.silu_vals[j];
                    }
                    grads[off + n_basis + 1] += up * cache.spline_dots[idx];
                }
            }
        }
        input_grad
    }
}

/// Stacked KAN layers with composable dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork<T> {
    layers: Vec<KanLayer<T>>,
}

/// Whole-network forward cache: one [`LayerCache`] per layer.
pub struct NetCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> KanNetwork<T> {
    /// Build from `dims = [in, hidden.., out]`.
    pub fn new(dims: &[usize], cfg: &KanConfig, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "network needs at least one layer");
        let layers = dims
            .windows(2)
            .map(|w| KanLayer::new(w[0], w[1], cfg, rng))
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[KanLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer<T>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    fn check_input(&self, input: &[T]) -> Result<(), KanError> {
        if input.len() != self.in_dim() {
            return Err(KanError::DimensionMismatch {
                expected: self.in_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, KanError> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn forward_cached(&self, input: &[T]) -> Result<(Vec<T>, NetCache<T>), KanError> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let (out, cache) = layer.forward_cached(&current);
            caches.push(cache);
            current = out;
        }
        Ok((current, NetCache { layers: caches }))
    }

    /// Reverse-mode derivatives of `<upstream, forward(input)>`.
    ///
    /// Accumulates parameter gradients into the flat buffer when given one
    /// and returns the gradient w.r.t. the network input.
    pub fn backward(
        &self,
        cache: &NetCache<T>,
        upstream: &[T],
        mut param_grads: Option<&mut [T]>,
    ) -> Result<Vec<T>, KanError> {
        if upstream.len() != self.out_dim() {
            return Err(KanError::DimensionMismatch {
                expected: self.out_dim(),
                got: upstream.len(),
            });
        }
        let mut grad = upstream.to_vec();
        let mut offset = self.param_count();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            offset -= layer.param_count();
            let slice = param_grads
                .as_deref_mut()
                .map(|g| &mut g[offset..offset + layer.param_count()]);
            grad = layer.backward(lc, &grad, slice);
        }
        Ok(grad)
    }

    pub fn export_params(&self, out: &mut Vec<T>) {
        out.clear();
        out.reserve(self.param_count());
        for layer in &self.layers {
            for e in layer.edges() {
                out.extend_from_slice(&e.coefficients);
                out.push(e.base_scale);
                out.push(e.spline_scale);
            }
        }
    }

    pub fn import_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for layer in &mut self.layers {
            for e in layer.edges_mut() {
                for c in e.coefficients.iter_mut() {
                    *c = *it.next().unwrap();
                }
                e.base_scale = *it.next().unwrap();
                e.spline_scale = *it.next().unwrap();
            }
        }
    }

    /// Elementwise blend with another network of identical shape:
    /// `self = f(self, other)`. Used for polyak target updates.
    pub fn zip_params_mut(&mut self, other: &KanNetwork<T>, mut f: impl FnMut(&mut T, T)) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            assert_eq!(a.edges.len(), b.edges.len());
            for (ea, eb) in a.edges.iter_mut().zip(&b.edges) {
                for (ca, &cb) in ea.coefficients.iter_mut().zip(&eb.coefficients) {
                    f(ca, cb);
                }
                f(&mut ea.base_scale, eb.base_scale);
                f(&mut ea.spline_scale, eb.spline_scale);
            }
        }
    }
}

/// Exact gradients of `<upstream, forward(input)>` w.r.t. input and all
/// parameters (flat, canonical order).
pub fn kan_gradients<T: Scalar>(
    net: &KanNetwork<T>,
    input: &[T],
    upstream: &[T],
) -> Result<(Vec<T>, Vec<T>), KanError> {
    let (_, cache) = net.forward_cached(input)?;
    let mut param_grads = vec![T::zero(); net.param_count()];
    let input_grad = net.backward(&cache, upstream, Some(&mut param_grads))?;
    Ok((input_grad, param_grads))
}

// --- serialization -------------------------------------------------------

pub const NETWORK_SPEC_VERSION: u32 = 1;

fn default_spec_version() -> u32 {
    NETWORK_SPEC_VERSION
}

/// Flat, versioned network description; all values stored as f64 so the
/// forward pass round-trips bit-exactly for both scalar types.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default = "default_spec_version")]
    pub version: u32,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub degree: usize,
    pub intervals: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub base_enabled: bool,
    pub base_scales: Vec<f64>,
    pub spline_scales: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl<T: Scalar> KanNetwork<T> {
    pub fn to_spec(&self) -> NetworkSpec {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerSpec {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                degree: l.grid.order(),
                intervals: l.grid.num_intervals(),
                grid_lo: l.grid.bounds().0.to_f64_lossy(),
                grid_hi: l.grid.bounds().1.to_f64_lossy(),
                base_enabled: l.base_enabled,
                base_scales: l.edges.iter().map(|e| e.base_scale.to_f64_lossy()).collect(),
                spline_scales: l.edges.iter().map(|e| e.spline_scale.to_f64_lossy()).collect(),
                coefficients: l
                    .edges
                    .iter()
                    .flat_map(|e| e.coefficients.iter().map(|c| c.to_f64_lossy()))
                    .collect(),
            })
            .collect();
        NetworkSpec {
            version: NETWORK_SPEC_VERSION,
            layers,
        }
    }

    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, KanError> {
        if spec.version != NETWORK_SPEC_VERSION {
            return Err(KanError::BadSpec(format!(
                "unsupported network spec version {}",
                spec.version
            )));
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        for ls in &spec.layers {
            let grid = SplineGrid::uniform(ls.degree, ls.intervals, T::c(ls.grid_lo), T::c(ls.grid_hi));
            let n_basis = grid.basis_len();
            let n_edges = ls.in_dim * ls.out_dim;
            if ls.base_scales.len() != n_edges
                || ls.spline_scales.len() != n_edges
                || ls.coefficients.len() != n_edges * n_basis
            {
                return Err(KanError::BadSpec(format!(
                    "layer {}x{} has inconsistent parameter counts",
                    ls.in_dim, ls.out_dim
                )));
            }
            let edges = (0..n_edges)
                .map(|idx| KanEdge {
                    coefficients: ls.coefficients[idx * n_basis..(idx + 1) * n_basis]
                        .iter()
                        .map(|&c| T::c(c))
                        .collect(),
                    base_scale: T::c(ls.base_scales[idx]),
                    spline_scale: T::c(ls.spline_scales[idx]),
                })
                .collect();
            layers.push(KanLayer {
                in_dim: ls.in_dim,
                out_dim: ls.out_dim,
                grid,
                base_enabled: ls.base_enabled,
                edges,
            });
        }
        let net = Self { layers };
        for w in net.layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(KanError::BadSpec("adjacent layer dimensions do not compose".into()));
            }
        }
        Ok(net)
    }
}
