//! Kolmogorov-Arnold network layers built from learnable univariate
//! B-spline edge functions, with exact gradients for inputs and parameters.

mod grid;
mod network;

pub use grid::SplineGrid;
pub use network::{
    kan_gradients, KanConfig, KanEdge, KanError, KanLayer, KanNetwork, LayerSpec, NetCache,
    NetworkSpec, NETWORK_SPEC_VERSION,
};
