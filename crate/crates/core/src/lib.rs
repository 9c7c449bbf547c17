//! Physics-informed neural network solvers with domain decomposition.
//!
//! The crate provides three training modes over shared machinery: plain PINN,
//! XPINN (interface residual + average coupling), and IDPINN (interface value,
//! gradient, and residual-gradient smoothness with a warm-start stage).

pub mod autodiff;
pub mod network;

pub use autodiff::{DualScalar, Jet, Tape};
pub use network::{LayerSpec, ParameterVector};
