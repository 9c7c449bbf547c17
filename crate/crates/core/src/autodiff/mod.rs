//! Derivative engine: truncated multivariate jets in the PDE inputs whose
//! coefficients are reverse-mode differentiable in the network parameters.

pub mod index;
pub mod jetops;
pub mod tape;

pub use jetops::Activation;
pub use tape::{AutodiffError, DualScalar, Jet, Tape};
