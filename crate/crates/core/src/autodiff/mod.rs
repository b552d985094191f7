//! Differentiable computation engine.
//!
//! Two layers compose here. [`Tape`] is a scalar reverse-mode graph whose
//! leaves are network parameters; `backward` walks it once and returns the
//! exact chain-rule gradient for every parameter leaf. [`Jet2`] is a
//! truncated second-order Taylor carrier for derivatives in *input space*
//! (directional first and second derivatives of the field). Its components
//! are generic over [`Scalar`], so the same jet arithmetic runs over plain
//! `f64` (closed-form expressions) and over tape variables ([`Var`]), in
//! which case the spatial derivatives themselves stay differentiable with
//! respect to the parameters.

mod jet;
mod scalar;
pub(crate) mod tape;

pub use jet::{directional_jet, laplacian_of, spatial_gradient_of, Jet2};
pub use scalar::Scalar;
#[cfg(test)]
pub(crate) use scalar::silu_derivatives;
pub use tape::{AutodiffError, Grads, OpTag, Tape, Var};
