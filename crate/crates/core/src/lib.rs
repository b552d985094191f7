//! Neural-network PDE solvers with weakly enforced Dirichlet boundary
//! conditions.
//!
//! The crate implements two saddle-point training schemes, `RitUz` (Ritz
//! energy) and `PINNUz` (least-squares residual), in which a pointwise
//! Lagrange multiplier on the boundary is advanced by an Uzawa step between
//! rounds of Adam on the network parameters. Penalty-only and hard-BC
//! baselines share the same machinery, and a finite-difference oracle
//! reproduces the continuum iteration with exact inner solves so the
//! convergence theory can be checked numerically.
//!
//! Module map:
//!
//! * [`autodiff`] — scalar reverse-mode tape and second-order jets,
//!   composable so parameter gradients flow through spatial derivatives.
//! * [`network`] — the SiLU multilayer perceptron, its jet evaluation and
//!   the hard-BC output conditioning.
//! * [`sampling`] — collocation point sets with quadrature weights on the
//!   unit interval, the L-shaped domain, and unit balls.
//! * [`losses`] — discrete Ritz and residual Lagrangians.
//! * [`uzawa`] — the outer multiplier iteration around Adam.
//! * [`problems`] — benchmark problems, exact solutions, error metrics.
//! * [`reference_fd`] — the network-free finite-difference Uzawa oracle.
//! * [`cli`] — config parsing, the experiment runner and SVG plots.

pub mod autodiff;
pub mod cli;
pub mod losses;
pub mod network;
pub mod problems;
pub mod reference_fd;
pub mod sampling;
pub mod uzawa;

pub use autodiff::{Jet2, Scalar, Tape, Var};
pub use network::MlpParams;
pub use problems::Problem;
pub use sampling::{Domain, PointSet};

/// Second-order jet over plain numbers, used when differentiating
/// closed-form expressions rather than network parameters.
pub type Jet = Jet2<f64>;
