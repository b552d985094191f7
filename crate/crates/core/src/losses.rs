//! Discrete energy functionals.
//!
//! Both Lagrangians share the boundary block
//! `sum_b w_b ( gamma/2 (u-g)^2(b) - (u(b)-g(b)) lambda(b) )`;
//! dropping the multiplier recovers the penalty-only functionals. The
//! interior block is either the Ritz energy
//! `sum_y w_y ( eps/2 |grad u|^2 + 1/2 u^2 - u f )(y)` or the squared
//! strong residual `1/2 sum_y w_y (Lu - f)^2(y)` with `Lu = -eps lap u + u`.
//! Duality pairings are plain weighted boundary sums; reductions run left
//! to right in point order so a fixed seed reproduces losses bitwise.

use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{spatial_gradient_of, laplacian_of, Scalar, Var};
use crate::network::BoundNet;
use crate::problems::ExactSolution;
use crate::sampling::PointSet;
use crate::uzawa::Multiplier;

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("epsilon must be positive (got {0})")]
    BadEpsilon(f64),
    #[error("gamma must be non-negative (got {0})")]
    NegativeGamma(f64),
    #[error("multiplier values must pair pointwise with the boundary set")]
    MultiplierSetMismatch,
    #[error("quadrature set is empty")]
    EmptyQuadrature,
}

/// Coefficients and data of the model problem `-div(eps grad u) + u = f`,
/// `u = g` on the boundary. `include_reaction = false` drops the zeroth
/// order term (the pure Laplace setting of the high-dimensional runs).
#[derive(Clone)]
pub struct PdeData {
    pub epsilon: f64,
    pub include_reaction: bool,
    pub f: PointFn,
    pub g: PointFn,
}

impl PdeData {
    pub fn new(
        epsilon: f64,
        include_reaction: bool,
        f: PointFn,
        g: PointFn,
    ) -> Result<Self, LossError> {
        if epsilon <= 0.0 {
            return Err(LossError::BadEpsilon(epsilon));
        }
        Ok(PdeData {
            epsilon,
            include_reaction,
            f,
            g,
        })
    }
}

/// A differentiable scalar field over the domain: the plain network, or
/// the network under hard-BC output conditioning. All returned nodes stay
/// differentiable with respect to the parameters.
pub trait Field<'t> {
    fn value(&self, x: &[f64]) -> Var<'t>;
    /// Value and spatial gradient in one pass.
    fn value_grad(&self, x: &[f64]) -> (Var<'t>, Vec<Var<'t>>);
    /// Value and Laplacian in one pass.
    fn value_lap(&self, x: &[f64]) -> (Var<'t>, Var<'t>);
}

impl<'t> Field<'t> for BoundNet<'t> {
    fn value(&self, x: &[f64]) -> Var<'t> {
        self.eval(x)
    }

    fn value_grad(&self, x: &[f64]) -> (Var<'t>, Vec<Var<'t>>) {
        let dirs = crate::network::coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
        let jets = self.eval_jets(x, &refs, false);
        (jets.value, jets.d1)
    }

    fn value_lap(&self, x: &[f64]) -> (Var<'t>, Var<'t>) {
        let dirs = crate::network::coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
        let jets = self.eval_jets(x, &refs, true);
        let mut lap = jets.d2[0];
        for &d in &jets.d2[1..] {
            lap = lap + d;
        }
        (jets.value, lap)
    }
}

/// Hard boundary conditioning on the unit ball,
/// `w = (1 - |x|^2) u_theta + |x|^2 u*`. The closed-form part contributes
/// plain constants; only `u_theta` carries parameter dependence.
pub struct HardBallField<'a, 't> {
    pub net: &'a BoundNet<'t>,
    pub exact: &'a ExactSolution,
}

impl<'a, 't> HardBallField<'a, 't> {
    fn blend_consts(&self, x: &[f64]) -> (f64, f64) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let v = (self.exact.value)(x);
        (r2, v)
    }

    fn exact_grad(&self, x: &[f64]) -> Vec<f64> {
        spatial_gradient_of(|xj| (self.exact.jet)(xj), x)
    }
}

impl<'a, 't> Field<'t> for HardBallField<'a, 't> {
    fn value(&self, x: &[f64]) -> Var<'t> {
        let (r2, v) = self.blend_consts(x);
        self.net.eval(x).scale(1.0 - r2).add_const(r2 * v)
    }

    fn value_grad(&self, x: &[f64]) -> (Var<'t>, Vec<Var<'t>>) {
        let (r2, v) = self.blend_consts(x);
        let gv = self.exact_grad(x);
        let dirs = crate::network::coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|d| d.as_slice()).collect();
        let jets = self.net.eval_jets(x, &refs, false);
        let u = jets.value;
        let w = u.scale(1.0 - r2).add_const(r2 * v);
        let grad = (0..x.len())
            .map(|i| {
                // d_i w = (1-r2) d_i u - 2 x_i u + [2 x_i u* + r2 d_i u*]
                jets.d1[i].scale(1.0 - r2) + u.scale(-2.0 * x[i])
                    + u.constant_like(2.0 * x[i] * v + r2 * gv[i])
            })
            .collect();
        (w, grad)
    }

    fn value_lap(&self, x: &[f64]) -> (Var<'t>, Var<'t>) {
        let (r2, v) = self.blend_consts(x);
        let gv = self.exact_grad(x);
        let lap_v = laplacian_of(|xj| (self.exact.jet)(xj), x);
        let d = x.len() as f64;
        let dirs = crate::network::coordinate_dirs(x.len());
        let refs: Vec<&[f64]> = dirs.iter().map(|dd| dd.as_slice()).collect();
        let jets = self.net.eval_jets(x, &refs, true);
        let u = jets.value;
        let w = u.scale(1.0 - r2).add_const(r2 * v);
        let mut lap_u = jets.d2[0];
        let mut x_dot_grad = jets.d1[0].scale(x[0]);
        for i in 1..x.len() {
            lap_u = lap_u + jets.d2[i];
            x_dot_grad = x_dot_grad + jets.d1[i].scale(x[i]);
        }
        // lap w = (1-r2) lap u - 4 x.grad u - 2 d u + [2 d u* + 4 x.grad u* + r2 lap u*]
        let x_dot_gv: f64 = x.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let lap = lap_u.scale(1.0 - r2) + x_dot_grad.scale(-4.0) + u.scale(-2.0 * d)
            + u.constant_like(2.0 * d * v + 4.0 * x_dot_gv + r2 * lap_v);
        (w, lap)
    }
}

/// Strong residual `L u - f` at one point.
pub fn residual<'t>(field: &impl Field<'t>, x: &[f64], data: &PdeData) -> Var<'t> {
    let (u, lap) = field.value_lap(x);
    let mut r = lap.scale(-data.epsilon);
    if data.include_reaction {
        r = r + u;
    }
    r.add_const(-(data.f)(x))
}

/// Shared boundary block of both Lagrangians.
fn boundary_block<'t>(
    field: &impl Field<'t>,
    lambda: Option<&Multiplier>,
    boundary: &PointSet,
    gamma: f64,
    data: &PdeData,
) -> Result<Option<Var<'t>>, LossError> {
    if gamma < 0.0 {
        return Err(LossError::NegativeGamma(gamma));
    }
    if let Some(lam) = lambda {
        if !lam.points.same_points(boundary) {
            return Err(LossError::MultiplierSetMismatch);
        }
    }
    let mut acc: Option<Var<'t>> = None;
    for (i, (b, w)) in boundary.iter().enumerate() {
        let mismatch = field.value(b).add_const(-(data.g)(b));
        let mut term = (mismatch * mismatch).scale(0.5 * gamma);
        if let Some(lam) = lambda {
            term = term - mismatch.scale(lam.values[i]);
        }
        let weighted = term.scale(w);
        acc = Some(match acc {
            None => weighted,
            Some(a) => a + weighted,
        });
    }
    Ok(acc)
}

/// Discrete Ritz Lagrangian; with `lambda = None` this is the penalty
/// functional, and an empty boundary set drops the boundary block
/// entirely (hard-BC training).
pub fn ritz_lagrangian<'t>(
    field: &impl Field<'t>,
    lambda: Option<&Multiplier>,
    interior: &PointSet,
    boundary: &PointSet,
    gamma: f64,
    data: &PdeData,
) -> Result<Var<'t>, LossError> {
    if interior.is_empty() {
        return Err(LossError::EmptyQuadrature);
    }
    let mut acc: Option<Var<'t>> = None;
    for (y, w) in interior.iter() {
        let (u, grad) = field.value_grad(y);
        let mut sq = grad[0] * grad[0];
        for g in &grad[1..] {
            sq = sq + *g * *g;
        }
        let mut term = sq.scale(0.5 * data.epsilon);
        if data.include_reaction {
            term = term + (u * u).scale(0.5);
        }
        let fv = (data.f)(y);
        if fv != 0.0 {
            term = term - u.scale(fv);
        }
        let weighted = term.scale(w);
        acc = Some(match acc {
            None => weighted,
            Some(a) => a + weighted,
        });
    }
    let mut total = acc.expect("non-empty interior");
    if let Some(b) = boundary_block(field, lambda, boundary, gamma, data)? {
        total = total + b;
    }
    Ok(total)
}

/// Discrete least-squares (residual) Lagrangian; boundary block as in
/// [`ritz_lagrangian`].
pub fn pinn_lagrangian<'t>(
    field: &impl Field<'t>,
    lambda: Option<&Multiplier>,
    interior: &PointSet,
    boundary: &PointSet,
    gamma: f64,
    data: &PdeData,
) -> Result<Var<'t>, LossError> {
    if interior.is_empty() {
        return Err(LossError::EmptyQuadrature);
    }
    let mut acc: Option<Var<'t>> = None;
    for (y, w) in interior.iter() {
        let r = residual(field, y, data);
        let weighted = (r * r).scale(0.5 * w);
        acc = Some(match acc {
            None => weighted,
            Some(a) => a + weighted,
        });
    }
    let mut total = acc.expect("non-empty interior");
    if let Some(b) = boundary_block(field, lambda, boundary, gamma, data)? {
        total = total + b;
    }
    Ok(total)
}
