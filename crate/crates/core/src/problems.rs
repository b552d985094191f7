//! Benchmark problems: exact solutions, manufactured sources, error
//! metrics on fixed evaluation grids, and the star-shaped trace-constant
//! bound used for the step-size advisories.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{laplacian_of, Jet2};
use crate::losses::PdeData;
use crate::sampling::{
    lshape_boundary_grid, sample_boundary, sample_interior, stream_seed, Domain, PointKind,
    PointSet, StreamPurpose,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("epsilon must be positive (got {0})")]
    BadEpsilon(f64),
    #[error("dimension must be even and at least 2 (got {0})")]
    OddDimension(usize),
    #[error("trace bound needs a star-shaped domain; the L-shape is not supported")]
    NotStarShaped,
    #[error("x0 must lie strictly inside the domain")]
    BadCenter,
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error(transparent)]
    Loss(#[from] crate::losses::LossError),
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[Jet2<f64>]) -> Jet2<f64> + Send + Sync>;

/// A closed-form solution: plain evaluation plus a jet form so derivatives
/// come from the same expression.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: PointFn,
    pub jet: JetFn,
}

/// Which benchmark a run is on; carries everything the trainer and the
/// metrics need.
pub struct Problem {
    pub name: String,
    pub domain: Domain,
    pub data: PdeData,
    pub exact: Option<ExactSolution>,
    /// Fixed interior grid for error reporting.
    pub eval_grid: PointSet,
    /// Fixed boundary set for error reporting.
    pub boundary_eval: PointSet,
    /// Cached exact values and their weighted norm on `eval_grid`.
    grid_exact: Option<(Vec<f64>, f64)>,
}

impl Problem {
    /// Two-sided boundary layer on the unit interval:
    /// `-eps u'' + u = 1`, `u(0) = u(1) = 0`.
    pub fn boundary_layer(epsilon: f64) -> Result<Problem, ProblemError> {
        if epsilon <= 0.0 {
            return Err(ProblemError::BadEpsilon(epsilon));
        }
        let exact = ExactSolution {
            value: Arc::new(move |x: &[f64]| exact_boundary_layer(x[0], epsilon)),
            jet: Arc::new(move |x: &[Jet2<f64>]| boundary_layer_jet(x[0], epsilon)),
        };
        let data = PdeData::new(
            epsilon,
            true,
            Arc::new(|_: &[f64]| 1.0),
            Arc::new(|_: &[f64]| 0.0),
        )?;
        let n = 1000;
        let mut coords = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        for i in 0..=n {
            coords.push(i as f64 / n as f64);
            weights.push(if i == 0 || i == n {
                0.5 / n as f64
            } else {
                1.0 / n as f64
            });
        }
        let eval_grid = PointSet::from_parts(coords, 1, weights, PointKind::Interior, Domain::Interval);
        let boundary_eval = sample_boundary(Domain::Interval, 2, 0).expect("two endpoints");
        Ok(Problem::assemble(
            format!("boundary_layer(eps={epsilon})"),
            Domain::Interval,
            data,
            Some(exact),
            eval_grid,
            boundary_eval,
            true,
        ))
    }

    /// Reaction-diffusion on the L-shaped domain with the manufactured
    /// solution of [`exact_lshape`]; `f` and `g` are chosen to match it.
    pub fn lshape(epsilon: f64) -> Result<Problem, ProblemError> {
        if epsilon <= 0.0 {
            return Err(ProblemError::BadEpsilon(epsilon));
        }
        let exact = ExactSolution {
            value: Arc::new(|x: &[f64]| exact_lshape(x[0], x[1])),
            jet: Arc::new(|x: &[Jet2<f64>]| lshape_jet(x[0], x[1])),
        };
        let data = PdeData::new(
            epsilon,
            true,
            Arc::new(move |x: &[f64]| lshape_source(x[0], x[1], epsilon)),
            Arc::new(|x: &[f64]| exact_lshape(x[0], x[1])),
        )?;
        // 200x200 cell centers of the bounding square, masked to the domain.
        let n = 200;
        let h = 2.0 / n as f64;
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = [-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h];
                if Domain::LShape.contains(&p) {
                    coords.extend_from_slice(&p);
                    weights.push(h * h);
                }
            }
        }
        let eval_grid = PointSet::from_parts(coords, 2, weights, PointKind::Interior, Domain::LShape);
        let boundary_eval = lshape_boundary_grid(800);
        // The source is defined *from* the exact solution and is singular
        // at two corners, so the residual self-check is skipped here.
        Ok(Problem::assemble(
            format!("lshape(eps={epsilon})"),
            Domain::LShape,
            data,
            Some(exact),
            eval_grid,
            boundary_eval,
            false,
        ))
    }

    /// Laplace problem on the unit ball of even dimension `2d` with the
    /// harmonic boundary data `sum_i x_{2i-1} x_{2i}` (its own harmonic
    /// extension). With `include_reaction` the reaction-diffusion form of
    /// the operator is kept instead of the pure Laplacian; the manufactured
    /// data works for either form at any positive `epsilon` because the
    /// solution is harmonic.
    pub fn highdim(dim: usize, include_reaction: bool) -> Result<Problem, ProblemError> {
        Problem::highdim_with_epsilon(dim, include_reaction, 1.0)
    }

    pub fn highdim_with_epsilon(
        dim: usize,
        include_reaction: bool,
        epsilon: f64,
    ) -> Result<Problem, ProblemError> {
        if epsilon <= 0.0 {
            return Err(ProblemError::BadEpsilon(epsilon));
        }
        if dim < 2 || dim % 2 != 0 {
            return Err(ProblemError::OddDimension(dim));
        }
        let exact = ExactSolution {
            value: Arc::new(exact_highdim),
            jet: Arc::new(highdim_jet),
        };
        // With the reaction term on, -eps lap(u*) + u* = u*, so the
        // manufactured source is u* itself; for pure Laplace it vanishes.
        let f: PointFn = if include_reaction {
            Arc::new(exact_highdim)
        } else {
            Arc::new(|_: &[f64]| 0.0)
        };
        let data = PdeData::new(epsilon, include_reaction, f, Arc::new(exact_highdim))?;
        let domain = Domain::Ball { dim };
        let eval_grid = sample_interior(
            domain,
            1 << 15,
            stream_seed(0xE7A1, StreamPurpose::EvalGrid, dim as u64),
        )
        .expect("nonempty");
        let boundary_eval = sample_boundary(
            domain,
            4096,
            stream_seed(0xE7A1, StreamPurpose::BoundaryEval, dim as u64),
        )
        .expect("nonempty");
        Ok(Problem::assemble(
            format!("highdim(dim={dim})"),
            domain,
            data,
            Some(exact),
            eval_grid,
            boundary_eval,
            true,
        ))
    }

    fn assemble(
        name: String,
        domain: Domain,
        data: PdeData,
        exact: Option<ExactSolution>,
        eval_grid: PointSet,
        boundary_eval: PointSet,
        residual_check: bool,
    ) -> Problem {
        let grid_exact = exact.as_ref().map(|ex| {
            let vals: Vec<f64> = eval_grid.iter().map(|(p, _)| (ex.value)(p)).collect();
            let norm = eval_grid
                .iter()
                .zip(&vals)
                .map(|((_, w), v)| w * v * v)
                .sum::<f64>()
                .sqrt();
            (vals, norm)
        });
        let p = Problem {
            name,
            domain,
            data,
            exact,
            eval_grid,
            boundary_eval,
            grid_exact,
        };
        if residual_check {
            p.assert_exact_satisfies_pde();
        }
        p
    }

    /// Constructor self-test: the stored exact solution satisfies the PDE
    /// at 100 random interior points.
    fn assert_exact_satisfies_pde(&self) {
        let ex = self.exact.as_ref().expect("checked problems have exact solutions");
        let pts = sample_interior(self.domain, 100, 0xC0FFEE).expect("nonempty");
        for (x, _) in pts.iter() {
            let lap = laplacian_of(|xj| (ex.jet)(xj), x);
            let u = (ex.value)(x);
            let reaction = if self.data.include_reaction { u } else { 0.0 };
            let r = -self.data.epsilon * lap + reaction - (self.data.f)(x);
            assert!(
                r.abs() <= 1e-8,
                "{}: exact solution violates the PDE at {x:?} (residual {r})",
                self.name
            );
        }
    }

    /// Weighted L2 distance between a field and the exact solution on the
    /// evaluation grid.
    pub fn l2_error(&self, field: impl Fn(&[f64]) -> f64) -> Result<f64, ProblemError> {
        let (vals, _) = self.grid_exact.as_ref().ok_or(ProblemError::NoExactSolution)?;
        let mut acc = 0.0;
        for ((p, w), ex) in self.eval_grid.iter().zip(vals) {
            let d = field(p) - ex;
            acc += w * d * d;
        }
        Ok(acc.sqrt())
    }

    /// Same as [`Problem::l2_error`] for field values precomputed on the
    /// evaluation grid (batched network evaluation).
    pub fn l2_error_from_values(&self, field_vals: &[f64]) -> Result<f64, ProblemError> {
        let (vals, _) = self.grid_exact.as_ref().ok_or(ProblemError::NoExactSolution)?;
        assert_eq!(field_vals.len(), self.eval_grid.len());
        let mut acc = 0.0;
        for ((( _p, w), ex), v) in self.eval_grid.iter().zip(vals).zip(field_vals) {
            let d = v - ex;
            acc += w * d * d;
        }
        Ok(acc.sqrt())
    }

    pub fn relative_l2_error_from_values(&self, field_vals: &[f64]) -> Result<f64, ProblemError> {
        let (_, norm) = self.grid_exact.as_ref().ok_or(ProblemError::NoExactSolution)?;
        Ok(self.l2_error_from_values(field_vals)? / norm)
    }

    /// Boundary mismatch from values precomputed on `boundary_eval`.
    pub fn boundary_l2_error_from_values(&self, field_vals: &[f64]) -> f64 {
        assert_eq!(field_vals.len(), self.boundary_eval.len());
        let mut acc = 0.0;
        for ((p, w), v) in self.boundary_eval.iter().zip(field_vals) {
            let d = v - (self.data.g)(p);
            acc += w * d * d;
        }
        acc.sqrt()
    }

    /// Exact-solution values cached on the evaluation grid.
    pub fn grid_exact_values(&self) -> Option<&[f64]> {
        self.grid_exact.as_ref().map(|(v, _)| v.as_slice())
    }

    /// L2 error divided by the L2 norm of the exact solution.
    pub fn relative_l2_error(&self, field: impl Fn(&[f64]) -> f64) -> Result<f64, ProblemError> {
        let (_, norm) = self.grid_exact.as_ref().ok_or(ProblemError::NoExactSolution)?;
        Ok(self.l2_error(field)? / norm)
    }

    /// L2 mismatch against the boundary data on the fixed boundary set.
    pub fn boundary_l2_error(&self, field: impl Fn(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.boundary_eval.iter() {
            let d = field(p) - (self.data.g)(p);
            acc += w * d * d;
        }
        acc.sqrt()
    }

    /// Full H1 error on the interval: the L2 part plus the first-derivative
    /// mismatch, both by trapezoid quadrature on the evaluation grid. The
    /// field is queried as `(value, derivative)` pairs.
    pub fn h1_error_1d(&self, field: impl Fn(f64) -> (f64, f64)) -> Result<f64, ProblemError> {
        if self.domain != Domain::Interval {
            return Err(ProblemError::NoExactSolution);
        }
        let ex = self.exact.as_ref().ok_or(ProblemError::NoExactSolution)?;
        let mut acc = 0.0;
        for (p, w) in self.eval_grid.iter() {
            let j = (ex.jet)(&[Jet2::variable(p[0], 1.0)]);
            let (v, dv) = field(p[0]);
            acc += w * ((v - j.v) * (v - j.v) + (dv - j.d1) * (dv - j.d1));
        }
        Ok(acc.sqrt())
    }

    /// Norm of the exact solution on the evaluation grid.
    pub fn exact_norm(&self) -> Option<f64> {
        self.grid_exact.as_ref().map(|(_, n)| *n)
    }
}

/// Exact solution of the two-sided boundary-layer problem, evaluated in
/// the overflow-free form (numerator and denominator divided by the
/// largest exponential).
pub fn exact_boundary_layer(x: f64, epsilon: f64) -> f64 {
    let se = epsilon.sqrt();
    1.0 - ((-x / se).exp() + ((x - 1.0) / se).exp()) / (1.0 + (-1.0 / se).exp())
}

/// Spatial derivative of [`exact_boundary_layer`], same stabilization.
pub fn boundary_layer_derivative(x: f64, epsilon: f64) -> f64 {
    let se = epsilon.sqrt();
    ((-x / se).exp() - ((x - 1.0) / se).exp()) / (se * (1.0 + (-1.0 / se).exp()))
}

fn boundary_layer_jet(x: Jet2<f64>, epsilon: f64) -> Jet2<f64> {
    let se = epsilon.sqrt();
    let denom = 1.0 + (-1.0 / se).exp();
    let a = (-x).scale(1.0 / se).exp();
    let b = x.add_const(-1.0).scale(1.0 / se).exp();
    (a + b).scale(-1.0 / denom).add_const(1.0)
}

/// Manufactured solution on the L-shaped domain: a fractional-power
/// angular mode at the re-entrant corner times a second mode anchored at
/// the opposite corner `(-1, 1)`.
pub fn exact_lshape(x: f64, y: f64) -> f64 {
    let p = (x * x + y * y).powf(2.0 / 3.0) * ((2.0 / 3.0) * (f64::atan2(y, -x) - PI)).sin();
    let q = ((x + 1.0) * (x + 1.0) + (y - 1.0) * (y - 1.0)).powf(2.0 / 3.0)
        * (2.0 * f64::atan2(y - 1.0, x + 1.0)).sin();
    p * q
}

fn lshape_jet(x: Jet2<f64>, y: Jet2<f64>) -> Jet2<f64> {
    let p = (x * x + y * y)
        .powf(2.0 / 3.0)
        * (y.atan2(-x).add_const(-PI)).scale(2.0 / 3.0).sin();
    let xp = x.add_const(1.0);
    let ym = y.add_const(-1.0);
    let q = (xp * xp + ym * ym).powf(2.0 / 3.0) * ym.atan2(xp).scale(2.0).sin();
    p * q
}

/// The two factors of [`exact_lshape`] with gradient and Laplacian in
/// closed form (polar identities around each anchor corner).
fn lshape_factor_derivs(cx: f64, cy: f64) -> (f64, [f64; 2], f64) {
    // First factor around the origin: P = (r^2)^{2/3} sin((2/3)(A - pi)),
    // A = atan2(y, -x); grad A = (y, -x) / r^2 and dA/dtheta = -1, so the
    // polar Laplacian gives Delta P = (4/3) (r^2)^{-1/3} sin(..).
    let r2 = cx * cx + cy * cy;
    let ang = (2.0 / 3.0) * (f64::atan2(cy, -cx) - PI);
    let (s, c) = (ang.sin(), ang.cos());
    let r2m = r2.powf(-1.0 / 3.0);
    let radial = r2.powf(2.0 / 3.0);
    let p = radial * s;
    let gp = [
        (4.0 / 3.0) * cx * r2m * s + radial * c * (2.0 / 3.0) * (cy / r2),
        (4.0 / 3.0) * cy * r2m * s + radial * c * (2.0 / 3.0) * (-cx / r2),
    ];
    let lap_p = (4.0 / 3.0) * r2m * s;
    (p, gp, lap_p)
}

fn lshape_second_factor_derivs(cx: f64, cy: f64) -> (f64, [f64; 2], f64) {
    // Second factor around (-1, 1): Q = (rho^2)^{2/3} sin(2 phi),
    // phi = atan2(y-1, x+1); tau'' = -4 tau so
    // Delta Q = ((16/9) - 4) (rho^2)^{-1/3} sin(2 phi).
    let (u, v) = (cx + 1.0, cy - 1.0);
    let rho2 = u * u + v * v;
    let phi = f64::atan2(v, u);
    let (s, c) = ((2.0 * phi).sin(), (2.0 * phi).cos());
    let rm = rho2.powf(-1.0 / 3.0);
    let radial = rho2.powf(2.0 / 3.0);
    let q = radial * s;
    let gq = [
        (4.0 / 3.0) * u * rm * s + radial * c * 2.0 * (-v / rho2),
        (4.0 / 3.0) * v * rm * s + radial * c * 2.0 * (u / rho2),
    ];
    let lap_q = (16.0 / 9.0 - 4.0) * rm * s;
    (q, gq, lap_q)
}

/// Laplacian of [`exact_lshape`] by the product rule on the closed-form
/// factor derivatives. Unbounded at the two anchor corners.
pub fn lshape_laplacian(x: f64, y: f64) -> f64 {
    let (p, gp, lp) = lshape_factor_derivs(x, y);
    let (q, gq, lq) = lshape_second_factor_derivs(x, y);
    q * lp + 2.0 * (gp[0] * gq[0] + gp[1] * gq[1]) + p * lq
}

/// Manufactured source `f = -eps lap(u*) + u*` for the L-shape problem.
///
/// Exactly at the two singular corners the Laplacian part is evaluated at
/// an inward offset of 1e-12 (the solution factor itself vanishes there);
/// those points are measure-zero and excluded from interior sampling.
pub fn lshape_source(x: f64, y: f64, epsilon: f64) -> f64 {
    let u = exact_lshape(x, y);
    let corner = (x * x + y * y) < 1e-24;
    let far_corner = ((x + 1.0) * (x + 1.0) + (y - 1.0) * (y - 1.0)) < 1e-24;
    let (lx, ly) = if corner {
        (1e-12, 1e-12)
    } else if far_corner {
        (-1.0 + 1e-12, 1.0 - 1e-12)
    } else {
        (x, y)
    };
    -epsilon * lshape_laplacian(lx, ly) + u
}

/// Harmonic pairing polynomial on even-dimensional space:
/// `sum_i x_{2i-1} x_{2i}`.
pub fn exact_highdim(x: &[f64]) -> f64 {
    assert!(x.len() % 2 == 0, "pairing polynomial needs even dimension");
    x.chunks_exact(2).map(|p| p[0] * p[1]).sum()
}

/// Gradient of [`exact_highdim`]: the paired coordinate.
pub fn exact_highdim_gradient(x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for i in (0..x.len()).step_by(2) {
        g[i] = x[i + 1];
        g[i + 1] = x[i];
    }
    g
}

fn highdim_jet(x: &[Jet2<f64>]) -> Jet2<f64> {
    let mut acc = Jet2::constant(0.0);
    for p in x.chunks_exact(2) {
        acc = acc + p[0] * p[1];
    }
    acc
}

/// Closed-form trace-constant bound for a domain star-shaped with respect
/// to `x0`:
/// `C_tr <= (d + sqrt(d^2 + 4 max |x-x0|^2)) / (2 min (x-x0).n)`.
pub fn trace_constant_bound(domain: Domain, x0: &[f64]) -> Result<f64, ProblemError> {
    match domain {
        Domain::Interval => {
            let c = x0[0];
            if !(0.0 < c && c < 1.0) {
                return Err(ProblemError::BadCenter);
            }
            let min_xn = c.min(1.0 - c);
            let max_r2 = c.max(1.0 - c).powi(2);
            Ok(trace_bound_formula(1.0, min_xn, max_r2))
        }
        Domain::Ball { dim } => {
            let r0: f64 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r0 >= 1.0 {
                return Err(ProblemError::BadCenter);
            }
            let min_xn = 1.0 - r0;
            let max_r2 = (1.0 + r0).powi(2);
            Ok(trace_bound_formula(dim as f64, min_xn, max_r2))
        }
        Domain::LShape => Err(ProblemError::NotStarShaped),
    }
}

/// The bound as a function of dimension, the minimal `(x-x0).n` over the
/// boundary and the maximal squared distance from `x0`.
pub fn trace_bound_formula(d: f64, min_xn: f64, max_r2: f64) -> f64 {
    (d + (d * d + 4.0 * max_r2).sqrt()) / (2.0 * min_xn)
}

/// Largest Uzawa step admitted by the sufficient convergence condition
/// `rho - 2 gamma < 2 min(sigma_min, 1) / C_tr^2` (with `A = eps I`).
pub fn admissible_rho_bound(c_tr: f64, epsilon: f64, gamma: f64) -> f64 {
    2.0 * epsilon.min(1.0) / (c_tr * c_tr) + 2.0 * gamma
}
