//! Network-free continuum oracle on the unit interval.
//!
//! The inner minimization of the Ritz Lagrangian is discretized with
//! piecewise-linear finite elements whose boundary degrees of freedom are
//! free (natural), so the multiplier enters exactly as in the continuum
//! scheme: solve `(eps K + M + gamma B^T B) u = M f + B^T (gamma g + lambda)`,
//! then step `lambda <- lambda - rho (B u - g)`. All solves are exact
//! (Thomas algorithm), which makes the saddle-point identities hold to
//! rounding and exposes the sharp convergence threshold of the
//! multiplier iteration through a 2x2 boundary Schur complement.
//!
//! The boundary of the interval is two points, so the dual space is R^2
//! with the Euclidean norm and an identity Riesz map; this mirrors the
//! simplification to plain boundary sums used by the network losses.

/// Values attached to the two endpoints `x = 0` and `x = 1`: multipliers,
/// traces, boundary data and boundary errors all live here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair(pub f64, pub f64);

impl BoundaryPair {
    pub const ZERO: BoundaryPair = BoundaryPair(0.0, 0.0);

    pub fn norm(self) -> f64 {
        (self.0 * self.0 + self.1 * self.1).sqrt()
    }

    pub fn dot(self, o: BoundaryPair) -> f64 {
        self.0 * o.0 + self.1 * o.1
    }
}

impl std::ops::Sub for BoundaryPair {
    type Output = BoundaryPair;
    fn sub(self, o: BoundaryPair) -> BoundaryPair {
        BoundaryPair(self.0 - o.0, self.1 - o.1)
    }
}

/// Uniform grid with `n` interior nodes; endpoints are degrees of freedom.
#[derive(Debug, Clone, Copy)]
pub struct FdGrid {
    pub n: usize,
}

impl FdGrid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        FdGrid { n }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn dofs(&self) -> usize {
        self.n + 2
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Stiffness matrix of `-u''` with free ends: `1/h tridiag(-1, 2, -1)`
    /// with unit corners. Returned as (diagonal, off-diagonal).
    pub fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dofs();
        let h = self.h();
        let mut diag = vec![2.0 / h; m];
        diag[0] = 1.0 / h;
        diag[m - 1] = 1.0 / h;
        (diag, vec![-1.0 / h; m - 1])
    }

    /// Consistent P1 mass matrix.
    pub fn mass(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dofs();
        let h = self.h();
        let mut diag = vec![2.0 * h / 3.0; m];
        diag[0] = h / 3.0;
        diag[m - 1] = h / 3.0;
        (diag, vec![h / 6.0; m - 1])
    }

    /// `eps K + M`.
    pub fn operator(&self, epsilon: f64) -> (Vec<f64>, Vec<f64>) {
        let (kd, ko) = self.stiffness();
        let (md, mo) = self.mass();
        let diag = kd.iter().zip(&md).map(|(k, m)| epsilon * k + m).collect();
        let off = ko.iter().zip(&mo).map(|(k, m)| epsilon * k + m).collect();
        (diag, off)
    }

    /// Load vector `M f_h` from nodal samples of `f`.
    pub fn load(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let fv: Vec<f64> = (0..self.dofs()).map(|i| f(self.node(i))).collect();
        let (md, mo) = self.mass();
        tridiag_apply(&md, &mo, &fv)
    }
}

/// `y = T x` for a symmetric tridiagonal `T`.
pub fn tridiag_apply(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut v = diag[i] * x[i];
        if i > 0 {
            v += off[i - 1] * x[i - 1];
        }
        if i + 1 < m {
            v += off[i] * x[i + 1];
        }
        y[i] = v;
    }
    y
}

/// Thomas solve of a symmetric tridiagonal SPD system.
pub fn tridiag_solve(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    assert!(m >= 1 && rhs.len() == m && off.len() + 1 == m);
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = off.first().copied().unwrap_or(0.0) / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < m {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Exact inner solve: `argmin_u L_D(u, lambda)` on the grid, i.e.
/// `(eps K + M + gamma B^T B) u = M f + B^T (gamma g + lambda)`.
pub fn fd_inner_solve(
    lambda: BoundaryPair,
    gamma: f64,
    epsilon: f64,
    f: &dyn Fn(f64) -> f64,
    g: BoundaryPair,
    grid: &FdGrid,
) -> Vec<f64> {
    let (mut diag, off) = grid.operator(epsilon);
    let m = grid.dofs();
    diag[0] += gamma;
    diag[m - 1] += gamma;
    let mut rhs = grid.load(f);
    rhs[0] += gamma * g.0 + lambda.0;
    rhs[m - 1] += gamma * g.1 + lambda.1;
    tridiag_solve(&diag, &off, &rhs)
}

/// The discrete saddle point: the Dirichlet-constrained solution and the
/// multiplier it implies (the boundary residual of the free operator,
/// i.e. the discrete conormal flux).
pub fn fd_saddle_point(
    epsilon: f64,
    f: &dyn Fn(f64) -> f64,
    g: BoundaryPair,
    grid: &FdGrid,
) -> (Vec<f64>, BoundaryPair) {
    let (diag, off) = grid.operator(epsilon);
    let rhs = grid.load(f);
    let m = grid.dofs();
    // Interior solve with the boundary values eliminated.
    let idiag = diag[1..m - 1].to_vec();
    let ioff = off[1..m - 2].to_vec();
    let mut irhs = rhs[1..m - 1].to_vec();
    irhs[0] -= off[0] * g.0;
    irhs[m - 3] -= off[m - 2] * g.1;
    let ui = tridiag_solve(&idiag, &ioff, &irhs);
    let mut u = Vec::with_capacity(m);
    u.push(g.0);
    u.extend(ui);
    u.push(g.1);
    let au = tridiag_apply(&diag, &off, &u);
    let lambda = BoundaryPair(au[0] - rhs[0], au[m - 1] - rhs[m - 1]);
    (u, lambda)
}

/// Discrete Ritz Lagrangian value at `(u, lambda)`.
pub fn fd_lagrangian(
    u: &[f64],
    lambda: BoundaryPair,
    gamma: f64,
    epsilon: f64,
    f: &dyn Fn(f64) -> f64,
    g: BoundaryPair,
    grid: &FdGrid,
) -> f64 {
    let (diag, off) = grid.operator(epsilon);
    let au = tridiag_apply(&diag, &off, u);
    let load = grid.load(f);
    let m = grid.dofs();
    let quad = 0.5 * dot(&au, u) - dot(&load, u);
    let bu = BoundaryPair(u[0] - g.0, u[m - 1] - g.1);
    quad + 0.5 * gamma * bu.dot(bu) - lambda.dot(bu)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One recorded multiplier iteration step.
#[derive(Debug, Clone)]
pub struct FdStep {
    pub k: usize,
    /// Multiplier entering the step.
    pub lambda: BoundaryPair,
    /// Boundary trace of the inner solution.
    pub trace: BoundaryPair,
    /// `|lambda^k - lambda*|` (Euclidean, the discrete dual norm).
    pub lambda_error: f64,
    /// Full H1 error of the inner solution against the saddle solution.
    pub h1_error: f64,
    /// L2 error (mass norm), relative to the saddle solution norm.
    pub rel_l2_error: f64,
    pub boundary_error: f64,
    /// Residual of the energy identity
    /// `a(e,e) + gamma |Be|^2 = <lambda^k - lambda*, Be>`.
    pub energy_identity_residual: f64,
    /// Residual of the multiplier recursion
    /// `|l^{k+1}-l*|^2 = |l^k-l*|^2 + rho^2 |Be|^2 - 2 rho <l^k-l*, Be>`.
    pub recursion_identity_residual: f64,
    /// Lagrangian value at `(u^k, lambda^k)`.
    pub loss: f64,
}

#[derive(Debug)]
pub struct FdRun {
    pub steps: Vec<FdStep>,
    pub u_star: Vec<f64>,
    pub lambda_star: BoundaryPair,
    pub final_u: Vec<f64>,
}

/// Run `k_max` exact-inner-solve Uzawa steps from `lambda0`.
/// Divergence is data, not an error; `rho = 0` freezes the multiplier.
#[allow(clippy::too_many_arguments)]
pub fn fd_uzawa(
    gamma: f64,
    rho: f64,
    epsilon: f64,
    f: &dyn Fn(f64) -> f64,
    g: BoundaryPair,
    grid: &FdGrid,
    k_max: usize,
    lambda0: BoundaryPair,
) -> FdRun {
    assert!(rho >= 0.0);
    let (u_star, lambda_star) = fd_saddle_point(epsilon, f, g, grid);
    let (kd, ko) = grid.stiffness();
    let (md, mo) = grid.mass();
    let (ad, ao) = grid.operator(epsilon);
    let ustar_l2 = {
        let mu = tridiag_apply(&md, &mo, &u_star);
        dot(&mu, &u_star).sqrt()
    };
    let m = grid.dofs();
    let mut lambda = lambda0;
    let mut steps = Vec::with_capacity(k_max);
    let mut u = Vec::new();
    for k in 1..=k_max {
        u = fd_inner_solve(lambda, gamma, epsilon, f, g, grid);
        let e: Vec<f64> = u.iter().zip(&u_star).map(|(a, b)| a - b).collect();
        let be = BoundaryPair(e[0], e[m - 1]);
        let e_lambda = lambda - lambda_star;
        // a(e,e) + gamma |Be|^2 = <e_lambda, Be> at the discrete level.
        let ae = tridiag_apply(&ad, &ao, &e);
        let energy = dot(&ae, &e) + gamma * be.dot(be);
        let energy_residual = (energy - e_lambda.dot(be)).abs();
        // Multiplier step and its recursion identity.
        let next = BoundaryPair(
            lambda.0 - rho * (u[0] - g.0),
            lambda.1 - rho * (u[m - 1] - g.1),
        );
        let next_err2 = {
            let d = next - lambda_star;
            d.dot(d)
        };
        let rec = e_lambda.dot(e_lambda) + rho * rho * be.dot(be) - 2.0 * rho * e_lambda.dot(be);
        let recursion_residual = (next_err2 - rec).abs();
        let h1 = {
            let ke = tridiag_apply(&kd, &ko, &e);
            let me = tridiag_apply(&md, &mo, &e);
            (dot(&ke, &e) + dot(&me, &e)).sqrt()
        };
        let l2 = {
            let me = tridiag_apply(&md, &mo, &e);
            dot(&me, &e).sqrt() / ustar_l2
        };
        steps.push(FdStep {
            k,
            lambda,
            trace: BoundaryPair(u[0], u[m - 1]),
            lambda_error: e_lambda.norm(),
            h1_error: h1,
            rel_l2_error: l2,
            boundary_error: BoundaryPair(u[0] - g.0, u[m - 1] - g.1).norm(),
            energy_identity_residual: energy_residual,
            recursion_identity_residual: recursion_residual,
            loss: fd_lagrangian(&u, lambda, gamma, epsilon, f, g, grid),
        });
        lambda = next;
        if !lambda.norm().is_finite() {
            break;
        }
    }
    FdRun {
        steps,
        u_star,
        lambda_star,
        final_u: u,
    }
}

/// Spectral radius of the affine multiplier-error iteration
/// `e^{k+1} = (I - rho S) e^k`, where `S` is the 2x2 boundary Schur
/// complement of the regularized operator. Radius below one is exactly
/// the convergence criterion of the exact-inner-solve iteration.
pub fn iteration_spectral_radius(gamma: f64, rho: f64, epsilon: f64, grid: &FdGrid) -> f64 {
    let (mut diag, off) = grid.operator(epsilon);
    let m = grid.dofs();
    diag[0] += gamma;
    diag[m - 1] += gamma;
    let mut s = [[0.0; 2]; 2];
    for (j, load_idx) in [(0usize, 0usize), (1, m - 1)] {
        let mut rhs = vec![0.0; m];
        rhs[load_idx] = 1.0;
        let z = tridiag_solve(&diag, &off, &rhs);
        s[0][j] = z[0];
        s[1][j] = z[m - 1];
    }
    // I - rho S is symmetric 2x2.
    let a = 1.0 - rho * s[0][0];
    let b = -rho * s[0][1];
    let c = 1.0 - rho * s[1][1];
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mid + rad).abs().max((mid - rad).abs())
}
