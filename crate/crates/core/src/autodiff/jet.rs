use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::Scalar;
use super::tape::AutodiffError;

/// Truncated second-order Taylor coefficients of a quantity along one unit
/// direction in input space: value, first and second directional
/// derivative.
///
/// Arithmetic follows the usual jet rules, e.g. for a product
/// `(a b).d2 = a.d2 b.v + 2 a.d1 b.d1 + a.v b.d2`, and unary functions use
/// `f(v)`, `f'(v) d1`, `f''(v) d1^2 + f'(v) d2`. With `S` a tape variable
/// the three components are graph nodes, so losses built from them remain
/// differentiable with respect to the network parameters.
#[derive(Debug, Clone, Copy)]
pub struct Jet2<S> {
    pub v: S,
    pub d1: S,
    pub d2: S,
}

impl<S: Scalar> Jet2<S> {
    /// A quantity that does not vary along the direction.
    pub fn constant(v: S) -> Self {
        let z = v.constant_like(0.0);
        Jet2 { v, d1: z, d2: z }
    }

    /// An input coordinate: seeded with the direction component `d1` and
    /// zero curvature.
    pub fn variable(v: S, d1: f64) -> Self {
        Jet2 {
            v,
            d1: v.constant_like(d1),
            d2: v.constant_like(0.0),
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet2 {
            v: self.v.scale(c),
            d1: self.d1.scale(c),
            d2: self.d2.scale(c),
        }
    }

    pub fn add_const(self, c: f64) -> Self {
        Jet2 {
            v: self.v.add_const(c),
            ..self
        }
    }

    /// Chain rule through a scalar function given `f(v)`, `f'(v)`, `f''(v)`.
    fn compose(self, fv: S, fp: S, fpp: S) -> Self {
        Jet2 {
            v: fv,
            d1: fp * self.d1,
            d2: fpp * self.d1 * self.d1 + fp * self.d2,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.compose(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let half = r.constant_like(0.5) / r;
        let quarter = half.scale(-0.5) / self.v;
        self.compose(r, half, quarter)
    }

    /// `self^p` for constant `p`; the value must stay positive.
    pub fn powf(self, p: f64) -> Self {
        let fv = self.v.powf(p);
        let fp = self.v.powf(p - 1.0).scale(p);
        let fpp = self.v.powf(p - 2.0).scale(p * (p - 1.0));
        self.compose(fv, fp, fpp)
    }

    pub fn sigmoid(self) -> Self {
        let s = self.v.sigmoid();
        let one_minus = -s + s.constant_like(1.0);
        let sp = s * one_minus;
        let spp = sp * (one_minus - s);
        self.compose(s, sp, spp)
    }

    pub fn silu(self) -> Self {
        self * self.sigmoid()
    }

    /// Four-quadrant arctangent of `self` over `x` with derivatives along
    /// the shared direction.
    pub fn atan2(self, x: Jet2<S>) -> Self {
        let (b, a) = (self, x); // theta = atan2(b, a)
        let r2 = a.v * a.v + b.v * b.v;
        let num = a.v * b.d1 - b.v * a.d1;
        let d1 = num / r2;
        let r2_d1 = (a.v * a.d1 + b.v * b.d1).scale(2.0);
        let num_d1 = a.v * b.d2 - b.v * a.d2;
        let d2 = num_d1 / r2 - num * r2_d1 / (r2 * r2);
        Jet2 {
            v: b.v.atan2(a.v),
            d1,
            d2,
        }
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Jet2 {
            v: self.v + rhs.v,
            d1: self.d1 + rhs.d1,
            d2: self.d2 + rhs.d2,
        }
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Jet2 {
            v: self.v - rhs.v,
            d1: self.d1 - rhs.d1,
            d2: self.d2 - rhs.d2,
        }
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Jet2 {
            v: self.v * rhs.v,
            d1: self.d1 * rhs.v + self.v * rhs.d1,
            d2: self.d2 * rhs.v + (self.d1 * rhs.d1).scale(2.0) + self.v * rhs.d2,
        }
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // f/g via f * (1/g): (1/g)' = -g'/g^2, (1/g)'' = -g''/g^2 + 2 g'^2/g^3.
        let inv = rhs.v.constant_like(1.0) / rhs.v;
        let inv2 = inv * inv;
        let gp = -rhs.d1 * inv2;
        let gpp = -rhs.d2 * inv2 + (rhs.d1 * rhs.d1 * inv2 * inv).scale(2.0);
        let recip = Jet2 {
            v: inv,
            d1: gp,
            d2: gpp,
        };
        self * recip
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Jet2 {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }
}

/// Evaluate `f` at `x` as a second-order jet along the unit direction
/// `dir`. The returned `d1`/`d2` are the first and second directional
/// derivatives of `f`.
pub fn directional_jet<S: Scalar>(
    f: impl Fn(&[Jet2<S>]) -> Jet2<S>,
    x: &[S],
    dir: &[f64],
) -> Result<Jet2<S>, AutodiffError> {
    if x.len() != dir.len() {
        return Err(AutodiffError::DimensionMismatch {
            expected: x.len(),
            got: dir.len(),
        });
    }
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(AutodiffError::NotUnitDirection { norm });
    }
    let seeded: Vec<Jet2<S>> = x
        .iter()
        .zip(dir)
        .map(|(&xi, &di)| Jet2::variable(xi, di))
        .collect();
    Ok(f(&seeded))
}

/// Gradient of `f` at `x`: component `i` is the `d1` of the jet along the
/// coordinate direction `e_i`.
pub fn spatial_gradient_of<S: Scalar>(f: impl Fn(&[Jet2<S>]) -> Jet2<S>, x: &[S]) -> Vec<S> {
    coordinate_jets(f, x).into_iter().map(|j| j.d1).collect()
}

/// Laplacian of `f` at `x`: the sum over coordinate directions of the
/// jets' second derivatives (the Hessian trace; no mixed entries needed).
pub fn laplacian_of<S: Scalar>(f: impl Fn(&[Jet2<S>]) -> Jet2<S>, x: &[S]) -> S {
    let jets = coordinate_jets(f, x);
    let mut acc = jets[0].d2;
    for j in &jets[1..] {
        acc = acc + j.d2;
    }
    acc
}

fn coordinate_jets<S: Scalar>(
    f: impl Fn(&[Jet2<S>]) -> Jet2<S>,
    x: &[S],
) -> Vec<Jet2<S>> {
    let d = x.len();
    (0..d)
        .map(|i| {
            let seeded: Vec<Jet2<S>> = x
                .iter()
                .enumerate()
                .map(|(k, &xk)| Jet2::variable(xk, if k == i { 1.0 } else { 0.0 }))
                .collect();
            f(&seeded)
        })
        .collect()
}
