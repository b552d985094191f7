use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number-like values the jet arithmetic and field evaluators work over.
///
/// Implemented for `f64`/`f32` (plain evaluation) and for [`super::Var`]
/// (tape-recorded evaluation). Constants are created *relative to an
/// existing value* via [`Scalar::constant_like`] because a tape variable
/// needs its tape to mint new nodes.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same evaluation context as `self`.
    fn constant_like(&self, c: f64) -> Self;

    /// Current numeric value (for diagnostics and branch decisions).
    fn value(&self) -> f64;

    /// `c * self`.
    fn scale(self, c: f64) -> Self {
        self * self.constant_like(c)
    }

    /// `self + c`.
    fn add_const(self, c: f64) -> Self {
        self + self.constant_like(c)
    }

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    /// `self^p` for a constant exponent; `self` must be positive.
    fn powf(self, p: f64) -> Self;
    /// Four-quadrant arctangent, `self` is the ordinate.
    fn atan2(self, x: Self) -> Self;

    /// Logistic sigmoid `1 / (1 + e^{-x})`.
    fn sigmoid(self) -> Self {
        let one = self.constant_like(1.0);
        one / ((-self).exp() + one)
    }

    /// Sigmoid-weighted linear unit `x * sigmoid(x)`.
    fn silu(self) -> Self {
        self * self.sigmoid()
    }
}

macro_rules! impl_scalar_for_float {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn constant_like(&self, c: f64) -> Self {
                <$t as num_traits::FromPrimitive>::from_f64(c).unwrap()
            }
            #[inline]
            fn value(&self) -> f64 {
                num_traits::ToPrimitive::to_f64(self).unwrap()
            }
            #[inline]
            fn scale(self, c: f64) -> Self {
                self * self.constant_like(c)
            }
            #[inline]
            fn add_const(self, c: f64) -> Self {
                self + self.constant_like(c)
            }
            #[inline]
            fn exp(self) -> Self {
                num_traits::Float::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                num_traits::Float::ln(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                num_traits::Float::sqrt(self)
            }
            #[inline]
            fn sin(self) -> Self {
                num_traits::Float::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                num_traits::Float::cos(self)
            }
            #[inline]
            fn powf(self, p: f64) -> Self {
                num_traits::Float::powf(self, self.constant_like(p))
            }
            #[inline]
            fn atan2(self, x: Self) -> Self {
                num_traits::Float::atan2(self, x)
            }
            #[inline]
            fn sigmoid(self) -> Self {
                // Branch on sign so neither exponential overflows.
                if self >= 0.0 as $t {
                    let one: $t = 1.0 as $t;
                    one / (one + num_traits::Float::exp(-self))
                } else {
                    let e = num_traits::Float::exp(self);
                    e / (1.0 as $t + e)
                }
            }
        }
    };
}

impl_scalar_for_float!(f32);
impl_scalar_for_float!(f64);

/// Derivatives of the SiLU activation, shared by the tape primitives and
/// the jet rules. Returns `(silu, silu', silu'', silu''')` at `x`.
pub(crate) fn silu_derivatives(x: f64) -> (f64, f64, f64, f64) {
    let s = Scalar::sigmoid(x);
    let sp = s * (1.0 - s);
    let spp = sp * (1.0 - 2.0 * s);
    let sppp = spp * (1.0 - 2.0 * s) - 2.0 * sp * sp;
    (
        x * s,
        s + x * sp,
        2.0 * sp + x * spp,
        3.0 * spp + x * sppp,
    )
}
