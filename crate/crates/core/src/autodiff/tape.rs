use std::cell::RefCell;
use std::fmt;

use thiserror::Error;

use super::scalar::{silu_derivatives, Scalar};

/// Operation tag carried by every node, used in diagnostics when a
/// non-finite value shows up during the backward sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTag {
    Param,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    AddConst,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Powf,
    Recip,
    Atan2,
    Sigmoid,
    Silu,
    SiluD1,
    SiluD2,
    Dot,
    AffineDot,
}

impl fmt::Display for OpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Error)]
pub enum AutodiffError {
    /// A non-finite value or adjoint was met while walking the graph.
    #[error("non-finite gradient at `{op}` node {node}")]
    NonFiniteGradient { op: OpTag, node: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("direction must have unit norm (|dir| = {norm})")]
    NotUnitDirection { norm: f64 },
}

/// One recorded operation. Local partials are evaluated at forward time,
/// so the backward sweep is a pure multiply-accumulate pass.
///
/// `Dot` and `AffineDot` are contiguous-span reductions (a row of an affine
/// layer). Conceptually they stand for the parent list
/// `[(a+i, values[b+i]), (b+i, values[a+i]), ...]`; storing the span bounds
/// instead of that list keeps the hot path in registers.
#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf {
        tag: OpTag,
    },
    Unary {
        tag: OpTag,
        a: u32,
        da: f64,
    },
    Binary {
        tag: OpTag,
        a: u32,
        b: u32,
        da: f64,
        db: f64,
    },
    Ternary {
        tag: OpTag,
        a: u32,
        b: u32,
        c: u32,
        da: f64,
        db: f64,
        dc: f64,
    },
    /// `sum_i values[a+i] * values[b+i]`
    Dot {
        a: u32,
        b: u32,
        n: u32,
    },
    /// `sum_i values[w+i] * values[x+i] + values[b]`
    AffineDot {
        w: u32,
        x: u32,
        n: u32,
        b: u32,
    },
}

impl Op {
    fn tag(&self) -> OpTag {
        match self {
            Op::Leaf { tag } => *tag,
            Op::Unary { tag, .. } | Op::Binary { tag, .. } | Op::Ternary { tag, .. } => *tag,
            Op::Dot { .. } => OpTag::Dot,
            Op::AffineDot { .. } => OpTag::AffineDot,
        }
    }
}

#[derive(Default)]
struct TapeInner {
    values: Vec<f64>,
    ops: Vec<Op>,
    n_params: usize,
    adjoint: Vec<f64>,
}

/// Define-by-run computation graph. The graph is rebuilt per batch; node
/// ids are topological by construction (parents strictly precede children).
///
/// Parameter leaves must be bound first, via [`Tape::bind_params`], so the
/// gradient of every parameter can be read off a prefix of the adjoint
/// buffer. Construction and backward are single-threaded per tape; separate
/// tapes are independent.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

/// Gradient of a scalar root with respect to the parameter leaves, in
/// binding order.
#[derive(Debug, Clone)]
pub struct Grads(pub Vec<f64>);

impl Grads {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

/// A handle to one node of a [`Tape`]. Cheap to copy; arithmetic on vars
/// records new nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: u32,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.id, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_params(&self) -> usize {
        self.inner.borrow().n_params
    }

    /// Drop all nodes but keep allocated capacity. Parameters must be
    /// re-bound afterwards.
    pub fn reset(&self) {
        let mut t = self.inner.borrow_mut();
        t.values.clear();
        t.ops.clear();
        t.n_params = 0;
    }

    /// Push every entry of `theta` as a parameter leaf. Must be called on
    /// an empty tape so parameter ids are `0..theta.len()`.
    pub fn bind_params(&self, theta: &[f64]) -> Vec<Var<'_>> {
        let mut t = self.inner.borrow_mut();
        assert!(t.ops.is_empty(), "parameters must be bound on an empty tape");
        t.values.extend_from_slice(theta);
        t.ops
            .extend(std::iter::repeat(Op::Leaf { tag: OpTag::Param }).take(theta.len()));
        t.n_params = theta.len();
        drop(t);
        (0..theta.len() as u32).map(|id| Var { tape: self, id }).collect()
    }

    /// Push a constant leaf (no gradient flows into it).
    pub fn constant(&self, v: f64) -> Var<'_> {
        let id = self.push(v, Op::Leaf { tag: OpTag::Const });
        Var { tape: self, id }
    }

    fn push(&self, value: f64, op: Op) -> u32 {
        let mut t = self.inner.borrow_mut();
        push_raw(&mut t, value, op)
    }

    fn var(&self, id: u32) -> Var<'_> {
        Var { tape: self, id }
    }

    /// Reverse sweep from a scalar `root`: returns `d root / d theta_j` for
    /// every parameter leaf. Non-parameter leaves are skipped. Adjoints are
    /// checked for finiteness as they are consumed.
    pub fn backward(&self, root: Var<'_>) -> Result<Grads, AutodiffError> {
        assert!(std::ptr::eq(root.tape, self), "root from another tape");
        let mut t = self.inner.borrow_mut();
        let t = &mut *t;
        let n = root.id as usize + 1;
        if !t.values[root.id as usize].is_finite() {
            return Err(AutodiffError::NonFiniteGradient {
                op: t.ops[root.id as usize].tag(),
                node: root.id as usize,
            });
        }
        t.adjoint.clear();
        t.adjoint.resize(n, 0.0);
        t.adjoint[n - 1] = 1.0;
        let TapeInner {
            values,
            ops,
            n_params,
            adjoint,
        } = t;
        for i in (*n_params..n).rev() {
            let g = adjoint[i];
            if g == 0.0 {
                continue;
            }
            if !g.is_finite() {
                return Err(AutodiffError::NonFiniteGradient {
                    op: ops[i].tag(),
                    node: i,
                });
            }
            match ops[i] {
                Op::Leaf { .. } => {}
                Op::Unary { a, da, .. } => adjoint[a as usize] += g * da,
                Op::Binary { a, b, da, db, .. } => {
                    adjoint[a as usize] += g * da;
                    adjoint[b as usize] += g * db;
                }
                Op::Ternary {
                    a, b, c, da, db, dc, ..
                } => {
                    adjoint[a as usize] += g * da;
                    adjoint[b as usize] += g * db;
                    adjoint[c as usize] += g * dc;
                }
                Op::Dot { a, b, n } => {
                    axpy_cross(adjoint, values, g, a as usize, b as usize, n as usize);
                }
                Op::AffineDot { w, x, n, b } => {
                    axpy_cross(adjoint, values, g, w as usize, x as usize, n as usize);
                    adjoint[b as usize] += g;
                }
            }
        }
        Ok(Grads(adjoint[..*n_params].to_vec()))
    }

    /// Gradient of `root` with respect to an arbitrary node (for tests).
    pub fn grad_of(&self, root: Var<'_>, leaf: Var<'_>) -> Result<f64, AutodiffError> {
        let _ = self.backward(root)?;
        Ok(self.inner.borrow().adjoint[leaf.id as usize])
    }
}

#[inline]
fn push_raw(t: &mut TapeInner, value: f64, op: Op) -> u32 {
    let id = t.ops.len();
    assert!(id < u32::MAX as usize, "tape overflow");
    t.values.push(value);
    t.ops.push(op);
    id as u32
}

/// adjoint[a..a+n] += g * values[b..b+n] and symmetrically.
#[inline]
fn axpy_cross(adjoint: &mut [f64], values: &[f64], g: f64, a: usize, b: usize, n: usize) {
    let (va, vb) = (&values[a..a + n], &values[b..b + n]);
    for i in 0..n {
        adjoint[a + i] += g * vb[i];
    }
    for i in 0..n {
        adjoint[b + i] += g * va[i];
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, tag: OpTag, value: f64, da: f64) -> Var<'t> {
        let id = self.tape.push(value, Op::Unary { tag, a: self.id, da });
        Var { tape: self.tape, id }
    }

    fn binary(self, rhs: Var<'t>, tag: OpTag, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape));
        let id = self.tape.push(
            value,
            Op::Binary {
                tag,
                a: self.id,
                b: rhs.id,
                da,
                db,
            },
        );
        Var { tape: self.tape, id }
    }
}

impl Scalar for Var<'_> {
    fn constant_like(&self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn value(&self) -> f64 {
        self.tape.inner.borrow().values[self.id as usize]
    }

    fn scale(self, c: f64) -> Self {
        self.unary(OpTag::Scale, c * self.value(), c)
    }

    fn add_const(self, c: f64) -> Self {
        self.unary(OpTag::AddConst, self.value() + c, 1.0)
    }

    fn exp(self) -> Self {
        let e = self.value().exp();
        self.unary(OpTag::Exp, e, e)
    }

    fn ln(self) -> Self {
        let v = self.value();
        self.unary(OpTag::Ln, v.ln(), 1.0 / v)
    }

    fn sqrt(self) -> Self {
        let r = self.value().sqrt();
        self.unary(OpTag::Sqrt, r, 0.5 / r)
    }

    fn sin(self) -> Self {
        let v = self.value();
        self.unary(OpTag::Sin, v.sin(), v.cos())
    }

    fn cos(self) -> Self {
        let v = self.value();
        self.unary(OpTag::Cos, v.cos(), -v.sin())
    }

    fn powf(self, p: f64) -> Self {
        let v = self.value();
        self.unary(OpTag::Powf, v.powf(p), p * v.powf(p - 1.0))
    }

    fn atan2(self, x: Self) -> Self {
        let (y, xv) = (self.value(), x.value());
        let r2 = y * y + xv * xv;
        self.binary(x, OpTag::Atan2, y.atan2(xv), xv / r2, -y / r2)
    }

    fn sigmoid(self) -> Self {
        let s = Scalar::sigmoid(self.value());
        self.unary(OpTag::Sigmoid, s, s * (1.0 - s))
    }

    fn silu(self) -> Self {
        let (v, d1, _, _) = silu_derivatives(self.value());
        self.unary(OpTag::Silu, v, d1)
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpTag::Add, self.value() + rhs.value(), 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, OpTag::Sub, self.value() - rhs.value(), 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.binary(rhs, OpTag::Mul, a * b, b, a)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.binary(rhs, OpTag::Div, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(OpTag::Neg, -self.value(), -1.0)
    }
}

impl<'t> std::ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.add_const(c)
    }
}

impl<'t> std::ops::Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.add_const(-c)
    }
}

impl<'t> std::ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

impl<'t> std::ops::Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v.scale(self)
    }
}

/// Batched graph construction used by the network evaluator: one borrow of
/// the tape for a whole layer pass.
pub(crate) struct TapeWriter<'t, 'b> {
    tape: &'t Tape,
    inner: std::cell::RefMut<'b, TapeInner>,
}

impl<'t, 'b> TapeWriter<'t, 'b> {
    pub fn new(tape: &'t Tape) -> TapeWriter<'t, 'b>
    where
        't: 'b,
    {
        TapeWriter {
            tape,
            inner: tape.inner.borrow_mut(),
        }
    }

    #[inline]
    pub fn var(&self, id: u32) -> Var<'t> {
        self.tape.var(id)
    }

    #[inline]
    pub fn constant(&mut self, v: f64) -> u32 {
        push_raw(&mut self.inner, v, Op::Leaf { tag: OpTag::Const })
    }

    /// `sum_i values[a+i] values[b+i]`, both spans contiguous.
    #[inline]
    pub fn dot(&mut self, a: u32, b: u32, n: u32) -> u32 {
        let t = &mut *self.inner;
        let (au, bu, nu) = (a as usize, b as usize, n as usize);
        let mut acc = 0.0;
        for i in 0..nu {
            acc += t.values[au + i] * t.values[bu + i];
        }
        push_raw(t, acc, Op::Dot { a, b, n })
    }

    /// `sum_i values[w+i] values[x+i] + values[b]`.
    #[inline]
    pub fn affine_dot(&mut self, w: u32, x: u32, n: u32, b: u32) -> u32 {
        let t = &mut *self.inner;
        let (wu, xu, nu) = (w as usize, x as usize, n as usize);
        let mut acc = t.values[b as usize];
        for i in 0..nu {
            acc += t.values[wu + i] * t.values[xu + i];
        }
        push_raw(t, acc, Op::AffineDot { w, x, n, b })
    }

    /// `silu(values[a])`.
    #[inline]
    pub fn silu(&mut self, a: u32) -> u32 {
        let t = &mut *self.inner;
        let (v, d1, _, _) = silu_derivatives(t.values[a as usize]);
        push_raw(t, v, Op::Unary { tag: OpTag::Silu, a, da: d1 })
    }

    /// First directional derivative of `silu` through a node: given the
    /// pre-activation `a` and its directional derivative `d1`, records
    /// `silu'(a) * d1`.
    #[inline]
    pub fn silu_d1(&mut self, a: u32, d1: u32) -> u32 {
        let t = &mut *self.inner;
        let (_, sp, spp, _) = silu_derivatives(t.values[a as usize]);
        let d1v = t.values[d1 as usize];
        push_raw(
            t,
            sp * d1v,
            Op::Binary {
                tag: OpTag::SiluD1,
                a,
                b: d1,
                da: spp * d1v,
                db: sp,
            },
        )
    }

    /// Second directional derivative of `silu` through a node:
    /// `silu''(a) d1^2 + silu'(a) d2`.
    #[inline]
    pub fn silu_d2(&mut self, a: u32, d1: u32, d2: u32) -> u32 {
        let t = &mut *self.inner;
        let (_, sp, spp, sppp) = silu_derivatives(t.values[a as usize]);
        let d1v = t.values[d1 as usize];
        let d2v = t.values[d2 as usize];
        push_raw(
            t,
            spp * d1v * d1v + sp * d2v,
            Op::Ternary {
                tag: OpTag::SiluD2,
                a,
                b: d1,
                c: d2,
                da: sppp * d1v * d1v + spp * d2v,
                db: 2.0 * spp * d1v,
                dc: sp,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_example() {
        let tape = Tape::new();
        let th = tape.bind_params(&[2.0, 3.0]);
        let root = th[0] * th[1];
        let g = tape.backward(root).unwrap();
        assert_eq!(g.0, vec![3.0, 2.0]);
    }

    #[test]
    fn identity_has_unit_gradient() {
        let tape = Tape::new();
        let th = tape.bind_params(&[1.7]);
        let g = tape.backward(th[0]).unwrap();
        assert_eq!(g.0, vec![1.0]);
    }

    #[test]
    fn silu_gradient_matches_finite_difference() {
        // Central difference with step 1e-6 at theta = 1.
        let fd = {
            let h = 1e-6;
            (Scalar::silu(1.0 + h) - Scalar::silu(1.0 - h)) / (2.0 * h)
        };
        let tape = Tape::new();
        let th = tape.bind_params(&[1.0]);
        let root = th[0].silu();
        let g = tape.backward(root).unwrap();
        assert!((g.0[0] - fd).abs() < 1e-8);
        assert!((g.0[0] - 0.927_670_511_871_486_7).abs() < 1e-12);
    }

    #[test]
    fn every_primitive_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        type UnaryCase = (
            &'static str,
            for<'a> fn(Var<'a>) -> Var<'a>,
            fn(f64) -> f64,
            bool,
        );
        let unary: Vec<UnaryCase> = vec![
            ("exp", |v| v.exp(), |x| x.exp(), false),
            ("ln", |v| v.ln(), |x| x.ln(), true),
            ("sqrt", |v| v.sqrt(), |x| x.sqrt(), true),
            ("sin", |v| v.sin(), |x| x.sin(), false),
            ("cos", |v| v.cos(), |x| x.cos(), false),
            ("neg", |v| -v, |x| -x, false),
            ("sigmoid", |v| v.sigmoid(), Scalar::sigmoid, false),
            ("silu", |v| v.silu(), Scalar::silu, false),
            ("powf1.7", |v| v.powf(1.7), |x| x.powf(1.7), true),
            ("scale", |v| v.scale(-2.5), |x| -2.5 * x, false),
            ("addc", |v| v.add_const(0.7), |x| x + 0.7, false),
        ];
        let h = 1e-5;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.2..2.0);
            for (name, bvar, bf, _pos) in &unary {
                let tape = Tape::new();
                let th = tape.bind_params(&[x]);
                let g = tape.backward(bvar(th[0])).unwrap().0[0];
                let fd = (bf(x + h) - bf(x - h)) / (2.0 * h);
                let denom = fd.abs().max(1e-6);
                assert!(
                    ((g - fd) / denom).abs() < 1e-5,
                    "{name} at {x}: ad={g} fd={fd}"
                );
            }
            // binary ops
            let (a, b): (f64, f64) = (rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0));
            type BinaryCase = (
                &'static str,
                for<'a> fn(Var<'a>, Var<'a>) -> Var<'a>,
                fn(f64, f64) -> f64,
            );
            let binary: Vec<BinaryCase> = vec![
                ("add", |u, v| u + v, |x, y| x + y),
                ("sub", |u, v| u - v, |x, y| x - y),
                ("mul", |u, v| u * v, |x, y| x * y),
                ("div", |u, v| u / v, |x, y| x / y),
                ("atan2", |u, v| u.atan2(v), f64::atan2),
            ];
            for (name, bvar, bf) in &binary {
                let tape = Tape::new();
                let th = tape.bind_params(&[a, b]);
                let g = tape.backward(bvar(th[0], th[1])).unwrap().0.clone();
                let fda = (bf(a + h, b) - bf(a - h, b)) / (2.0 * h);
                let fdb = (bf(a, b + h) - bf(a, b - h)) / (2.0 * h);
                for (ad, fd) in [(g[0], fda), (g[1], fdb)] {
                    let denom = fd.abs().max(1e-6);
                    assert!(
                        ((ad - fd) / denom).abs() < 1e-5,
                        "{name} at ({a},{b}): ad={ad} fd={fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn dot_and_affine_dot_match_scalar_composition() {
        let tape = Tape::new();
        let th = tape.bind_params(&[0.3, -1.2, 0.8, 2.0, 0.5, -0.25, 0.9]);
        // spans: w = th[0..3], x = th[3..6], bias = th[6]
        let (fused, plain) = {
            let mut w = TapeWriter::new(&tape);
            let fused = w.affine_dot(0, 3, 3, 6);
            let fused_dot = w.dot(0, 3, 3);
            drop(w);
            let plain = th[0] * th[3] + th[1] * th[4] + th[2] * th[5] + th[6];
            let plain_dot = th[0] * th[3] + th[1] * th[4] + th[2] * th[5];
            assert!((tape.var(fused_dot).value() - plain_dot.value()).abs() < 1e-15);
            (tape.var(fused), plain)
        };
        assert!((fused.value() - plain.value()).abs() < 1e-15);
        let gf = tape.backward(fused).unwrap().0;
        let gp = tape.backward(plain).unwrap().0;
        for (a, b) in gf.iter().zip(&gp) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_detected_and_named() {
        let tape = Tape::new();
        let th = tape.bind_params(&[0.0]);
        let bad = th[0].ln(); // -inf
        match tape.backward(bad) {
            Err(AutodiffError::NonFiniteGradient { op, .. }) => assert_eq!(op, OpTag::Ln),
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
    }

    #[test]
    fn reset_reuses_capacity_and_rebinding_works() {
        let tape = Tape::new();
        {
            let th = tape.bind_params(&[1.0, 2.0]);
            let _ = th[0] * th[1];
        }
        tape.reset();
        let th = tape.bind_params(&[3.0, 5.0]);
        let g = tape.backward(th[0] * th[1]).unwrap();
        assert_eq!(g.0, vec![5.0, 3.0]);
    }
}
