//! Property tests of the core invariants: gradients of randomly composed
//! expressions, quadrature weight mass, and affinity of the Lagrangians
//! in the multiplier.

use proptest::prelude::*;

use deep_uzawa::autodiff::{Scalar, Tape, Var};
use deep_uzawa::losses::{pinn_lagrangian, ritz_lagrangian, PdeData};
use deep_uzawa::network::MlpParams;
use deep_uzawa::sampling::{sample_boundary, sample_interior, Domain};
use deep_uzawa::uzawa::Multiplier;

/// A tiny random expression tree over two parameters, restricted to ops
/// that stay smooth and finite on the sampled domain.
#[derive(Debug, Clone)]
enum Expr {
    A,
    B,
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Silu(Box<Expr>),
    Sigmoid(Box<Expr>),
    Sin(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    fn eval(&self, a: f64, b: f64) -> f64 {
        match self {
            Expr::A => a,
            Expr::B => b,
            Expr::Const(c) => *c,
            Expr::Add(x, y) => x.eval(a, b) + y.eval(a, b),
            Expr::Mul(x, y) => x.eval(a, b) * y.eval(a, b),
            Expr::Sub(x, y) => x.eval(a, b) - y.eval(a, b),
            Expr::Silu(x) => Scalar::silu(x.eval(a, b)),
            Expr::Sigmoid(x) => Scalar::sigmoid(x.eval(a, b)),
            Expr::Sin(x) => x.eval(a, b).sin(),
            Expr::Exp(x) => (x.eval(a, b) * 0.25).exp(),
        }
    }

    fn record<'t>(&self, a: Var<'t>, b: Var<'t>) -> Var<'t> {
        match self {
            Expr::A => a,
            Expr::B => b,
            Expr::Const(c) => a.constant_like(*c),
            Expr::Add(x, y) => x.record(a, b) + y.record(a, b),
            Expr::Mul(x, y) => x.record(a, b) * y.record(a, b),
            Expr::Sub(x, y) => x.record(a, b) - y.record(a, b),
            Expr::Silu(x) => x.record(a, b).silu(),
            Expr::Sigmoid(x) => x.record(a, b).sigmoid(),
            Expr::Sin(x) => x.record(a, b).sin(),
            Expr::Exp(x) => x.record(a, b).scale(0.25).exp(),
        }
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::A),
        Just(Expr::B),
        (-1.5f64..1.5).prop_map(Expr::Const),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::Add(Box::new(x), Box::new(y))),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::Mul(Box::new(x), Box::new(y))),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Expr::Sub(Box::new(x), Box::new(y))),
            inner.clone().prop_map(|x| Expr::Silu(Box::new(x))),
            inner.clone().prop_map(|x| Expr::Sigmoid(Box::new(x))),
            inner.clone().prop_map(|x| Expr::Sin(Box::new(x))),
            inner.prop_map(|x| Expr::Exp(Box::new(x))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reverse_mode_matches_finite_differences(expr in expr_strategy(),
                                               a in -1.2f64..1.2,
                                               b in -1.2f64..1.2) {
        let tape = Tape::new();
        let th = tape.bind_params(&[a, b]);
        let root = expr.record(th[0], th[1]);
        let grads = tape.backward(root).unwrap().0;
        let h = 1e-6;
        let fa = (expr.eval(a + h, b) - expr.eval(a - h, b)) / (2.0 * h);
        let fb = (expr.eval(a, b + h) - expr.eval(a, b - h)) / (2.0 * h);
        let scale = grads[0].abs().max(grads[1].abs()).max(1.0);
        prop_assert!((grads[0] - fa).abs() <= 2e-5 * scale, "dA: {} vs {}", grads[0], fa);
        prop_assert!((grads[1] - fb).abs() <= 2e-5 * scale, "dB: {} vs {}", grads[1], fb);
    }

    #[test]
    fn quadrature_mass_and_membership(seed in 0u64..1_000_000, n in 1usize..400) {
        for domain in [Domain::LShape, Domain::Ball { dim: 4 }] {
            let s = sample_interior(domain, n, seed).unwrap();
            let mass: f64 = s.weights.iter().sum();
            prop_assert!((mass - domain.volume()).abs() <= 1e-12 * domain.volume());
            for (p, w) in s.iter() {
                prop_assert!(w > 0.0);
                prop_assert!(domain.contains(p));
            }
        }
    }

    #[test]
    fn lagrangians_affine_in_the_multiplier(l1a in -2.0f64..2.0, l1b in -2.0f64..2.0,
                                            l2a in -2.0f64..2.0, l2b in -2.0f64..2.0,
                                            gamma in 0.0f64..5.0) {
        let params = MlpParams::init(3, 5, 1, 11).unwrap();
        let interior = sample_interior(Domain::Interval, 8, 0).unwrap();
        let boundary = sample_boundary(Domain::Interval, 2, 0).unwrap();
        let data = PdeData::new(
            0.2,
            true,
            std::sync::Arc::new(|_: &[f64]| 1.0),
            std::sync::Arc::new(|_: &[f64]| 0.0),
        ).unwrap();
        let mk = |va: f64, vb: f64| {
            let mut m = Multiplier::zeros(boundary.clone());
            m.values.copy_from_slice(&[va, vb]);
            m
        };
        for pinn in [false, true] {
            let eval = |lam: &Multiplier| {
                let tape = Tape::new();
                let net = params.bind(&tape);
                let l = if pinn {
                    pinn_lagrangian(&net, Some(lam), &interior, &boundary, gamma, &data)
                } else {
                    ritz_lagrangian(&net, Some(lam), &interior, &boundary, gamma, &data)
                };
                Scalar::value(&l.unwrap())
            };
            let lhs = eval(&mk(l1a + l2a, l1b + l2b)) - eval(&mk(l2a, l2b));
            let rhs = eval(&mk(l1a, l1b)) - eval(&mk(0.0, 0.0));
            prop_assert!((lhs - rhs).abs() <= 1e-12, "pinn={}: {} vs {}", pinn, lhs, rhs);
        }
    }
}
