//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured numbers (visible with `--nocapture`; the harness
//! prints the per-criterion ok/FAILED line either way).
//!
//! The training criteria run at desk scale: epoch counts and tolerances
//! are pinned, batch sizes are the smallest that reach the gates
//! comfortably on a laptop.

use std::sync::Arc;
use std::time::Instant;

use deep_uzawa::autodiff::{laplacian_of, Jet2, Tape};
use deep_uzawa::losses::{pinn_lagrangian, ritz_lagrangian, PdeData};
use deep_uzawa::network::MlpParams;
use deep_uzawa::problems::{trace_constant_bound, Problem};
use deep_uzawa::reference_fd::{fd_uzawa, iteration_spectral_radius, BoundaryPair, FdGrid};
use deep_uzawa::sampling::{sample_boundary, sample_interior, Domain};
use deep_uzawa::uzawa::{run, Method, Multiplier, RunConfig};

/// Runtime allowances are doubled when debug assertions are on (plain
/// `cargo test`); the stated budgets assume an optimized build.
fn budget(seconds: f64) -> f64 {
    if cfg!(debug_assertions) {
        2.0 * seconds
    } else {
        seconds
    }
}

/// The two longest criteria hold this lock so their wall-clock budgets
/// are measured without competing against each other; the remaining
/// tests still run concurrently.
static HEAVY: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn rel_vec_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

#[test]
fn criterion_1_autodiff_gradients_match_finite_differences() {
    let t0 = Instant::now();
    let (depth, width) = (3, 8);
    let interior = sample_interior(Domain::Interval, 6, 3).unwrap();
    let boundary = sample_boundary(Domain::Interval, 2, 0).unwrap();
    for cfg_idx in 0..20u64 {
        let params = MlpParams::init(depth, width, 1, 100 + cfg_idx).unwrap();
        let gamma = 0.3 * cfg_idx as f64;
        let data = PdeData::new(
            0.05 + 0.1 * (cfg_idx % 5) as f64,
            true,
            Arc::new(move |x: &[f64]| 1.0 + 0.3 * x[0] + 0.01 * cfg_idx as f64),
            Arc::new(move |x: &[f64]| 0.1 * cfg_idx as f64 * (1.0 - x[0])),
        )
        .unwrap();
        let mut lam = Multiplier::zeros(boundary.clone());
        lam.values = vec![0.3 - 0.05 * cfg_idx as f64, -0.2 + 0.03 * cfg_idx as f64];
        for pinn in [false, true] {
            let loss_of = |theta: &[f64]| -> f64 {
                let p = MlpParams::from_theta(depth, width, 1, theta.to_vec()).unwrap();
                let tape = Tape::new();
                let net = p.bind(&tape);
                let l = if pinn {
                    pinn_lagrangian(&net, Some(&lam), &interior, &boundary, gamma, &data)
                } else {
                    ritz_lagrangian(&net, Some(&lam), &interior, &boundary, gamma, &data)
                };
                deep_uzawa::autodiff::Scalar::value(&l.unwrap())
            };
            let ad = {
                let tape = Tape::new();
                let net = params.bind(&tape);
                let l = if pinn {
                    pinn_lagrangian(&net, Some(&lam), &interior, &boundary, gamma, &data)
                } else {
                    ritz_lagrangian(&net, Some(&lam), &interior, &boundary, gamma, &data)
                };
                tape.backward(l.unwrap()).unwrap().0
            };
            let h = 1e-6;
            let fd: Vec<f64> = (0..params.theta.len())
                .map(|i| {
                    let mut tp = params.theta.clone();
                    tp[i] += h;
                    let fp = loss_of(&tp);
                    tp[i] -= 2.0 * h;
                    let fm = loss_of(&tp);
                    (fp - fm) / (2.0 * h)
                })
                .collect();
            let rel = rel_vec_err(&ad, &fd);
            assert!(
                rel <= 1e-4,
                "config {cfg_idx} pinn={pinn}: gradient relative error {rel}"
            );
        }
    }

    // Spatial gradient and Laplacian against central differences.
    for cfg_idx in 0..20u64 {
        let d = 1 + (cfg_idx % 3) as usize;
        let params = MlpParams::init(depth, width, d, 300 + cfg_idx).unwrap();
        let x: Vec<f64> = (0..d).map(|i| 0.1 + 0.2 * (i as f64) + 0.01 * cfg_idx as f64).collect();
        let tape = Tape::new();
        let net = params.bind(&tape);
        let grad: Vec<f64> = net
            .spatial_gradient(&x)
            .iter()
            .map(deep_uzawa::autodiff::Scalar::value)
            .collect();
        let lap = deep_uzawa::autodiff::Scalar::value(&net.laplacian(&x));
        let h = 1e-4;
        let mut fd_grad = vec![0.0; d];
        let mut fd_lap = 0.0;
        let u0 = params.forward(&x).unwrap();
        for i in 0..d {
            let mut xp = x.clone();
            xp[i] += h;
            let up = params.forward(&xp).unwrap();
            xp[i] -= 2.0 * h;
            let um = params.forward(&xp).unwrap();
            fd_grad[i] = (up - um) / (2.0 * h);
            let hl = 1e-3;
            xp[i] = x[i] + hl;
            let upl = params.forward(&xp).unwrap();
            xp[i] = x[i] - hl;
            let uml = params.forward(&xp).unwrap();
            fd_lap += (upl - 2.0 * u0 + uml) / (hl * hl);
        }
        let gr = rel_vec_err(&grad, &fd_grad);
        assert!(gr <= 1e-5, "config {cfg_idx}: spatial gradient error {gr}");
        let lr = (lap - fd_lap).abs() / fd_lap.abs().max(1e-6);
        assert!(lr <= 1e-4, "config {cfg_idx}: laplacian error {lr}");
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < budget(10.0), "criterion 1 took {dt:.1}s");
    println!("ACCEPTANCE 1 PASS: gradients within 1e-4/1e-5/1e-4 in {dt:.1}s");
}

#[test]
fn criterion_2_harmonic_identity_through_jets() {
    let t0 = Instant::now();
    let pairing = |x: &[Jet2<f64>]| {
        let mut acc = Jet2::constant(0.0);
        for p in x.chunks_exact(2) {
            acc = acc + p[0] * p[1];
        }
        acc
    };
    let mut worst: f64 = 0.0;
    for d in [2usize, 4, 8] {
        for trial in 0..25 {
            let x: Vec<f64> = (0..d)
                .map(|i| 0.7 * ((i + 1) as f64 * 0.37 + trial as f64 * 0.11).sin())
                .collect();
            let lap = laplacian_of(pairing, &x);
            worst = worst.max(lap.abs());
            assert!(lap.abs() <= 1e-12, "dim {d}: |lap| = {}", lap.abs());
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < budget(1.0), "criterion 2 took {dt:.2}s");
    println!("ACCEPTANCE 2 PASS: |laplacian| <= {worst:.2e} in dims 2/4/8 in {dt:.2}s");
}

#[test]
fn criterion_3_fd_oracle_theorem_checks() {
    let t0 = Instant::now();
    let eps = 0.1;
    let grid = FdGrid::new(999);
    let c_tr = trace_constant_bound(Domain::Interval, &[0.5]).unwrap();
    assert!((c_tr - (1.0 + 2f64.sqrt())).abs() < 1e-12);

    // (a) gamma = 2, rho = 1: the 2 gamma >= rho regime.
    let run_a = fd_uzawa(2.0, 1.0, eps, &|_| 1.0, BoundaryPair::ZERO, &grid, 5000, BoundaryPair::ZERO);
    for w in run_a.steps.windows(2) {
        assert!(
            w[1].lambda_error < w[0].lambda_error || w[0].lambda_error <= 1e-13,
            "lambda error not strictly decreasing at k={}",
            w[1].k
        );
    }
    let hit = run_a
        .steps
        .iter()
        .find(|s| s.h1_error <= 1e-8)
        .map(|s| s.k)
        .expect("H1 error should fall below 1e-8 within 5000 iterations");

    // (b) gamma = 0, rho at 90% of the sufficient bound: convergent.
    let rho_b = 0.9 * 2.0 * eps.min(1.0) / (c_tr * c_tr);
    let run_b = fd_uzawa(0.0, rho_b, eps, &|_| 1.0, BoundaryPair::ZERO, &grid, 5000, BoundaryPair::ZERO);
    let (first_b, last_b) = (
        run_b.steps.first().unwrap().lambda_error,
        run_b.steps.last().unwrap().lambda_error,
    );
    assert!(
        last_b < 1e-3 * first_b,
        "gamma=0 run under the theorem bound must converge ({first_b} -> {last_b})"
    );
    for w in run_b.steps.windows(2) {
        assert!(w[1].lambda_error < w[0].lambda_error || w[0].lambda_error <= 1e-13);
    }

    // (c) both saddle identities at every iterate of both runs.
    for s in run_a.steps.iter().chain(&run_b.steps) {
        assert!(s.energy_identity_residual <= 1e-10, "k={}: energy {}", s.k, s.energy_identity_residual);
        assert!(s.recursion_identity_residual <= 1e-10, "k={}: recursion {}", s.k, s.recursion_identity_residual);
    }

    // (d) spectral radius agrees with observed behaviour on 20 draws.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 20 {
        let rho: f64 = rng.gen_range(f64::MIN_POSITIVE..50.0);
        let gamma: f64 = rng.gen_range(0.0..5.0);
        let radius = iteration_spectral_radius(gamma, rho, eps, &grid);
        if (radius - 1.0).abs() < 0.05 {
            continue; // marginal: asymptotics too slow to observe in 300 steps
        }
        let obs = fd_uzawa(gamma, rho, eps, &|_| 1.0, BoundaryPair::ZERO, &grid, 300, BoundaryPair(0.2, -0.4));
        let first = obs.steps.first().unwrap().lambda_error;
        let last = obs.steps.last().unwrap().lambda_error;
        let converged = last.is_finite() && last < first;
        assert_eq!(
            radius < 1.0,
            converged,
            "rho={rho} gamma={gamma}: radius {radius} vs lambda error {first} -> {last}"
        );
        checked += 1;
    }

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < budget(30.0), "criterion 3 took {dt:.1}s");
    println!(
        "ACCEPTANCE 3 PASS: (a) H1<=1e-8 at k={hit}; (b) rho={rho_b:.4} convergent; (c) identities <=1e-10; (d) 20/20 radius agreement; {dt:.1}s"
    );
}

fn paper_default_1d(method: Method, seed: u64) -> RunConfig {
    RunConfig {
        method,
        rho: 1.0,
        gamma: 2.0,
        n_uz: 500,
        n_sgd: 40,
        lr: 1e-3,
        seed,
        depth: 5,
        width: 40,
        batch_interior: 128,
        batch_boundary: 2,
        lambda_points: 2,
        resample_every: 0,
        reset_optimizer: false,
    }
}

#[test]
fn criterion_4_rituz_boundary_layer_paper_defaults() {
    let t0 = Instant::now();
    let problem = Problem::boundary_layer(0.1).unwrap();
    let mut finals = Vec::new();
    let mut boundaries = Vec::new();
    let mut early = Vec::new();
    for seed in [0, 1, 2] {
        let out = run(&paper_default_1d(Method::RitUz, seed), &problem).unwrap();
        assert!(!out.history.diverged, "seed {seed} diverged");
        assert_eq!(out.history.rows.len(), 500);
        let rows = &out.history.rows;
        finals.push(rows[499].l2_error);
        boundaries.push(rows[499].boundary_l2_error);
        early.push(rows[9].l2_error);
    }
    let (l2, bnd) = (median(finals), median(boundaries));
    let at10 = median(early);
    assert!(l2 <= 5e-2, "median final relative L2 error {l2}");
    assert!(bnd <= 1e-2, "median final boundary error {bnd}");
    assert!(l2 < at10, "no decrease: step 500 {l2} vs step 10 {at10}");
    println!(
        "ACCEPTANCE 4 PASS: median l2 {l2:.2e} (<=5e-2), boundary {bnd:.2e} (<=1e-2), step10 {at10:.2e}; {:.0}s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_5_pinnuz_boundary_layer() {
    let t0 = Instant::now();
    // 2 gamma - rho = 3 > 2 satisfies the least-squares condition.
    let problem = Problem::boundary_layer(0.1).unwrap();
    let mut finals = Vec::new();
    for seed in [0, 1, 2] {
        let out = run(&paper_default_1d(Method::PinnUz, seed), &problem).unwrap();
        assert!(!out.history.diverged, "seed {seed} diverged");
        finals.push(out.history.rows[499].l2_error);
    }
    let l2 = median(finals);
    assert!(l2 <= 5e-2, "median final relative L2 error {l2}");
    println!(
        "ACCEPTANCE 5 PASS: median l2 {l2:.2e} (<=5e-2); {:.0}s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_6_multiplier_matches_tuned_penalties() {
    let t0 = Instant::now();
    let problem = Problem::boundary_layer(0.1).unwrap();
    let shorten = |mut c: RunConfig| {
        c.n_uz = 200; // same 8000-epoch budget for every contender
        c
    };
    let rituz_median = |rho: f64| {
        let mut finals = Vec::new();
        for seed in [0, 1, 2] {
            let mut cfg = shorten(paper_default_1d(Method::RitUz, seed));
            cfg.gamma = 0.0;
            cfg.rho = rho;
            let out = run(&cfg, &problem).unwrap();
            finals.push(out.history.rows.last().unwrap().l2_error);
        }
        median(finals)
    };
    let uz = rituz_median(1.0);
    let mut best_penalty = f64::INFINITY;
    let mut best_gamma = 0.0;
    for gamma in [1.0, 10.0, 1e3, 1e5] {
        let mut finals = Vec::new();
        for seed in [0, 1, 2] {
            let mut cfg = shorten(paper_default_1d(Method::RitzPenalty, seed));
            cfg.gamma = gamma;
            let out = run(&cfg, &problem).unwrap();
            finals.push(out.history.rows.last().unwrap().l2_error);
        }
        let m = median(finals);
        if m < best_penalty {
            best_penalty = m;
            best_gamma = gamma;
        }
    }
    // Diagnostic context for the gate: the exact-inner-solve stability
    // threshold of this multiplier iteration, and a run below it.
    let grid = FdGrid::new(999);
    let radius_at_one = iteration_spectral_radius(0.0, 1.0, 0.1, &grid);
    let threshold = {
        let (mut lo, mut hi) = (1e-4, 4.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if iteration_spectral_radius(0.0, mid, 0.1, &grid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let uz_small_rho = rituz_median(0.1);
    println!(
        "criterion 6 context: penalty medians' best {best_penalty:.2e} at gamma={best_gamma}; \
         untuned multiplier run at rho=0.1 reaches {uz_small_rho:.2e}; \
         at rho=1 the gamma=0 iteration has exact-solve spectral radius {radius_at_one:.2} \
         (stable only for rho < {threshold:.3}), and the training run limit-cycles at {uz:.2e}; {:.0}s",
        t0.elapsed().as_secs_f64()
    );
    assert!(
        uz <= 2.0 * best_penalty,
        "untuned multiplier run (gamma=0, rho=1) reached {uz:.2e}, above 2x the best tuned \
         penalty {best_penalty:.2e} (gamma={best_gamma}). This configuration sits outside the \
         multiplier iteration's stability region: with exact inner solves the boundary error map \
         has spectral radius {radius_at_one:.2} at rho=1 (> 1; the gamma=0 iteration is stable \
         only for rho < {threshold:.3} at epsilon=0.1), so the trained runs settle into a bounded \
         limit cycle rather than converging, for every inner-epoch/learning-rate combination \
         tried. Below the threshold the claim holds with a wide margin: rho=0.1 reaches \
         {uz_small_rho:.2e}, {:.0}x better than the best tuned penalty.",
        best_penalty / uz_small_rho
    );
    println!(
        "ACCEPTANCE 6 PASS: RitUz(gamma=0, rho=1) {uz:.2e} <= 2x best penalty {best_penalty:.2e} (gamma={best_gamma})"
    );
}

#[test]
fn criterion_7_highdim_ball_vs_hard_bc() {
    let _serial = HEAVY.lock().unwrap();
    let t0 = Instant::now();
    let problem = Problem::highdim(4, false).unwrap();
    let mk = |method: Method| RunConfig {
        method,
        rho: 0.1,
        gamma: 10.0,
        n_uz: 500,
        n_sgd: 40,
        lr: 1e-3,
        seed: 0,
        depth: 5,
        width: 40,
        batch_interior: 256,
        batch_boundary: 512,
        lambda_points: 512,
        resample_every: 10,
        reset_optimizer: false,
    };
    let uz = run(&mk(Method::RitUz), &problem).unwrap();
    assert!(!uz.history.diverged);
    let hard = run(&mk(Method::HardRitz), &problem).unwrap();
    assert!(!hard.history.diverged);
    let (uz_l2, hard_l2) = (
        uz.history.rows.last().unwrap().l2_error,
        hard.history.rows.last().unwrap().l2_error,
    );
    let dt = t0.elapsed().as_secs_f64();
    assert!(
        uz_l2 <= 2.0 * hard_l2,
        "RitUz {uz_l2} vs 2x cRitz baseline {hard_l2}"
    );
    assert!(dt < budget(900.0), "criterion 7 took {dt:.0}s (> 15 min)");
    println!(
        "ACCEPTANCE 7 PASS: RitUz {uz_l2:.2e} <= 2x cRitz {hard_l2:.2e} under a 20000-epoch budget; {dt:.0}s"
    );
}

#[test]
fn criterion_8_lshape_pinnuz() {
    let _serial = HEAVY.lock().unwrap();
    let t0 = Instant::now();
    let problem = Problem::lshape(1e-3).unwrap();
    let mk = |rho: f64, seed: u64| RunConfig {
        method: Method::PinnUz,
        rho,
        gamma: 2.0,
        n_uz: 150,
        n_sgd: 40,
        lr: 1e-4,
        seed,
        depth: 10,
        width: 40,
        batch_interior: 128,
        batch_boundary: 128,
        lambda_points: 128,
        resample_every: 10,
        reset_optimizer: false,
    };
    let mut finals = Vec::new();
    let mut early = Vec::new();
    let mut big_rho_bad = 0;
    for seed in [0, 1, 2] {
        let ok = run(&mk(1.0, seed), &problem).unwrap();
        assert!(!ok.history.diverged, "rho=1 seed {seed} diverged");
        let rows = &ok.history.rows;
        finals.push(rows.last().unwrap().l2_error);
        early.push(rows[9].l2_error);
        let bad = run(&mk(5.0, seed), &problem).unwrap();
        let bad_l2 = bad.history.rows.last().unwrap().l2_error;
        if bad.history.diverged || bad_l2 >= 5.0 * rows.last().unwrap().l2_error {
            big_rho_bad += 1;
        }
    }
    let l2 = median(finals);
    let at10 = median(early);
    assert!(l2 <= 0.2, "median final relative L2 error {l2}");
    assert!(l2 < at10, "error did not decrease over outer steps");
    assert!(
        big_rho_bad >= 2,
        "rho=5 should diverge or be 5x worse on most seeds (got {big_rho_bad}/3)"
    );
    println!(
        "ACCEPTANCE 8 PASS: median l2 {l2:.2e} (<=0.2), early {at10:.2e}; rho=5 bad on {big_rho_bad}/3 seeds; {:.0}s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_9_history_is_bitwise_reproducible() {
    // Repeat the criterion-4 configuration twice through the experiment
    // runner; the CSV must match byte for byte once the wall-clock column
    // is stripped (wall time is the one intentionally irreproducible
    // column).
    let t0 = Instant::now();
    let root = std::env::temp_dir().join(format!("duz_accept9_{}", std::process::id()));
    let strip_seconds = |text: &str| -> String {
        text.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut outputs = Vec::new();
    for rep in 0..2 {
        let dir = root.join(format!("rep{rep}"));
        let overrides: Vec<String> = vec![
            "problem=boundary_layer".into(),
            "method=RitUz".into(),
            "rho=1".into(),
            "gamma=2".into(),
            "n_uz=500".into(),
            "n_sgd=40".into(),
            "seed=0".into(),
            format!("out_dir={}", dir.display()),
        ];
        let cfg = deep_uzawa::cli::parse_config(None, &overrides).unwrap();
        let out = deep_uzawa::cli::run_experiment(&cfg).unwrap();
        assert!(!out.diverged);
        let text = std::fs::read_to_string(dir.join("history.csv")).unwrap();
        assert_eq!(text.lines().count(), 501, "header plus one row per outer step");
        outputs.push(text);
    }
    assert_eq!(
        strip_seconds(&outputs[0]),
        strip_seconds(&outputs[1]),
        "histories differ beyond the seconds column"
    );
    std::fs::remove_dir_all(root).ok();
    println!(
        "ACCEPTANCE 9 PASS: criterion-4 history reproduced bitwise (seconds column excluded); {:.0}s",
        t0.elapsed().as_secs_f64()
    );
}
