// Exploration harness for picking desk-scale acceptance settings.
use deep_uzawa::problems::Problem;
use deep_uzawa::uzawa::{run, Method, RunConfig};
use std::time::Instant;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn main() {
    let scenario = std::env::args().nth(1).unwrap_or_else(|| "c4".into());
    match scenario.as_str() {
        "c4" => {
            // RitUz 1D paper defaults.
            let problem = Problem::boundary_layer(0.1).unwrap();
            let mut finals = vec![];
            let mut bnds = vec![];
            for seed in [0u64, 1, 2] {
                let cfg = RunConfig {
                    method: Method::RitUz, rho: 1.0, gamma: 2.0,
                    n_uz: 500, n_sgd: 40, lr: 1e-3, seed,
                    depth: 5, width: 40,
                    batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                    resample_every: 0, reset_optimizer: false,
                };
                let t = Instant::now();
                let r = run(&cfg, &problem).unwrap();
                let rows = &r.history.rows;
                let at10 = rows[9].l2_error;
                let last = rows.last().unwrap();
                println!(
                    "c4 seed {seed}: l2={:.4e} bnd={:.4e} l2@10={:.4e} diverged={} ({:.0}s)",
                    last.l2_error, last.boundary_l2_error, at10, r.history.diverged,
                    t.elapsed().as_secs_f64()
                );
                finals.push(last.l2_error);
                bnds.push(last.boundary_l2_error);
            }
            println!("c4 median l2={:.4e} bnd={:.4e}", median(finals), median(bnds));
        }
        "c5" => {
            let problem = Problem::boundary_layer(0.1).unwrap();
            let mut finals = vec![];
            for seed in [0u64, 1, 2] {
                let cfg = RunConfig {
                    method: Method::PinnUz, rho: 1.0, gamma: 2.0,
                    n_uz: 500, n_sgd: 40, lr: 1e-3, seed,
                    depth: 5, width: 40,
                    batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                    resample_every: 0, reset_optimizer: false,
                };
                let t = Instant::now();
                let r = run(&cfg, &problem).unwrap();
                let last = r.history.rows.last().unwrap();
                println!(
                    "c5 seed {seed}: l2={:.4e} bnd={:.4e} diverged={} ({:.0}s)",
                    last.l2_error, last.boundary_l2_error, r.history.diverged,
                    t.elapsed().as_secs_f64()
                );
                finals.push(last.l2_error);
            }
            println!("c5 median l2={:.4e}", median(finals));
        }
        "c6" => {
            let problem = Problem::boundary_layer(0.1).unwrap();
            let base = RunConfig {
                method: Method::RitUz, rho: 1.0, gamma: 0.0,
                n_uz: 200, n_sgd: 40, lr: 1e-3, seed: 0,
                depth: 5, width: 40,
                batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                resample_every: 0, reset_optimizer: false,
            };
            let mut uz = vec![];
            for seed in [0u64, 1, 2] {
                let mut c = base.clone();
                c.seed = seed;
                let r = run(&c, &problem).unwrap();
                let last = r.history.rows.last().unwrap();
                println!("c6 RitUz g=0 seed {seed}: l2={:.4e} div={}", last.l2_error, r.history.diverged);
                uz.push(last.l2_error);
            }
            for gamma in [1.0, 10.0, 1e3, 1e5] {
                let mut pens = vec![];
                for seed in [0u64, 1, 2] {
                    let mut c = base.clone();
                    c.method = Method::RitzPenalty;
                    c.gamma = gamma;
                    c.seed = seed;
                    let r = run(&c, &problem).unwrap();
                    pens.push(r.history.rows.last().unwrap().l2_error);
                }
                println!("c6 penalty g={gamma:.0e}: median l2={:.4e}", median(pens));
            }
            println!("c6 RitUz median: {:.4e}", median(uz));
        }
        "c7" => {
            let problem = Problem::highdim(4, false).unwrap();
            let mk = |method: Method| RunConfig {
                method, rho: 0.1, gamma: 10.0,
                n_uz: 500, n_sgd: 40, lr: 1e-3, seed: 0,
                depth: 5, width: 40,
                batch_interior: 256, batch_boundary: 512, lambda_points: 512,
                resample_every: 10, reset_optimizer: false,
            };
            let t = Instant::now();
            let r = run(&mk(Method::RitUz), &problem).unwrap();
            let uz = r.history.rows.last().unwrap().l2_error;
            println!("c7 RitUz   : l2={:.4e} div={} ({:.0}s)", uz, r.history.diverged, t.elapsed().as_secs_f64());
            let t = Instant::now();
            let r = run(&mk(Method::HardRitz), &problem).unwrap();
            let hard = r.history.rows.last().unwrap().l2_error;
            println!("c7 HardRitz: l2={:.4e} div={} ({:.0}s)", hard, r.history.diverged, t.elapsed().as_secs_f64());
            println!("c7 ratio = {:.2}", uz / hard);
        }
        "c8" => {
            let problem = Problem::lshape(1e-3).unwrap();
            let mk = |rho: f64, seed: u64| RunConfig {
                method: Method::PinnUz, rho, gamma: 2.0,
                n_uz: 150, n_sgd: 40, lr: 1e-4, seed,
                depth: 10, width: 40,
                batch_interior: 128, batch_boundary: 128, lambda_points: 128,
                resample_every: 10, reset_optimizer: false,
            };
            for seed in [0u64, 1, 2] {
                let t = Instant::now();
                let r = run(&mk(1.0, seed), &problem).unwrap();
                let rows = &r.history.rows;
                let last = rows.last().unwrap();
                let first = &rows[9.min(rows.len() - 1)];
                println!(
                    "c8 rho=1 seed {seed}: l2={:.4e} (early {:.4e}) div={} ({:.0}s)",
                    last.l2_error, first.l2_error, r.history.diverged, t.elapsed().as_secs_f64()
                );
                let r5 = run(&mk(5.0, seed), &problem).unwrap();
                let last5 = r5.history.rows.last().unwrap();
                println!(
                    "c8 rho=5 seed {seed}: l2={:.4e} div={} rows={}",
                    last5.l2_error, r5.history.diverged, r5.history.rows.len()
                );
            }
        }
        "c6scan" => {
            // (n_sgd, lr) scan for the gamma = 0, rho = 1 stability regime
            // at a fixed 8000-epoch budget.
            let problem = Problem::boundary_layer(0.1).unwrap();
            for (n_sgd, lr) in [
                (40u64, 1e-4),
                (40, 3e-4),
                (40, 5e-4),
                (100, 3e-4),
                (20, 3e-4),
                (40, 2e-4),
            ] {
                let n_uz = 12000 / n_sgd;
                let mut finals = vec![];
                let mut divs = 0;
                for seed in [0u64, 1, 2] {
                    let cfg = RunConfig {
                        method: Method::RitUz, rho: 1.0, gamma: 0.0,
                        n_uz, n_sgd, lr, seed,
                        depth: 5, width: 40,
                        batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                        resample_every: 0, reset_optimizer: false,
                    };
                    let r = run(&cfg, &problem).unwrap();
                    finals.push(r.history.rows.last().unwrap().l2_error);
                    divs += r.history.diverged as u32;
                }
                println!(
                    "c6scan n_sgd={n_sgd:3} lr={lr:.0e}: median l2={:.4e} (all: {:.2e} {:.2e} {:.2e}) div={divs}",
                    median(finals.clone()), finals[0], finals[1], finals[2]
                );
            }
        }
        "c6diag" => {
            // Trajectory of the gamma = 0, rho = 1 run: l2 error and the
            // multiplier path against the saddle flux -0.2905.
            let problem = Problem::boundary_layer(0.1).unwrap();
            let cfg = RunConfig {
                method: Method::RitUz, rho: 1.0, gamma: 0.0,
                n_uz: 200, n_sgd: 40, lr: 1e-3, seed: 0,
                depth: 5, width: 40,
                batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                resample_every: 0, reset_optimizer: false,
            };
            let r = run(&cfg, &problem).unwrap();
            for row in r.history.rows.iter().step_by(5) {
                println!(
                    "k={:3} l2={:.3e} bnd={:.3e} |lam|={:.3e} loss={:.3e}",
                    row.uzawa_step, row.l2_error, row.boundary_l2_error, row.lambda_norm, row.loss
                );
            }
            println!("diverged={}", r.history.diverged);
        }
        "c6rho" => {
            // Does a small rho (inside the exact-iteration threshold)
            // converge at gamma = 0 within the same budget?
            let problem = Problem::boundary_layer(0.1).unwrap();
            for rho in [0.1, 0.3, 0.5] {
                let mut finals = vec![];
                for seed in [0u64, 1, 2] {
                    let cfg = RunConfig {
                        method: Method::RitUz, rho, gamma: 0.0,
                        n_uz: 200, n_sgd: 40, lr: 1e-3, seed,
                        depth: 5, width: 40,
                        batch_interior: 128, batch_boundary: 2, lambda_points: 2,
                        resample_every: 0, reset_optimizer: false,
                    };
                    let r = run(&cfg, &problem).unwrap();
                    finals.push(r.history.rows.last().unwrap().l2_error);
                }
                println!("c6rho rho={rho}: median l2={:.4e}", median(finals));
            }
        }
        "c8b" => {
            let problem = Problem::lshape(1e-3).unwrap();
            let mk = |rho: f64, seed: u64| RunConfig {
                method: Method::PinnUz, rho, gamma: 2.0,
                n_uz: 250, n_sgd: 40, lr: 1e-4, seed,
                depth: 10, width: 40,
                batch_interior: 192, batch_boundary: 256, lambda_points: 256,
                resample_every: 10, reset_optimizer: false,
            };
            for seed in [0u64, 1, 2] {
                let t = Instant::now();
                let r = run(&mk(1.0, seed), &problem).unwrap();
                let rows = &r.history.rows;
                let last = rows.last().unwrap();
                println!(
                    "c8b rho=1 seed {seed}: l2={:.4e} (early {:.4e}) div={} ({:.0}s)",
                    last.l2_error, rows[9].l2_error, r.history.diverged, t.elapsed().as_secs_f64()
                );
                let r5 = run(&mk(5.0, seed), &problem).unwrap();
                let last5 = r5.history.rows.last().unwrap();
                println!(
                    "c8b rho=5 seed {seed}: l2={:.4e} div={} rows={}",
                    last5.l2_error, r5.history.diverged, r5.history.rows.len()
                );
            }
        }
        "c7b" => {
            let problem = Problem::highdim(4, false).unwrap();
            let mk = |method: Method| RunConfig {
                method, rho: 0.1, gamma: 10.0,
                n_uz: 500, n_sgd: 40, lr: 1e-3, seed: 0,
                depth: 5, width: 40,
                batch_interior: 192, batch_boundary: 384, lambda_points: 384,
                resample_every: 10, reset_optimizer: false,
            };
            let t = Instant::now();
            let r = run(&mk(Method::RitUz), &problem).unwrap();
            let uz = r.history.rows.last().unwrap().l2_error;
            println!("c7b RitUz   : l2={:.4e} div={} ({:.0}s)", uz, r.history.diverged, t.elapsed().as_secs_f64());
            let t = Instant::now();
            let r = run(&mk(Method::HardRitz), &problem).unwrap();
            let hard = r.history.rows.last().unwrap().l2_error;
            println!("c7b HardRitz: l2={:.4e} div={} ({:.0}s)", hard, r.history.diverged, t.elapsed().as_secs_f64());
            println!("c7b ratio = {:.2}", uz / hard);
        }
        other => eprintln!("unknown scenario {other}"),
    }
}
