use deep_uzawa::problems::Problem;
use deep_uzawa::uzawa::{run, Method, RunConfig};
use std::time::Instant;

fn main() {
    // criterion-4-like: 1D RitUz
    let problem = Problem::boundary_layer(0.1).unwrap();
    let cfg = RunConfig {
        method: Method::RitUz, rho: 1.0, gamma: 2.0,
        n_uz: 10, n_sgd: 40, lr: 1e-3, seed: 0,
        depth: 5, width: 40,
        batch_interior: 128, batch_boundary: 2, lambda_points: 2,
        resample_every: 0, reset_optimizer: false,
    };
    let t = Instant::now();
    let r = run(&cfg, &problem).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("1D RitUz   : {:6.1} ms / 400 epochs+10 rows -> {:5.2} ms/epoch, l2={:.3}", dt*1e3, dt*1e3/400.0, r.history.rows.last().unwrap().l2_error);

    let mut cfg2 = cfg.clone();
    cfg2.method = Method::PinnUz;
    let t = Instant::now();
    let r = run(&cfg2, &problem).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("1D PINNUz  : {:6.1} ms / 400 epochs -> {:5.2} ms/epoch, l2={:.3}", dt*1e3, dt*1e3/400.0, r.history.rows.last().unwrap().l2_error);

    // criterion-7-like: 4D ball RitUz
    let problem = Problem::highdim(4, false).unwrap();
    let cfg3 = RunConfig {
        method: Method::RitUz, rho: 0.1, gamma: 10.0,
        n_uz: 5, n_sgd: 40, lr: 1e-3, seed: 0,
        depth: 5, width: 40,
        batch_interior: 256, batch_boundary: 512, lambda_points: 512,
        resample_every: 10, reset_optimizer: false,
    };
    let t = Instant::now();
    let r = run(&cfg3, &problem).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("4D RitUz   : {:6.1} ms / 200 epochs+5 rows -> {:5.2} ms/epoch, l2={:.3}", dt*1e3, dt*1e3/200.0, r.history.rows.last().unwrap().l2_error);

    let mut cfg4 = cfg3.clone();
    cfg4.method = Method::HardRitz;
    let t = Instant::now();
    let r = run(&cfg4, &problem).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("4D HardRitz: {:6.1} ms / 200 epochs -> {:5.2} ms/epoch, l2={:.3}", dt*1e3, dt*1e3/200.0, r.history.rows.last().unwrap().l2_error);

    // criterion-8-like: L-shape PINNUz L=10
    let problem = Problem::lshape(1e-3).unwrap();
    let cfg5 = RunConfig {
        method: Method::PinnUz, rho: 1.0, gamma: 2.0,
        n_uz: 3, n_sgd: 40, lr: 1e-4, seed: 0,
        depth: 10, width: 40,
        batch_interior: 256, batch_boundary: 256, lambda_points: 256,
        resample_every: 10, reset_optimizer: false,
    };
    let t = Instant::now();
    let r = run(&cfg5, &problem).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("L PINNUz   : {:6.1} ms / 120 epochs+3 rows -> {:5.2} ms/epoch, l2={:.3}", dt*1e3, dt*1e3/120.0, r.history.rows.last().unwrap().l2_error);
}
