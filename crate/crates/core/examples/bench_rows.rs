use deep_uzawa::problems::Problem;
use deep_uzawa::uzawa::{run, Method, RunConfig};
use std::time::Instant;

fn main() {
    let problem = Problem::highdim(4, false).unwrap();
    let base = RunConfig {
        method: Method::RitUz, rho: 0.1, gamma: 10.0,
        n_uz: 20, n_sgd: 0, lr: 1e-3, seed: 0,
        depth: 5, width: 40,
        batch_interior: 256, batch_boundary: 512, lambda_points: 512,
        resample_every: 10, reset_optimizer: false,
    };
    let t = Instant::now();
    let _ = run(&base, &problem).unwrap();
    println!("4D row-only: {:.1} ms/row", t.elapsed().as_secs_f64()*1e3/20.0);

    let mut c = base.clone(); c.n_uz = 5; c.n_sgd = 40; c.batch_interior = 128;
    let t = Instant::now();
    let _ = run(&c, &problem).unwrap();
    println!("4D batch128: {:.1} ms/(epoch) incl rows", t.elapsed().as_secs_f64()*1e3/200.0);

    let mut c = base.clone(); c.n_uz = 5; c.n_sgd = 40; c.lambda_points = 128;
    let t = Instant::now();
    let _ = run(&c, &problem).unwrap();
    println!("4D lam128  : {:.1} ms/(epoch) incl rows", t.elapsed().as_secs_f64()*1e3/200.0);

    let problem = Problem::lshape(1e-3).unwrap();
    let mut c = base.clone(); c.method = Method::PinnUz; c.rho=1.0; c.gamma=2.0; c.lr=1e-4;
    c.depth=10; c.n_uz=10; c.n_sgd=0; c.batch_interior=128; c.batch_boundary=128; c.lambda_points=128;
    let t = Instant::now();
    let _ = run(&c, &problem).unwrap();
    println!("L row-only : {:.1} ms/row", t.elapsed().as_secs_f64()*1e3/10.0);
    let mut c2 = c.clone(); c2.n_uz=3; c2.n_sgd=40;
    let t = Instant::now();
    let _ = run(&c2, &problem).unwrap();
    println!("L batch128 : {:.1} ms/(epoch) incl rows", t.elapsed().as_secs_f64()*1e3/120.0);
}
