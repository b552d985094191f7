//! Executes resolved configurations: single runs, parameter sweeps and
//! the finite-difference oracle, writing the fixed-schema CSV history,
//! the final state, a parameter snapshot and a JSON metadata echo.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, ProblemKind, ResolvedConfig};
use crate::network::NetworkError;
use crate::problems::{admissible_rho_bound, trace_constant_bound, Problem, ProblemError};
use crate::reference_fd::{fd_uzawa, BoundaryPair, FdGrid};
use crate::uzawa::{run, HistoryRow, RunConfig, UzawaError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Uzawa(#[from] UzawaError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Plot(#[from] super::plot::PlotError),
    #[error("oracle runs on problem = \"boundary_layer\" only")]
    OracleNeedsInterval,
}

pub struct ExperimentOutcome {
    pub diverged: bool,
    pub out_dir: PathBuf,
    pub final_l2_error: Option<f64>,
}

pub const HISTORY_HEADER: &str =
    "uzawa_step,epoch,loss,l2_error,boundary_l2_error,h1_error,lambda_norm,seconds";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> std::io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 160 + 80);
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        let h1 = r.h1_error.map(fmt).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.uzawa_step,
            r.epoch,
            fmt(r.loss),
            fmt(r.l2_error),
            fmt(r.boundary_l2_error),
            h1,
            fmt(r.lambda_norm),
            fmt(r.seconds)
        ));
    }
    std::fs::write(path, out)
}

fn write_final_state_csv(path: &Path, problem: &Problem, values: &[f64]) -> std::io::Result<()> {
    let d = problem.eval_grid.dim();
    let mut out = String::new();
    for i in 0..d {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("u_theta,u_exact\n");
    let exact = problem.grid_exact_values();
    for (i, (p, _)) in problem.eval_grid.iter().enumerate() {
        for c in p {
            out.push_str(&fmt(*c));
            out.push(',');
        }
        out.push_str(&fmt(values[i]));
        out.push(',');
        if let Some(ex) = exact {
            out.push_str(&fmt(ex[i]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Advisory block for the metadata echo: the trace-constant bound where
/// the domain is star-shaped, the admissible-step bound it implies, and
/// whether the configured `(rho, gamma)` satisfy the two sufficient
/// conditions (`null` when not applicable).
fn advisory_json(cfg: &ResolvedConfig) -> serde_json::Value {
    let x0: Vec<f64> = match cfg.problem {
        ProblemKind::BoundaryLayer => vec![0.5],
        ProblemKind::LShape => vec![0.0, 0.0],
        ProblemKind::HighDim => vec![0.0; cfg.dimension],
    };
    let c_tr = trace_constant_bound(cfg.domain(), &x0).ok();
    let rho_bound = c_tr.map(|c| admissible_rho_bound(c, cfg.epsilon, cfg.run.gamma));
    let uz = cfg.run.method.is_uzawa();
    let thm32 = match (uz, rho_bound) {
        (true, Some(b)) => Some(cfg.run.rho < b),
        _ => None,
    };
    let thm41 = if uz {
        Some(2.0 * cfg.run.gamma - cfg.run.rho > 2.0)
    } else {
        None
    };
    serde_json::json!({
        "trace_constant_bound": c_tr,
        "admissible_rho_bound": rho_bound,
        "theorem_32_condition": thm32,
        "theorem_41_condition": thm41,
    })
}

fn write_meta(
    dir: &Path,
    cfg: &ResolvedConfig,
    diverged: bool,
    rows: usize,
    wall_seconds: f64,
) -> std::io::Result<()> {
    let meta = serde_json::json!({
        "config": cfg,
        "advisory": advisory_json(cfg),
        "diverged": diverged,
        "rows": rows,
        "wall_seconds": wall_seconds,
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).unwrap())
}

/// Run one experiment and write `history.csv`, `final_state.csv`,
/// `params.bin` and `meta.json` into the configured output directory.
/// Diverged runs still write partial outputs (flagged in the metadata).
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentOutcome, RunnerError> {
    let started = Instant::now();
    let problem = cfg.build_problem()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let result = run(&cfg.run, &problem)?;
    write_history_csv(&cfg.out_dir.join("history.csv"), &result.history.rows)?;
    let values = if cfg.run.method.is_hard() {
        let ex = problem.exact.as_ref().expect("hard methods have exact data");
        let mut v = result.params.forward_many(&problem.eval_grid)?;
        for (val, (p, _)) in v.iter_mut().zip(problem.eval_grid.iter()) {
            let r2: f64 = p.iter().map(|c| c * c).sum();
            *val = (1.0 - r2) * *val + r2 * (ex.value)(p);
        }
        v
    } else {
        result.params.forward_many(&problem.eval_grid)?
    };
    write_final_state_csv(&cfg.out_dir.join("final_state.csv"), &problem, &values)?;
    result.params.save(&cfg.out_dir.join("params.bin"))?;
    write_meta(
        &cfg.out_dir,
        cfg,
        result.history.diverged,
        result.history.rows.len(),
        started.elapsed().as_secs_f64(),
    )?;
    Ok(ExperimentOutcome {
        diverged: result.history.diverged,
        out_dir: cfg.out_dir.clone(),
        final_l2_error: result.history.rows.last().map(|r| r.l2_error),
    })
}

/// Cartesian sweep over `--grid key=v1,v2,...` specifications. Each entry
/// runs in its own subdirectory (`key=value` joined by `_`), in parallel.
pub fn sweep(
    base: &ResolvedConfig,
    base_overrides: &[String],
    grids: &[(String, Vec<String>)],
    config_path: Option<&Path>,
) -> Result<Vec<ExperimentOutcome>, RunnerError> {
    if grids.is_empty() {
        return Ok(vec![run_experiment(base)?]);
    }
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in grids {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut c = combo.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    let root = base.out_dir.clone();
    let jobs: Vec<(PathBuf, Vec<String>)> = combos
        .iter()
        .map(|combo| {
            let name = combo
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("_");
            let mut ovs = base_overrides.to_vec();
            ovs.extend(combo.iter().map(|(k, v)| format!("{k}={v}")));
            ovs.push(format!("out_dir={}", root.join(&name).display()));
            (root.join(name), ovs)
        })
        .collect();
    jobs.par_iter()
        .map(|(_, ovs)| {
            let cfg = super::config::parse_config(config_path, ovs)?;
            run_experiment(&cfg)
        })
        .collect()
}

/// The finite-difference oracle behind the same outputs: `history.csv`
/// rows indexed by the multiplier iteration, plus `meta.json`.
pub fn run_oracle(cfg: &ResolvedConfig) -> Result<ExperimentOutcome, RunnerError> {
    if cfg.problem != ProblemKind::BoundaryLayer {
        return Err(RunnerError::OracleNeedsInterval);
    }
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.out_dir)?;
    let grid = FdGrid::new(cfg.fd_nodes);
    let t0 = Instant::now();
    let fd = fd_uzawa(
        cfg.run.gamma,
        cfg.run.rho,
        cfg.epsilon,
        &|_| 1.0,
        BoundaryPair::ZERO,
        &grid,
        cfg.run.n_uz as usize,
        BoundaryPair::ZERO,
    );
    let rows: Vec<HistoryRow> = fd
        .steps
        .iter()
        .map(|s| HistoryRow {
            uzawa_step: s.k as u64,
            epoch: s.k as u64,
            loss: s.loss,
            l2_error: s.rel_l2_error,
            boundary_l2_error: s.boundary_error,
            h1_error: Some(s.h1_error),
            lambda_norm: s.lambda.norm(),
            seconds: t0.elapsed().as_secs_f64(),
        })
        .collect();
    write_history_csv(&cfg.out_dir.join("history.csv"), &rows)?;
    let diverged = fd
        .steps
        .last()
        .map(|s| !s.lambda_error.is_finite() || s.lambda_error > 1e3 * fd.steps[0].lambda_error.max(1e-12))
        .unwrap_or(false);
    // Final state on the FD grid.
    let mut out = String::from("x0,u_theta,u_exact\n");
    for (i, v) in fd.final_u.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(grid.node(i)),
            fmt(*v),
            fmt(fd.u_star[i])
        ));
    }
    std::fs::write(cfg.out_dir.join("final_state.csv"), out)?;
    write_meta(&cfg.out_dir, cfg, diverged, rows.len(), started.elapsed().as_secs_f64())?;
    Ok(ExperimentOutcome {
        diverged,
        out_dir: cfg.out_dir.clone(),
        final_l2_error: rows.last().map(|r| r.l2_error),
    })
}

/// Observational timing benchmark: average seconds per epoch over a few
/// short runs for each even dimension in the range. Writes `bench.csv`.
pub fn bench_dims(cfg: &ResolvedConfig, dims: (usize, usize)) -> Result<PathBuf, RunnerError> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut out = String::from("dimension,seconds_per_epoch\n");
    let mut d = dims.0.max(2);
    if d % 2 == 1 {
        d += 1;
    }
    while d <= dims.1 {
        let problem = Problem::highdim_with_epsilon(d, cfg.include_reaction, cfg.epsilon)?;
        let mut rc: RunConfig = cfg.run.clone();
        rc.n_uz = 2;
        rc.n_sgd = 10;
        let t = Instant::now();
        let _ = run(&rc, &problem)?;
        let per_epoch = t.elapsed().as_secs_f64() / (rc.n_uz * rc.n_sgd) as f64;
        out.push_str(&format!("{d},{}\n", fmt(per_epoch)));
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "dim {d:3}: {per_epoch:.4} s/epoch").ok();
        d += 2;
    }
    let path = cfg.out_dir.join("bench.csv");
    std::fs::write(&path, out)?;
    Ok(path)
}
