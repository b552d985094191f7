//! Run configuration: a flat `key = value` file (TOML-compatible subset)
//! with per-problem paper defaults, strict schema checking, and
//! `key=value` command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::{Problem, ProblemError};
use crate::sampling::Domain;
use crate::uzawa::{Method, RunConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{0}`: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config schema: {0}")]
    Schema(String),
    #[error("override `{0}` is not a `key=value` pair")]
    BadOverride(String),
}

/// Which benchmark problem to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProblemKind {
    BoundaryLayer,
    LShape,
    HighDim,
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "boundary_layer" => Ok(ProblemKind::BoundaryLayer),
            "lshape" => Ok(ProblemKind::LShape),
            "highdim" => Ok(ProblemKind::HighDim),
            other => Err(format!(
                "unknown problem `{other}` (expected boundary_layer, lshape or highdim)"
            )),
        }
    }
}

/// Raw schema: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<String>,
    dimension: Option<usize>,
    epsilon: Option<f64>,
    method: Option<String>,
    rho: Option<f64>,
    gamma: Option<f64>,
    n_uz: Option<u64>,
    n_sgd: Option<u64>,
    lr: Option<f64>,
    depth: Option<usize>,
    width: Option<usize>,
    seed: Option<u64>,
    batch_interior: Option<usize>,
    batch_boundary: Option<usize>,
    resample_every: Option<u64>,
    lambda_points: Option<usize>,
    out_dir: Option<String>,
    reset_optimizer: Option<bool>,
    include_reaction: Option<bool>,
    /// Interior node count of the finite-difference oracle.
    fd_nodes: Option<usize>,
}

/// A fully-resolved configuration: problem selection plus the run
/// parameters, with paper defaults filled in.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub problem: ProblemKind,
    pub dimension: usize,
    pub epsilon: f64,
    pub include_reaction: bool,
    pub run: RunConfig,
    pub out_dir: PathBuf,
    pub fd_nodes: usize,
}

impl ResolvedConfig {
    pub fn build_problem(&self) -> Result<Problem, ProblemError> {
        match self.problem {
            ProblemKind::BoundaryLayer => Problem::boundary_layer(self.epsilon),
            ProblemKind::LShape => Problem::lshape(self.epsilon),
            ProblemKind::HighDim => {
                Problem::highdim_with_epsilon(self.dimension, self.include_reaction, self.epsilon)
            }
        }
    }

    pub fn domain(&self) -> Domain {
        match self.problem {
            ProblemKind::BoundaryLayer => Domain::Interval,
            ProblemKind::LShape => Domain::LShape,
            ProblemKind::HighDim => Domain::Ball { dim: self.dimension },
        }
    }
}

/// Parse a config file (optional) and apply `key=value` overrides, then
/// fill per-problem defaults and validate.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<ResolvedConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?,
        None => String::new(),
    };
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(ov.clone()))?;
        let (key, value) = (key.trim(), value.trim());
        // Accept bare strings in overrides: retry with quotes.
        let parsed: toml::Table = format!("{key} = {value}")
            .parse()
            .or_else(|_| format!("{key} = \"{value}\"").parse())
            .map_err(|e: toml::de::Error| ConfigError::Syntax(format!("override `{ov}`: {e}")))?;
        for (k, v) in parsed {
            table.insert(k, v);
        }
    }
    let raw: FileConfig = toml::Table::try_into(table.clone())
        .map_err(|e| ConfigError::Schema(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: FileConfig) -> Result<ResolvedConfig, ConfigError> {
    let problem: ProblemKind = raw
        .problem
        .as_deref()
        .unwrap_or("boundary_layer")
        .parse()
        .map_err(ConfigError::Schema)?;
    let method: Method = raw
        .method
        .as_deref()
        .unwrap_or("RitUz")
        .parse()
        .map_err(ConfigError::Schema)?;

    if raw.dimension.is_some() && problem != ProblemKind::HighDim {
        return Err(ConfigError::Schema(
            "`dimension` applies to problem = \"highdim\" only".into(),
        ));
    }
    if raw.include_reaction == Some(false) && problem != ProblemKind::HighDim {
        return Err(ConfigError::Schema(
            "dropping the reaction term is supported for problem = \"highdim\" only".into(),
        ));
    }

    // Per-problem paper defaults; everything else is the common default.
    let (epsilon, lr, depth, batch_interior, batch_boundary, lambda_points, resample_every) =
        match problem {
            ProblemKind::BoundaryLayer => (0.1, 1e-3, 5, 128, 2, 2, 0),
            ProblemKind::LShape => (1e-3, 1e-4, 10, 512, 512, 512, 10),
            ProblemKind::HighDim => (1.0, 1e-3, 5, 1024, 2048, 2048, 10),
        };
    let (gamma, rho) = match problem {
        ProblemKind::HighDim => (10.0, 0.1),
        _ => (2.0, 1.0),
    };

    let cfg = ResolvedConfig {
        problem,
        dimension: raw.dimension.unwrap_or(4),
        epsilon: raw.epsilon.unwrap_or(epsilon),
        include_reaction: raw
            .include_reaction
            .unwrap_or(problem != ProblemKind::HighDim),
        run: RunConfig {
            method,
            rho: raw.rho.unwrap_or(rho),
            gamma: raw.gamma.unwrap_or(gamma),
            n_uz: raw.n_uz.unwrap_or(500),
            n_sgd: raw.n_sgd.unwrap_or(40),
            lr: raw.lr.unwrap_or(lr),
            seed: raw.seed.unwrap_or(0),
            depth: raw.depth.unwrap_or(depth),
            width: raw.width.unwrap_or(40),
            batch_interior: raw.batch_interior.unwrap_or(batch_interior),
            batch_boundary: raw.batch_boundary.unwrap_or(batch_boundary),
            lambda_points: raw.lambda_points.unwrap_or(lambda_points),
            resample_every: raw.resample_every.unwrap_or(resample_every),
            reset_optimizer: raw.reset_optimizer.unwrap_or(false),
        },
        out_dir: PathBuf::from(raw.out_dir.as_deref().unwrap_or("out")),
        fd_nodes: raw.fd_nodes.unwrap_or(999),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ResolvedConfig) -> Result<(), ConfigError> {
    let r = &cfg.run;
    let fail = |msg: String| Err(ConfigError::Schema(msg));
    if cfg.epsilon <= 0.0 {
        return fail(format!("epsilon must be positive (got {})", cfg.epsilon));
    }
    if cfg.problem == ProblemKind::HighDim && (cfg.dimension % 2 != 0 || cfg.dimension < 2) {
        return fail(format!(
            "dimension must be even and at least 2 (got {})",
            cfg.dimension
        ));
    }
    if r.method.is_uzawa() && r.rho <= 0.0 {
        return fail(format!("rho must be positive for {} (got {})", r.method, r.rho));
    }
    if r.gamma < 0.0 {
        return fail(format!("gamma must be non-negative (got {})", r.gamma));
    }
    if r.lr <= 0.0 {
        return fail(format!("lr must be positive (got {})", r.lr));
    }
    if r.depth < 2 {
        return fail(format!("depth must be at least 2 (got {})", r.depth));
    }
    if r.width == 0 || r.batch_interior == 0 || r.batch_boundary == 0 || r.lambda_points == 0 {
        return fail("width, batch sizes and lambda_points must be positive".into());
    }
    if cfg.problem == ProblemKind::BoundaryLayer {
        if r.lambda_points != 2 {
            return fail(format!(
                "the interval boundary is exactly two points; lambda_points must be 2 (got {})",
                r.lambda_points
            ));
        }
        if r.batch_boundary != 2 {
            return fail(format!(
                "the interval boundary is exactly two points; batch_boundary must be 2 (got {})",
                r.batch_boundary
            ));
        }
    }
    if r.method.is_hard() && cfg.problem != ProblemKind::HighDim {
        return fail(format!(
            "{} conditions the output on the unit ball; use problem = \"highdim\"",
            r.method
        ));
    }
    if cfg.fd_nodes < 1 {
        return fail("fd_nodes must be positive".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("duz_config_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!(
            "cfg_{}_{}.toml",
            std::process::id(),
            rand::random::<u64>()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn empty_file_yields_paper_defaults() {
        let p = write_tmp("");
        let cfg = parse_config(Some(&p), &[]).unwrap();
        assert_eq!(cfg.problem, ProblemKind::BoundaryLayer);
        assert_eq!(cfg.run.n_sgd, 40);
        assert_eq!(cfg.run.n_uz, 500);
        assert_eq!(cfg.run.lr, 1e-3);
        assert_eq!(cfg.run.depth, 5);
        assert_eq!(cfg.run.width, 40);
        assert_eq!(cfg.epsilon, 0.1);
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn per_problem_defaults() {
        let p = write_tmp("problem = \"lshape\"\nmethod = \"PINNUz\"\n");
        let cfg = parse_config(Some(&p), &[]).unwrap();
        assert_eq!(cfg.run.lr, 1e-4);
        assert_eq!(cfg.run.depth, 10);
        assert_eq!(cfg.epsilon, 1e-3);
        std::fs::remove_file(p).ok();

        let p = write_tmp("problem = \"highdim\"\n");
        let cfg = parse_config(Some(&p), &[]).unwrap();
        assert_eq!(cfg.dimension, 4);
        assert!(!cfg.include_reaction);
        assert_eq!(cfg.run.batch_interior, 1024);
        assert_eq!(cfg.run.batch_boundary, 2048);
        assert_eq!(cfg.run.lambda_points, 2048);
        assert_eq!(cfg.run.resample_every, 10);
        assert_eq!(cfg.run.gamma, 10.0);
        assert_eq!(cfg.run.rho, 0.1);
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let p = write_tmp("rho = 1.0\nrho_typo = 2.0\n");
        let err = parse_config(Some(&p), &[]).unwrap_err();
        assert!(err.to_string().contains("rho_typo"), "{err}");
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn odd_dimension_rejected() {
        let p = write_tmp("problem = \"highdim\"\ndimension = 5\n");
        assert!(matches!(
            parse_config(Some(&p), &[]),
            Err(ConfigError::Schema(_))
        ));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn nonpositive_rho_rejected_for_uzawa() {
        let p = write_tmp("method = \"RitUz\"\nrho = -0.5\n");
        assert!(parse_config(Some(&p), &[]).is_err());
        std::fs::remove_file(p).ok();
        // but fine for the penalty baseline
        let p = write_tmp("method = \"RitzPenalty\"\nrho = -0.5\n");
        assert!(parse_config(Some(&p), &[]).is_ok());
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn overrides_win_and_accept_bare_strings() {
        let p = write_tmp("rho = 1.0\n");
        let cfg = parse_config(
            Some(&p),
            &["rho=0.25".into(), "method=PINNUz".into(), "seed = 7".into()],
        )
        .unwrap();
        assert_eq!(cfg.run.rho, 0.25);
        assert_eq!(cfg.run.method, Method::PinnUz);
        assert_eq!(cfg.run.seed, 7);
        std::fs::remove_file(p).ok();
        assert!(matches!(
            parse_config(None, &["justakey".into()]),
            Err(ConfigError::BadOverride(_))
        ));
    }

    #[test]
    fn interval_boundary_counts_are_pinned() {
        let p = write_tmp("lambda_points = 7\n");
        assert!(parse_config(Some(&p), &[]).is_err());
        std::fs::remove_file(p).ok();
    }
}
