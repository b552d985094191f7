//! Configuration-driven experiment running: flat TOML-subset configs,
//! single runs and parameter sweeps with CSV/JSON/SVG outputs, and the
//! finite-difference oracle behind the same history schema.

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{parse_config, ConfigError, ProblemKind, ResolvedConfig};
pub use plot::{emit_plot, PlotKind};
pub use runner::{run_experiment, run_oracle, sweep, RunnerError};
