//! The outer multiplier iteration: rounds of Adam on the selected
//! discrete Lagrangian alternate with pointwise multiplier updates on a
//! boundary point set that stays fixed for the whole run.
//!
//! Penalty and hard-BC baselines reuse the same inner loop with the
//! multiplier machinery bypassed.

use std::time::Instant;

use thiserror::Error;

use crate::autodiff::{AutodiffError, Jet2, Tape};
use crate::losses::{pinn_lagrangian, ritz_lagrangian, HardBallField, LossError};
use crate::network::{forward_jets, MlpParams, NetworkError};
use crate::problems::Problem;
use crate::sampling::{
    sample_boundary, sample_interior, stream_seed, Domain, PointKind, PointSet, ResamplePlan,
    SampleError, StreamPurpose,
};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum UzawaError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Training scheme. `RitUz`/`PINNUz` run the multiplier iteration; the
/// penalty variants optimize the corresponding functional with a fixed
/// `gamma`; the hard variants condition the network output instead of
/// penalizing (unit-ball domains only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    RitUz,
    #[serde(rename = "PINNUz")]
    PinnUz,
    RitzPenalty,
    PinnPenalty,
    HardRitz,
    HardPinn,
}

impl Method {
    pub fn is_uzawa(self) -> bool {
        matches!(self, Method::RitUz | Method::PinnUz)
    }

    pub fn is_pinn(self) -> bool {
        matches!(self, Method::PinnUz | Method::PinnPenalty | Method::HardPinn)
    }

    pub fn is_hard(self) -> bool {
        matches!(self, Method::HardRitz | Method::HardPinn)
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "RitUz" => Ok(Method::RitUz),
            "PINNUz" => Ok(Method::PinnUz),
            "RitzPenalty" => Ok(Method::RitzPenalty),
            "PinnPenalty" => Ok(Method::PinnPenalty),
            "HardRitz" => Ok(Method::HardRitz),
            "HardPinn" => Ok(Method::HardPinn),
            other => Err(format!(
                "unknown method `{other}` (expected RitUz, PINNUz, RitzPenalty, PinnPenalty, HardRitz or HardPinn)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::RitUz => "RitUz",
            Method::PinnUz => "PINNUz",
            Method::RitzPenalty => "RitzPenalty",
            Method::PinnPenalty => "PinnPenalty",
            Method::HardRitz => "HardRitz",
            Method::HardPinn => "HardPinn",
        };
        f.write_str(s)
    }
}

/// Everything a single run needs besides the problem itself.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub method: Method,
    /// Uzawa step size (ignored by the baselines).
    pub rho: f64,
    pub gamma: f64,
    pub n_uz: u64,
    pub n_sgd: u64,
    pub lr: f64,
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub batch_interior: usize,
    pub batch_boundary: usize,
    /// Size of the fixed multiplier point set.
    pub lambda_points: usize,
    /// Redraw collocation batches every this many epochs; 0 keeps them.
    pub resample_every: u64,
    /// Restart Adam moments at each outer step instead of warm-starting.
    pub reset_optimizer: bool,
}

impl RunConfig {
    fn validate(&self, problem: &Problem) -> Result<(), UzawaError> {
        if self.method.is_uzawa() && self.rho <= 0.0 {
            return Err(UzawaError::Config(format!(
                "rho must be positive for {} (got {})",
                self.method, self.rho
            )));
        }
        if self.gamma < 0.0 {
            return Err(UzawaError::Config(format!("gamma must be non-negative (got {})", self.gamma)));
        }
        if self.method.is_hard() {
            if !matches!(problem.domain, Domain::Ball { .. }) {
                return Err(UzawaError::Config(
                    "hard boundary conditioning is defined on the unit ball only".into(),
                ));
            }
            if problem.exact.is_none() {
                return Err(UzawaError::Config(
                    "hard boundary conditioning needs the boundary extension".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The discrete Lagrange multiplier: one real value per point of a fixed
/// boundary set.
#[derive(Debug, Clone)]
pub struct Multiplier {
    pub points: PointSet,
    pub values: Vec<f64>,
}

impl Multiplier {
    /// Zero-initialized on the given boundary set. With the zero start the
    /// first outer step coincides with the penalty method.
    pub fn zeros(points: PointSet) -> Self {
        let values = vec![0.0; points.len()];
        Multiplier { points, values }
    }

    /// Boundary-weighted norm `sqrt(sum_b w_b lambda(b)^2)`.
    pub fn norm(&self) -> f64 {
        self.points
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Pointwise multiplier update `lambda(b) <- lambda(b) - rho (u(b) - g(b))`.
///
/// The sign follows the continuum update scheme (dual ascent for the
/// Lagrangian with the `- <lambda, u-g>` pairing): where the field
/// overshoots the boundary data the multiplier decreases. Boundary points
/// where `u = g` leave the multiplier untouched.
pub fn multiplier_update(lambda: &mut Multiplier, u_vals: &[f64], g_vals: &[f64], rho: f64) {
    assert!(rho > 0.0, "rho must be positive");
    assert_eq!(lambda.values.len(), u_vals.len());
    for ((l, u), g) in lambda.values.iter_mut().zip(u_vals).zip(g_vals) {
        *l -= rho * (u - g);
    }
}

/// Adam moment accumulators, shapes mirroring the flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    theta: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), UzawaError> {
    assert_eq!(theta.len(), grads.len());
    assert_eq!(theta.len(), state.m.len());
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(UzawaError::Config("non-finite gradient in optimizer step".into()));
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for i in 0..theta.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        theta[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

/// One history record. `seconds` is wall time since the start of the run
/// (monotone, and the one column that is not reproducible across runs).
#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub uzawa_step: u64,
    pub epoch: u64,
    pub loss: f64,
    /// Relative L2 error against the exact solution.
    pub l2_error: f64,
    pub boundary_l2_error: f64,
    /// Full H1 error; interval runs only.
    pub h1_error: Option<f64>,
    pub lambda_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunHistory {
    pub rows: Vec<HistoryRow>,
    pub diverged: bool,
}

pub struct RunResult {
    pub history: RunHistory,
    pub params: MlpParams,
}

struct TrainState<'p> {
    cfg: &'p RunConfig,
    problem: &'p Problem,
    params: MlpParams,
    adam: AdamState,
    tape: Tape,
    interior: PointSet,
    boundary_pen: PointSet,
    empty_boundary: PointSet,
    lambda: Option<Multiplier>,
    plan: ResamplePlan,
    lambda_g: Vec<f64>,
}

enum EpochOutcome {
    Loss(f64),
    Diverged,
}

impl<'p> TrainState<'p> {
    fn redraw(&mut self, epoch: u64) -> Result<(), UzawaError> {
        let idx = self.plan.draw_index(epoch);
        self.interior = sample_interior(
            self.problem.domain,
            self.cfg.batch_interior,
            stream_seed(self.cfg.seed, StreamPurpose::InteriorBatch, idx),
        )?;
        if !self.cfg.method.is_uzawa() && !self.cfg.method.is_hard() {
            self.boundary_pen = sample_boundary(
                self.problem.domain,
                self.cfg.batch_boundary,
                stream_seed(self.cfg.seed, StreamPurpose::BoundaryBatch, idx),
            )?;
        }
        Ok(())
    }

    /// One epoch: assemble the loss, backpropagate, take an Adam step.
    fn epoch(&mut self, global_epoch: u64) -> Result<EpochOutcome, UzawaError> {
        if global_epoch > 0 && self.plan.redraw_at(global_epoch) {
            self.redraw(global_epoch)?;
        }
        let (loss_value, grads) = {
            self.tape.reset();
            let net = self.params.bind(&self.tape);
            let loss = self.assemble_loss(&net)?;
            let v = crate::autodiff::Scalar::value(&loss);
            match self.tape.backward(loss) {
                Ok(g) => (v, g),
                Err(AutodiffError::NonFiniteGradient { .. }) => {
                    return Ok(EpochOutcome::Diverged)
                }
                Err(e) => return Err(e.into()),
            }
        };
        if !loss_value.is_finite() {
            return Ok(EpochOutcome::Diverged);
        }
        if adam_step(&mut self.params.theta, &grads.0, &mut self.adam, self.cfg.lr).is_err() {
            return Ok(EpochOutcome::Diverged);
        }
        Ok(EpochOutcome::Loss(loss_value))
    }

    fn assemble_loss<'t>(
        &self,
        net: &crate::network::BoundNet<'t>,
    ) -> Result<crate::autodiff::Var<'t>, UzawaError> {
        let data = &self.problem.data;
        let cfg = self.cfg;
        let loss = match cfg.method {
            Method::RitUz => ritz_lagrangian(
                net,
                self.lambda.as_ref(),
                &self.interior,
                &self.lambda.as_ref().unwrap().points,
                cfg.gamma,
                data,
            )?,
            Method::PinnUz => pinn_lagrangian(
                net,
                self.lambda.as_ref(),
                &self.interior,
                &self.lambda.as_ref().unwrap().points,
                cfg.gamma,
                data,
            )?,
            Method::RitzPenalty => {
                ritz_lagrangian(net, None, &self.interior, &self.boundary_pen, cfg.gamma, data)?
            }
            Method::PinnPenalty => {
                pinn_lagrangian(net, None, &self.interior, &self.boundary_pen, cfg.gamma, data)?
            }
            Method::HardRitz => {
                let field = HardBallField {
                    net,
                    exact: self.problem.exact.as_ref().expect("validated"),
                };
                ritz_lagrangian(&field, None, &self.interior, &self.empty_boundary, 0.0, data)?
            }
            Method::HardPinn => {
                let field = HardBallField {
                    net,
                    exact: self.problem.exact.as_ref().expect("validated"),
                };
                pinn_lagrangian(&field, None, &self.interior, &self.empty_boundary, 0.0, data)?
            }
        };
        Ok(loss)
    }

    /// Loss at the current parameters without stepping (for zero-epoch
    /// records).
    fn loss_snapshot(&mut self) -> Result<f64, UzawaError> {
        self.tape.reset();
        let net = self.params.bind(&self.tape);
        let loss = self.assemble_loss(&net)?;
        Ok(crate::autodiff::Scalar::value(&loss))
    }

    /// Field values over a whole point set, with the hard-BC blend applied
    /// on top of the batched network evaluation when needed.
    fn field_values(&self, pts: &PointSet) -> Vec<f64> {
        let mut vals = self.params.forward_many(pts).expect("shape checked");
        if self.cfg.method.is_hard() {
            let ex = self.problem.exact.as_ref().expect("validated");
            for (v, (p, _)) in vals.iter_mut().zip(pts.iter()) {
                let r2: f64 = p.iter().map(|c| c * c).sum();
                *v = (1.0 - r2) * *v + r2 * (ex.value)(p);
            }
        }
        vals
    }

    fn make_row(&self, uzawa_step: u64, epoch: u64, loss: f64, start: &Instant) -> HistoryRow {
        let l2 = self
            .problem
            .relative_l2_error_from_values(&self.field_values(&self.problem.eval_grid))
            .unwrap_or(f64::NAN);
        let boundary = self
            .problem
            .boundary_l2_error_from_values(&self.field_values(&self.problem.boundary_eval));
        let h1 = if self.problem.domain == Domain::Interval {
            let dims = self.params.dims();
            self.problem
                .h1_error_1d(|x| {
                    let j = forward_jets(&self.params.theta, &dims, &[Jet2::variable(x, 1.0)]);
                    (j.v, j.d1)
                })
                .ok()
        } else {
            None
        };
        HistoryRow {
            uzawa_step,
            epoch,
            loss,
            l2_error: l2,
            boundary_l2_error: boundary,
            h1_error: h1,
            lambda_norm: self.lambda.as_ref().map(|l| l.norm()).unwrap_or(0.0),
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Execute a full run. Divergence (non-finite loss or a boundary error
/// blown up a thousandfold) stops the run early and marks the history,
/// it is not an error.
pub fn run(cfg: &RunConfig, problem: &Problem) -> Result<RunResult, UzawaError> {
    cfg.validate(problem)?;
    let params = MlpParams::init(
        cfg.depth,
        cfg.width,
        problem.domain.dim(),
        stream_seed(cfg.seed, StreamPurpose::ParamInit, 0),
    )?;
    let n_params = params.param_count();
    let lambda = if cfg.method.is_uzawa() {
        let points = sample_boundary(
            problem.domain,
            cfg.lambda_points,
            stream_seed(cfg.seed, StreamPurpose::MultiplierSet, 0),
        )?;
        Some(Multiplier::zeros(points))
    } else {
        None
    };
    let lambda_g = lambda
        .as_ref()
        .map(|l| l.points.iter().map(|(p, _)| (problem.data.g)(p)).collect())
        .unwrap_or_default();
    let plan = ResamplePlan::new(cfg.resample_every, cfg.batch_interior, cfg.batch_boundary)?;
    let mut st = TrainState {
        cfg,
        problem,
        params,
        adam: AdamState::new(n_params),
        tape: Tape::new(),
        interior: PointSet::empty(problem.domain, PointKind::Interior),
        boundary_pen: PointSet::empty(problem.domain, PointKind::Boundary),
        empty_boundary: PointSet::empty(problem.domain, PointKind::Boundary),
        lambda,
        plan,
        lambda_g,
    };
    st.redraw(0)?;

    let start = Instant::now();
    let mut rows: Vec<HistoryRow> = Vec::new();
    let mut diverged = false;
    let initial_boundary_err =
        problem.boundary_l2_error_from_values(&st.field_values(&problem.boundary_eval));
    let blowup = 1e3 * initial_boundary_err.max(1e-12);

    if cfg.method.is_uzawa() {
        'outer: for k in 1..=cfg.n_uz {
            if cfg.reset_optimizer {
                st.adam.reset();
            }
            let mut last_loss = f64::NAN;
            for m in 0..cfg.n_sgd {
                let epoch = (k - 1) * cfg.n_sgd + m;
                match st.epoch(epoch)? {
                    EpochOutcome::Loss(l) => last_loss = l,
                    EpochOutcome::Diverged => {
                        diverged = true;
                        rows.push(st.make_row(k, (k - 1) * cfg.n_sgd + m, f64::NAN, &start));
                        break 'outer;
                    }
                }
            }
            if cfg.n_sgd == 0 {
                last_loss = st.loss_snapshot()?;
            }
            // Multiplier ascent on the fixed point set.
            let u_vals = st.field_values(&st.lambda.as_ref().expect("uzawa method").points);
            let g_vals = st.lambda_g.clone();
            multiplier_update(st.lambda.as_mut().unwrap(), &u_vals, &g_vals, cfg.rho);
            let row = st.make_row(k, k * cfg.n_sgd, last_loss, &start);
            let bad = !row.boundary_l2_error.is_finite() || row.boundary_l2_error > blowup;
            rows.push(row);
            if bad {
                diverged = true;
                break;
            }
        }
    } else {
        let total = cfg.n_uz * cfg.n_sgd;
        let mut last_loss = f64::NAN;
        let mut emitted_final = false;
        for epoch in 0..total {
            match st.epoch(epoch)? {
                EpochOutcome::Loss(l) => last_loss = l,
                EpochOutcome::Diverged => {
                    diverged = true;
                    rows.push(st.make_row(0, epoch, f64::NAN, &start));
                    emitted_final = true;
                    break;
                }
            }
            let done = epoch + 1;
            if done % 100 == 0 || done == total {
                let row = st.make_row(0, done, last_loss, &start);
                let bad = !row.boundary_l2_error.is_finite() || row.boundary_l2_error > blowup;
                rows.push(row);
                emitted_final = done == total;
                if bad {
                    diverged = true;
                    break;
                }
            }
        }
        if total == 0 || (!diverged && !emitted_final) {
            let loss = if total == 0 { st.loss_snapshot()? } else { last_loss };
            rows.push(st.make_row(0, total, loss, &start));
        }
    }

    Ok(RunResult {
        history: RunHistory { rows, diverged },
        params: st.params,
    })
}

/// Run `n_sgd` epochs of the inner minimization only (no multiplier
/// update); returns the per-epoch losses. The multiplier is read, never
/// written.
pub fn inner_train(
    params: &mut MlpParams,
    lambda: Option<&Multiplier>,
    cfg: &RunConfig,
    problem: &Problem,
) -> Result<Vec<f64>, UzawaError> {
    let mut st = TrainState {
        cfg,
        problem,
        params: params.clone(),
        adam: AdamState::new(params.param_count()),
        tape: Tape::new(),
        interior: PointSet::empty(problem.domain, PointKind::Interior),
        boundary_pen: PointSet::empty(problem.domain, PointKind::Boundary),
        empty_boundary: PointSet::empty(problem.domain, PointKind::Boundary),
        lambda: lambda.cloned(),
        plan: ResamplePlan::new(cfg.resample_every, cfg.batch_interior, cfg.batch_boundary)?,
        lambda_g: Vec::new(),
    };
    st.redraw(0)?;
    let mut losses = Vec::with_capacity(cfg.n_sgd as usize);
    for m in 0..cfg.n_sgd {
        match st.epoch(m)? {
            EpochOutcome::Loss(l) => losses.push(l),
            EpochOutcome::Diverged => break,
        }
    }
    *params = st.params;
    Ok(losses)
}
