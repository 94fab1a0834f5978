//! Outer iteration drivers.
//!
//! * [`run_spd`]: stochastic proximal distance iterations,
//!   `theta_k = prox_{rho_k^{-1} g_k}[P_C(theta_{k-1})]` on a fresh minibatch;
//! * [`run_batch_pd`]: the same update on the full data (the MM iteration);
//! * [`run_psgd`]: projected SGD, `theta_k = P_C[theta_{k-1} - alpha_k grad g_k(theta_{k-1})]`.
//!
//! All three stop when `|F[P_C(theta_k)] - F[P_C(theta_{k-1})]| < tol` or at
//! the iteration cap, and return the projected final iterate. Errors against
//! a reference solution are always measured at projected iterates.

use std::io::Write;
use std::time::Instant;

use log::warn;
use nalgebra::DVector;

use crate::constraints::ConstraintSet;
use crate::error::{check_dim, invalid, Result};
use crate::models::{Batch, Family, Model};
use crate::prox::{self, InnerControls, ProxProblem};
use crate::rng::{self, Purpose};

/// Iterates whose norm exceeds this are declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e10;

/// `rho_k = rho_1 k^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    rho1: f64,
    gamma: f64,
}

impl PenaltySchedule {
    pub fn new(rho1: f64, gamma: f64) -> Result<Self> {
        if !(rho1 > 0.0 && rho1.is_finite()) {
            return Err(invalid(format!("initial penalty must be positive, got {rho1}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("penalty exponent must be positive, got {gamma}")));
        }
        if gamma <= 0.5 || gamma > 1.0 {
            warn!("penalty exponent {gamma} lies outside the guaranteed range (0.5, 1]");
        }
        Ok(Self { rho1, gamma })
    }

    /// Fixed penalty `rho_k = rho` for every `k`.
    pub fn constant(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("penalty must be positive, got {rho}")));
        }
        Ok(Self { rho1: rho, gamma: 0.0 })
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rho1 * (k as f64).powf(self.gamma)
    }
}

/// `alpha_k = alpha_1 / k^decay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    alpha1: f64,
    decay: f64,
}

impl StepSchedule {
    /// `alpha_1 = 0` is accepted and freezes the iterate.
    pub fn new(alpha1: f64, decay: f64) -> Result<Self> {
        if !(alpha1 >= 0.0 && alpha1.is_finite()) {
            return Err(invalid(format!("initial step must be nonnegative, got {alpha1}")));
        }
        if !(decay >= 0.0 && decay.is_finite()) {
            return Err(invalid(format!("step decay must be nonnegative, got {decay}")));
        }
        Ok(Self { alpha1, decay })
    }

    /// `alpha_k = alpha_1 / k`.
    pub fn harmonic(alpha1: f64) -> Result<Self> {
        Self::new(alpha1, 1.0)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha1 / (k as f64).powf(self.decay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Penalty(PenaltySchedule),
    Step(StepSchedule),
}

impl Schedule {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            Schedule::Penalty(p) => p.rho(k),
            Schedule::Step(s) => s.alpha(k),
        }
    }
}

/// Which iterations are written to the trace. The final iteration is
/// always logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceCadence {
    Every(usize),
    /// Roughly `per_decade` log-spaced iterations per factor of ten.
    LogGrid { per_decade: usize },
}

impl TraceCadence {
    pub fn logs(&self, k: usize) -> bool {
        match *self {
            TraceCadence::Every(m) => k % m.max(1) == 0,
            TraceCadence::LogGrid { per_decade } => {
                if k <= 1 {
                    return true;
                }
                let c = per_decade.max(1) as f64;
                (c * (k as f64).log10()).floor() > (c * ((k - 1) as f64).log10()).floor()
            }
        }
    }
}

/// Where a reference solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    /// Full-batch proximal distance run to a tight tolerance.
    BatchSolver,
    /// Full-batch projected gradient descent (convex sets only).
    ProjectedGradient,
    /// The data-generating parameter.
    Truth,
    /// Supplied by the caller.
    User,
}

impl ReferenceSource {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceSource::BatchSolver => "batch_solver",
            ReferenceSource::ProjectedGradient => "projected_gradient",
            ReferenceSource::Truth => "truth",
            ReferenceSource::User => "user",
        }
    }
}

/// Reference solution `theta*` used for error logging.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub theta: DVector<f64>,
    pub objective: f64,
    pub source: ReferenceSource,
}

impl Reference {
    pub fn new(model: &Model, theta: DVector<f64>, source: ReferenceSource) -> Result<Self> {
        let objective = model.objective(&theta)?;
        Ok(Self { theta, objective, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub schedule: Schedule,
    pub batch_size: usize,
    pub max_iter: usize,
    /// Stop-rule tolerance `epsilon`.
    pub tol: f64,
    pub seed: u64,
    /// Sampling stream index (replicate id) under `seed`.
    pub stream: u64,
    pub cadence: TraceCadence,
    /// Evaluate the stop rule every this many iterations.
    pub check_every: usize,
    pub theta0: Option<DVector<f64>>,
    pub reference: Option<Reference>,
    /// True parameter for the true-discovery rate of the output.
    pub truth: Option<DVector<f64>>,
    pub inner: InnerControls,
    /// Record wall-clock time in the trace; traces are only bit-reproducible
    /// when this is off.
    pub record_time: bool,
}

impl SolverConfig {
    pub fn new(schedule: Schedule, batch_size: usize) -> Self {
        Self {
            schedule,
            batch_size,
            max_iter: 1000,
            tol: 1e-8,
            seed: 0,
            stream: 0,
            cadence: TraceCadence::Every(1),
            check_every: 1,
            theta0: None,
            reference: None,
            truth: None,
            inner: InnerControls::default(),
            record_time: false,
        }
    }

    pub fn penalty(schedule: PenaltySchedule, batch_size: usize) -> Self {
        Self::new(Schedule::Penalty(schedule), batch_size)
    }

    pub fn step(schedule: StepSchedule, batch_size: usize) -> Self {
        Self::new(Schedule::Step(schedule), batch_size)
    }

    pub fn max_iter(mut self, k: usize) -> Self {
        self.max_iter = k;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn cadence(mut self, cadence: TraceCadence) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn theta0(mut self, theta0: DVector<f64>) -> Self {
        self.theta0 = Some(theta0);
        self
    }

    pub fn reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn truth(mut self, truth: DVector<f64>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn inner(mut self, inner: InnerControls) -> Self {
        self.inner = inner;
        self
    }

    fn validate(&self, model: &Model, c: &ConstraintSet) -> Result<()> {
        check_dim(c.dim(), model.dim())?;
        if !(self.tol > 0.0) {
            return Err(invalid("stop tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("iteration cap must be at least 1"));
        }
        let n = model.data().n();
        if self.batch_size == 0 || self.batch_size > n {
            return Err(invalid(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        if self.check_every == 0 {
            return Err(invalid("stop-rule cadence must be at least 1"));
        }
        if let Some(t) = &self.theta0 {
            check_dim(model.dim(), t.len())?;
        }
        if let Some(r) = &self.reference {
            check_dim(model.dim(), r.theta.len())?;
        }
        if let Some(t) = &self.truth {
            check_dim(model.dim(), t.len())?;
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Spd,
    BatchPd,
    Psgd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Spd => "spd",
            Method::BatchPd => "batchpd",
            Method::Psgd => "psgd",
        }
    }
}

/// One logged iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `rho_k`, or `alpha_k` for projected SGD.
    pub rate: f64,
    /// `||P_C(theta_k) - theta*||^2`.
    pub param_err: Option<f64>,
    /// `F[P_C(theta_k)] - F(theta*)`.
    pub obj_err: Option<f64>,
    /// `F(theta_k) + (rho_k / 2) dist(theta_k, C)^2` for proximal distance
    /// runs; not part of the CSV.
    pub penalized: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub method: Method,
    pub rows: Vec<TraceRow>,
    pub theta_hat: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Prox calls whose line search ran out of halvings.
    pub inner_failures: usize,
    pub tdr: Option<f64>,
    pub reference_source: Option<ReferenceSource>,
}

pub const TRACE_HEADER: &str = "k,rho,param_err,obj_err,wall_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl IterateTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.k,
                r.rate,
                opt(r.param_err),
                opt(r.obj_err),
                r.wall_ms
            )?;
        }
        writeln!(out, "#final,{},{},{}", self.iterations, self.converged, opt(self.tdr))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// Last logged parameter error.
    pub fn final_param_err(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.param_err)
    }

    pub fn final_obj_err(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.obj_err)
    }
}

/// `|supp(hat) ∩ supp(truth)| / |supp(truth)|`.
pub fn true_discovery_rate(theta_hat: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    check_dim(truth.len(), theta_hat.len())?;
    let support = truth.iter().filter(|v| **v != 0.0).count();
    if support == 0 {
        return Err(invalid("true parameter has empty support"));
    }
    let hits = truth
        .iter()
        .zip(theta_hat.iter())
        .filter(|(t, h)| **t != 0.0 && **h != 0.0)
        .count();
    Ok(hits as f64 / support as f64)
}

/// Penalized objective `F(theta) + (rho / 2) dist(theta, C)^2`.
pub fn penalized_objective(model: &Model, c: &ConstraintSet, theta: &DVector<f64>, rho: f64) -> Result<f64> {
    Ok(model.objective(theta)? + 0.5 * rho * c.distance_sq(theta)?)
}

struct Step {
    theta: DVector<f64>,
    inner_failed: bool,
}

fn drive<F>(model: &Model, c: &ConstraintSet, config: &SolverConfig, method: Method, mut step: F) -> Result<(DVector<f64>, IterateTrace)>
where
    F: FnMut(usize, f64, &DVector<f64>, &DVector<f64>) -> Result<Step>,
{
    config.validate(model, c)?;
    let start = Instant::now();
    let mut theta = config.theta0.clone().unwrap_or_else(|| DVector::zeros(model.dim()));
    let mut anchor = c.project_unchecked(&theta);
    let mut f_prev = model.objective_unchecked(&anchor);
    let reference = config.reference.as_ref();

    let mut rows = Vec::new();
    let mut converged = false;
    let mut diverged = false;
    let mut inner_failures = 0;
    let mut iterations = 0;
    for k in 1..=config.max_iter {
        let rate = config.schedule.value(k);
        let out = step(k, rate, &theta, &anchor)?;
        iterations = k;
        if out.inner_failed {
            inner_failures += 1;
        }
        if !out.theta.iter().all(|v| v.is_finite()) || out.theta.norm() > DIVERGENCE_NORM {
            diverged = true;
            break;
        }
        theta = out.theta;
        anchor = c.project_unchecked(&theta);

        let mut f_now = None;
        if k % config.check_every == 0 {
            let f = model.objective_unchecked(&anchor);
            converged = (f - f_prev).abs() < config.tol;
            f_prev = f;
            f_now = Some(f);
        }
        let last = converged || k == config.max_iter;
        if last || config.cadence.logs(k) {
            let (param_err, obj_err) = match reference {
                Some(r) => {
                    let f = f_now.unwrap_or_else(|| model.objective_unchecked(&anchor));
                    (Some((&anchor - &r.theta).norm_squared()), Some(f - r.objective))
                }
                None => (None, None),
            };
            let wall_ms = if config.record_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let penalized = (method != Method::Psgd).then(|| {
                model.objective_unchecked(&theta) + 0.5 * rate * (&theta - &anchor).norm_squared()
            });
            rows.push(TraceRow { k, rate, param_err, obj_err, penalized, wall_ms });
        }
        if converged {
            break;
        }
    }

    let theta_hat = anchor;
    let tdr = config
        .truth
        .as_ref()
        .map(|t| true_discovery_rate(&theta_hat, t))
        .transpose()?;
    let trace = IterateTrace {
        method,
        rows,
        theta_hat: theta_hat.clone(),
        iterations,
        converged,
        diverged,
        inner_failures,
        tdr,
        reference_source: reference.map(|r| r.source),
    };
    Ok((theta_hat, trace))
}

fn penalty_schedule(config: &SolverConfig) -> Result<PenaltySchedule> {
    match config.schedule {
        Schedule::Penalty(p) => Ok(p),
        Schedule::Step(_) => Err(invalid("proximal distance runs need a penalty schedule")),
    }
}

/// Stochastic proximal distance algorithm.
pub fn run_spd(model: &Model, c: &ConstraintSet, config: &SolverConfig) -> Result<(DVector<f64>, IterateTrace)> {
    penalty_schedule(config)?;
    let mut rng = rng::stream(config.seed, Purpose::Sampling, config.stream);
    let n = model.data().n();
    drive(model, c, config, Method::Spd, |_, rho, prev, anchor| {
        let batch = Batch::sample(&mut rng, n, config.batch_size)?;
        prox_step(model, &batch, anchor, prev, rho, config.inner)
    })
}

/// Full-batch proximal distance iteration; `batch_size` is ignored.
pub fn run_batch_pd(model: &Model, c: &ConstraintSet, config: &SolverConfig) -> Result<(DVector<f64>, IterateTrace)> {
    penalty_schedule(config)?;
    let batch = Batch::full(model.data().n());
    let config = SolverConfig { batch_size: model.data().n(), ..config.clone() };
    drive(model, c, &config, Method::BatchPd, |_, rho, prev, anchor| {
        prox_step(model, &batch, anchor, prev, rho, config.inner)
    })
}

fn prox_step(model: &Model, batch: &Batch, anchor: &DVector<f64>, prev: &DVector<f64>, rho: f64, inner: InnerControls) -> Result<Step> {
    let problem = ProxProblem::new(*model, batch, anchor, rho)
        .with_start(prev)
        .with_controls(inner);
    let out = prox::solve(&problem)?;
    Ok(Step { theta: out.theta, inner_failed: out.line_search_failed })
}

/// Projected SGD with step schedule `alpha_k`.
pub fn run_psgd(model: &Model, c: &ConstraintSet, config: &SolverConfig) -> Result<(DVector<f64>, IterateTrace)> {
    if !matches!(config.schedule, Schedule::Step(_)) {
        return Err(invalid("projected SGD needs a step schedule"));
    }
    let mut rng = rng::stream(config.seed, Purpose::Sampling, config.stream);
    let n = model.data().n();
    drive(model, c, config, Method::Psgd, |_, alpha, prev, _| {
        let batch = Batch::sample(&mut rng, n, config.batch_size)?;
        let grad = model.gradient(prev, &batch)?;
        let theta = c.project_unchecked(&(prev - grad * alpha));
        Ok(Step { theta, inner_failed: false })
    })
}

/// Settings for [`batch_reference`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSettings {
    pub rho1: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self { rho1: 1.0, max_iter: 100_000, tol: 1e-12 }
    }
}

/// Reference solution from the full-batch iteration with `rho_k = rho_1 k`.
pub fn batch_reference(model: &Model, c: &ConstraintSet, settings: ReferenceSettings) -> Result<Reference> {
    let config = SolverConfig::penalty(PenaltySchedule::new(settings.rho1, 1.0)?, model.data().n())
        .max_iter(settings.max_iter)
        .tol(settings.tol)
        .cadence(TraceCadence::Every(usize::MAX));
    let (theta, _) = run_batch_pd(model, c, &config)?;
    Reference::new(model, theta, ReferenceSource::BatchSolver)
}


/// Constrained minimizer of `F` over a convex set by full-batch projected
/// gradient descent with step `1 / L`, stopping once an update moves the
/// iterate by less than `tol` in norm.
pub fn projected_gradient_reference(model: &Model, c: &ConstraintSet, max_iter: usize, tol: f64) -> Result<Reference> {
    check_dim(c.dim(), model.dim())?;
    if !c.is_convex() {
        return Err(invalid("projected gradient references need a convex constraint"));
    }
    let data = model.data();
    let top = data.gram().eigen.eigenvalues.max() / data.n() as f64;
    let curvature = match model.family() {
        Family::Logistic => 0.25,
        _ => 1.0,
    };
    let lipschitz = (top * curvature).max(f64::MIN_POSITIVE);
    let batch = Batch::full(data.n());
    let bd = model.batch_data(&batch);
    let mut theta = DVector::zeros(model.dim());
    for _ in 0..max_iter {
        let next = c.project_unchecked(&(&theta - model.gradient_on(&bd, &theta) / lipschitz));
        let moved = (&next - &theta).norm();
        theta = next;
        if moved < tol {
            break;
        }
    }
    Reference::new(model, theta, ReferenceSource::ProjectedGradient)
}
