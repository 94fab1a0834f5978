//! Replicated experiments on synthetic data.
//!
//! A [`Setting`] fixes the model family, the true-parameter structure (which
//! also picks the constraint set) and the problem size. [`run_sweep`] runs
//! one method over a grid of schedules with `R` replicates per grid cell and
//! averages the replicate traces pointwise; [`compare_table`] tunes the
//! initial rate of SPD and projected SGD on identical data and reports the
//! best of each; [`fit_rate`] estimates the slope of `log error` against
//! `log k`.
//!
//! Replicate `r` always uses data drawn from `(seed, r)`. Its subsampling
//! stream is also `r` when `shared_seed` is set, so every grid cell (and both
//! methods in a comparison) sees the same minibatch sequence. Work is spread
//! over `jobs` threads, and results are collected in grid order, so output
//! never depends on scheduling.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::constraints::{ConstraintSet, Shape};
use crate::datagen::{self, GenSpec, Truth};
use crate::error::{invalid, Error, Result};
use crate::models::{Dataset, Family, Model};
use crate::prox::InnerControls;
use crate::solver::{
    self, IterateTrace, Method, PenaltySchedule, Reference, ReferenceSettings, ReferenceSource,
    SolverConfig, StepSchedule, TraceCadence,
};

/// Model family, truth structure and problem size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub family: Family,
    pub truth: Truth,
    pub n: usize,
    /// Covariate dimension, or matrix rows.
    pub p: usize,
    /// Matrix columns; 1 for vector models.
    pub q: usize,
}

impl Setting {
    pub fn vector(family: Family, truth: Truth, n: usize, p: usize) -> Self {
        Self { family, truth, n, p, q: 1 }
    }

    pub fn matrix(truth: Truth, n: usize, rows: usize, cols: usize) -> Self {
        Self { family: Family::Matrix, truth, n, p: rows, q: cols }
    }

    pub fn gen_spec(&self, seed: u64, replicate: u64) -> GenSpec {
        let spec = match self.family {
            Family::Matrix => GenSpec::matrix(self.n, self.p, self.q, self.truth),
            family => GenSpec::new(family, self.n, self.p, self.truth),
        };
        spec.seed(seed).replicate(replicate)
    }

    pub fn shape(&self) -> Shape {
        self.gen_spec(0, 0).shape()
    }

    /// The constraint matching the truth: unit ball, `s`-sparse or rank `r`.
    pub fn constraint(&self) -> Result<ConstraintSet> {
        match self.truth {
            Truth::UnitBall => Ok(ConstraintSet::unit_ball(self.shape())),
            Truth::Sparse { s } => ConstraintSet::sparsity(self.p * self.q, s),
            Truth::LowRank { r } => ConstraintSet::rank(self.p, self.q, r),
        }
    }

    pub fn constraint_label(&self) -> String {
        match self.truth {
            Truth::UnitBall => "ball".to_string(),
            Truth::Sparse { s } => format!("sparsity={s}"),
            Truth::LowRank { r } => format!("rank={r}"),
        }
    }

    /// 5% of the sample size, at least 1.
    pub fn default_batch(&self) -> usize {
        (self.n / 20).max(1)
    }

    /// Batch size for method comparisons: 2% of the sample for logistic
    /// models and 0.5% otherwise, at least 1.
    pub fn comparison_batch(&self) -> usize {
        let b = match self.family {
            Family::Logistic => self.n / 50,
            _ => self.n / 200,
        };
        b.max(1)
    }
}

/// How `theta*` is chosen for each replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    /// Projected gradient for convex constraints, the truth otherwise.
    Auto,
    /// Full-batch proximal distance run.
    BatchPd(ReferenceSettings),
    /// Full-batch projected gradient descent.
    ProjectedGradient { max_iter: usize, tol: f64 },
    /// The data-generating parameter.
    Truth,
}

/// One replicate's data, truth and reference solution.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: u64,
    pub data: Dataset,
    pub truth: DVector<f64>,
    pub reference: Reference,
}

const PG_MAX_ITER: usize = 200_000;
const PG_TOL: f64 = 1e-13;

/// Draw replicate `index` of `setting` and compute its reference solution.
pub fn prepare_replicate(setting: &Setting, seed: u64, index: u64, kind: ReferenceKind) -> Result<Replicate> {
    let spec = setting.gen_spec(seed, index);
    let truth = datagen::gen_theta_true(&spec)?;
    let data = datagen::gen_dataset(&spec, &truth)?;
    let c = setting.constraint()?;
    let model = Model::new(setting.family, &data)?;
    let kind = match kind {
        ReferenceKind::Auto if c.is_convex() => {
            ReferenceKind::ProjectedGradient { max_iter: PG_MAX_ITER, tol: PG_TOL }
        }
        ReferenceKind::Auto => ReferenceKind::Truth,
        other => other,
    };
    let reference = match kind {
        ReferenceKind::BatchPd(settings) => solver::batch_reference(&model, &c, settings)?,
        ReferenceKind::ProjectedGradient { max_iter, tol } => {
            solver::projected_gradient_reference(&model, &c, max_iter, tol)?
        }
        _ => Reference::new(&model, truth.clone(), ReferenceSource::Truth)?,
    };
    Ok(Replicate { index, data, truth, reference })
}

/// Prepare replicates `0..count` in parallel.
pub fn prepare_replicates(setting: &Setting, seed: u64, count: usize, kind: ReferenceKind, jobs: usize) -> Result<Vec<Replicate>> {
    with_pool(jobs, || {
        (0..count as u64)
            .into_par_iter()
            .map(|r| prepare_replicate(setting, seed, r, kind))
            .collect::<Result<Vec<_>>>()
    })?
}

fn with_pool<T: Send>(jobs: usize, work: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(work))
}

/// Grid of schedules for one method, run on replicated synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub setting: Setting,
    pub method: Method,
    /// Penalty growth exponents, or step decay exponents for projected SGD.
    pub gammas: Vec<f64>,
    /// Initial penalties (proximal distance methods).
    pub rho1s: Vec<f64>,
    /// Initial step sizes (projected SGD).
    pub alpha1s: Vec<f64>,
    pub replicates: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub batch_size: usize,
    pub shared_seed: bool,
    pub seed: u64,
    pub cadence: TraceCadence,
    pub check_every: usize,
    pub inner: InnerControls,
    pub reference: ReferenceKind,
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(setting: Setting, method: Method) -> Self {
        Self {
            setting,
            method,
            gammas: vec![1.0],
            rho1s: vec![0.1],
            alpha1s: vec![0.1],
            replicates: 10,
            max_iter: 1000,
            tol: 1e-8,
            batch_size: setting.default_batch(),
            shared_seed: true,
            seed: 0,
            cadence: TraceCadence::LogGrid { per_decade: 10 },
            check_every: 1,
            inner: InnerControls::default(),
            reference: ReferenceKind::Auto,
            jobs: 1,
        }
    }

    fn rates(&self) -> &[f64] {
        match self.method {
            Method::Psgd => &self.alpha1s,
            _ => &self.rho1s,
        }
    }

    /// Grid cells in output order: gamma-major, then initial rate.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &gamma in &self.gammas {
            for &rate in self.rates() {
                cells.push(Cell { method: self.method, gamma, rate });
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.rates().is_empty() {
            return Err(invalid("sweep grids must be non-empty"));
        }
        if self.replicates == 0 {
            return Err(invalid("at least one replicate is required"));
        }
        for cell in self.cells() {
            cell.schedule()?;
        }
        Ok(())
    }

    fn config(&self, cell: &Cell, cell_index: usize, replicate: &Replicate) -> Result<SolverConfig> {
        let stream = if self.shared_seed {
            replicate.index
        } else {
            replicate.index + (self.replicates * cell_index) as u64
        };
        let mut config = SolverConfig::new(cell.schedule()?, self.batch_size)
            .max_iter(self.max_iter)
            .tol(self.tol)
            .seed(self.seed)
            .stream(stream)
            .cadence(self.cadence)
            .inner(self.inner)
            .reference(replicate.reference.clone());
        config.check_every = self.check_every;
        if matches!(self.setting.truth, Truth::Sparse { .. }) {
            config = config.truth(replicate.truth.clone());
        }
        Ok(config)
    }
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub gamma: f64,
    /// `rho_1`, or `alpha_1` for projected SGD.
    pub rate: f64,
}

impl Cell {
    pub fn schedule(&self) -> Result<solver::Schedule> {
        Ok(match self.method {
            Method::Psgd => solver::Schedule::Step(StepSchedule::new(self.rate, self.gamma)?),
            _ => solver::Schedule::Penalty(PenaltySchedule::new(self.rate, self.gamma)?),
        })
    }
}

/// Replicate mean and standard error at one logged iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub rate: f64,
    pub mean_param_err: f64,
    pub se_param_err: f64,
    pub mean_obj_err: f64,
    pub se_obj_err: f64,
    /// Replicates contributing to this row.
    pub count: usize,
}

pub const AGGREGATE_HEADER: &str = "k,rate,mean_param_err,se_param_err,mean_obj_err,se_obj_err,count";

/// Results of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub rows: Vec<AggregateRow>,
    pub traces: Vec<IterateTrace>,
    /// Mean terminal `||theta_hat - theta*||^2` over non-diverged replicates.
    pub mean_err: f64,
    pub se_err: f64,
    pub tdr: Option<f64>,
    pub diverged_frac: f64,
}

impl CellResult {
    /// Tuning score: mean terminal error, infinite if any replicate diverged.
    pub fn score(&self) -> f64 {
        if self.diverged_frac > 0.0 {
            f64::INFINITY
        } else {
            self.mean_err
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{AGGREGATE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k, r.rate, r.mean_param_err, r.se_param_err, r.mean_obj_err, r.se_obj_err, r.count
            )?;
        }
        Ok(())
    }

    pub fn summary(&self, setting: &Setting) -> SummaryRow {
        SummaryRow {
            family: setting.family.name().to_string(),
            constraint: setting.constraint_label(),
            method: self.cell.method,
            gamma: self.cell.gamma,
            rate: self.cell.rate,
            mean_err: self.mean_err,
            se_err: self.se_err,
            tdr: self.tdr,
            diverged_frac: self.diverged_frac,
        }
    }
}

/// Mean and standard error of the mean; zero error for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Pointwise aggregate of replicate traces.
///
/// Diverged traces are left out. A trace that stopped early holds its last
/// logged value at later iterations, since its output no longer changes.
/// Rows start at the first iteration logged by every trace.
pub fn aggregate(traces: &[IterateTrace]) -> Vec<AggregateRow> {
    let live: Vec<&IterateTrace> = traces
        .iter()
        .filter(|t| !t.diverged && !t.rows.is_empty())
        .collect();
    if live.is_empty() {
        return Vec::new();
    }
    let start = live.iter().map(|t| t.rows[0].k).max().unwrap_or(1);
    let mut ks: Vec<usize> = live
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.k))
        .filter(|&k| k >= start)
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let mut cursor = vec![0usize; live.len()];
    ks.into_iter()
        .map(|k| {
            let mut param = Vec::with_capacity(live.len());
            let mut obj = Vec::with_capacity(live.len());
            let mut rate = f64::NAN;
            for (t, pos) in live.iter().zip(cursor.iter_mut()) {
                while *pos + 1 < t.rows.len() && t.rows[*pos + 1].k <= k {
                    *pos += 1;
                }
                let row = &t.rows[*pos];
                if row.k == k {
                    rate = row.rate;
                }
                param.push(row.param_err.unwrap_or(f64::NAN));
                obj.push(row.obj_err.unwrap_or(f64::NAN));
            }
            let (mean_param_err, se_param_err) = mean_se(&param);
            let (mean_obj_err, se_obj_err) = mean_se(&obj);
            AggregateRow {
                k,
                rate,
                mean_param_err,
                se_param_err,
                mean_obj_err,
                se_obj_err,
                count: live.len(),
            }
        })
        .collect()
}

fn cell_result(cell: Cell, traces: Vec<IterateTrace>) -> CellResult {
    let live: Vec<&IterateTrace> = traces.iter().filter(|t| !t.diverged).collect();
    let errs: Vec<f64> = live.iter().filter_map(|t| t.final_param_err()).collect();
    let (mean_err, se_err) = if errs.is_empty() {
        (f64::INFINITY, f64::NAN)
    } else {
        mean_se(&errs)
    };
    let tdrs: Vec<f64> = live.iter().filter_map(|t| t.tdr).collect();
    let tdr = (!tdrs.is_empty()).then(|| mean_se(&tdrs).0);
    let diverged_frac = (traces.len() - live.len()) as f64 / traces.len() as f64;
    CellResult { cell, rows: aggregate(&traces), traces, mean_err, se_err, tdr, diverged_frac }
}

fn run_method(method: Method, model: &Model, c: &ConstraintSet, config: &SolverConfig) -> Result<IterateTrace> {
    let (_, trace) = match method {
        Method::Spd => solver::run_spd(model, c, config)?,
        Method::BatchPd => solver::run_batch_pd(model, c, config)?,
        Method::Psgd => solver::run_psgd(model, c, config)?,
    };
    Ok(trace)
}

/// Run every grid cell of `spec`, generating fresh replicates.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let replicates = prepare_replicates(&spec.setting, spec.seed, spec.replicates, spec.reference, spec.jobs)?;
    run_sweep_on(spec, &replicates)
}

/// Run every grid cell of `spec` on prepared replicates.
pub fn run_sweep_on(spec: &SweepSpec, replicates: &[Replicate]) -> Result<Vec<CellResult>> {
    spec.validate()?;
    if replicates.len() != spec.replicates {
        return Err(invalid(format!(
            "sweep expects {} replicates, got {}",
            spec.replicates,
            replicates.len()
        )));
    }
    let c = spec.setting.constraint()?;
    let cells = spec.cells();
    let tasks: Vec<(usize, &Replicate)> = (0..cells.len())
        .flat_map(|i| replicates.iter().map(move |r| (i, r)))
        .collect();
    let traces: Vec<IterateTrace> = with_pool(spec.jobs, || {
        tasks
            .par_iter()
            .map(|&(i, rep)| {
                let model = Model::new(spec.setting.family, &rep.data)?;
                let config = spec.config(&cells[i], i, rep)?;
                run_method(spec.method, &model, &c, &config)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut traces = traces.into_iter();
    Ok(cells
        .into_iter()
        .map(|cell| cell_result(cell, traces.by_ref().take(replicates.len()).collect()))
        .collect())
}

/// Least-squares fit of `log error = intercept + slope log k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive iteration window used for the fit.
    pub window: (f64, f64),
    pub points: usize,
}

/// Fit a power law to `(k, error)` pairs inside `window`; the default window
/// is `[sqrt(K), K]` for the largest logged `K`, the last half of the log
/// range. Errors inside the window must be positive.
pub fn fit_rate(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<RateFit> {
    let k_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !k_max.is_finite() {
        return Err(invalid("no points to fit"));
    }
    let window = window.unwrap_or((k_max.sqrt(), k_max));
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(k, _)| *k >= window.0 && *k <= window.1)
        .collect();
    if let Some((k, e)) = inside.iter().find(|(k, e)| !(*e > 0.0) || !(*k > 0.0)) {
        return Err(invalid(format!(
            "cannot fit a rate through error {e} at k = {k}; shrink the window"
        )));
    }
    let logs: Vec<(f64, f64)> = inside.iter().map(|(k, e)| (k.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || !(sxx > 0.0) {
        return Err(invalid("rate fit needs at least two distinct iterations in the window"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit { slope, intercept, r2, window, points: logs.len() })
}

/// Which error column of an aggregate to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Param,
    Objective,
}

/// [`fit_rate`] on the mean error column of an aggregated trace.
pub fn fit_aggregate(rows: &[AggregateRow], kind: ErrorKind, window: Option<(f64, f64)>) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let e = match kind {
                ErrorKind::Param => r.mean_param_err,
                ErrorKind::Objective => r.mean_obj_err,
            };
            (r.k as f64, e)
        })
        .collect();
    fit_rate(&points, window)
}

/// One line of a summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub family: String,
    pub constraint: String,
    pub method: Method,
    pub gamma: f64,
    /// `rho_1`, or `alpha_1` for projected SGD.
    pub rate: f64,
    pub mean_err: f64,
    pub se_err: f64,
    pub tdr: Option<f64>,
    pub diverged_frac: f64,
}

pub const SUMMARY_HEADER: &str = "family,constraint,method,gamma,rho1,mean_err,se_err,tdr,diverged_frac";

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.family,
            r.constraint,
            r.method.name(),
            r.gamma,
            r.rate,
            r.mean_err,
            r.se_err,
            r.tdr.map(|t| t.to_string()).unwrap_or_default(),
            r.diverged_frac
        )?;
    }
    Ok(())
}

/// Write `cell-NNN.csv` per grid cell plus `summary.csv` into `dir`.
pub fn write_sweep(dir: &Path, setting: &Setting, results: &[CellResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, cell) in results.iter().enumerate() {
        let file = fs::File::create(dir.join(format!("cell-{i:03}.csv")))?;
        cell.write_csv(std::io::BufWriter::new(file))?;
    }
    let rows: Vec<SummaryRow> = results.iter().map(|r| r.summary(setting)).collect();
    let file = fs::File::create(dir.join("summary.csv"))?;
    write_summary(&rows, std::io::BufWriter::new(file)).map_err(Error::from)
}

/// SPD against projected SGD on a list of settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareSpec {
    pub settings: Vec<Setting>,
    pub replicates: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Minibatch size; `None` means [`Setting::comparison_batch`].
    pub batch_size: Option<usize>,
    /// Shared schedule exponent: `rho_k = rho_1 k^gamma`, `alpha_k = alpha_1 k^-gamma`.
    pub gamma: f64,
    pub rho1s: Vec<f64>,
    pub alpha1s: Vec<f64>,
    pub seed: u64,
    pub check_every: usize,
    pub inner: InnerControls,
    pub reference: ReferenceKind,
    pub jobs: usize,
}

impl CompareSpec {
    pub fn new(settings: Vec<Setting>) -> Self {
        Self {
            settings,
            replicates: 10,
            max_iter: 2000,
            tol: 1e-10,
            batch_size: None,
            gamma: 1.0,
            rho1s: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0],
            // reciprocals of the penalty grid, since alpha_k plays the role of 1 / rho_k
            alpha1s: vec![1e-1, 1.0, 10.0, 100.0, 1000.0],
            seed: 0,
            check_every: 10,
            inner: InnerControls::default(),
            reference: ReferenceKind::Auto,
            jobs: 1,
        }
    }

    fn sweep(&self, setting: Setting, method: Method) -> SweepSpec {
        SweepSpec {
            gammas: vec![self.gamma],
            rho1s: self.rho1s.clone(),
            alpha1s: self.alpha1s.clone(),
            replicates: self.replicates,
            max_iter: self.max_iter,
            tol: self.tol,
            batch_size: self.batch_size.unwrap_or(setting.comparison_batch()),
            shared_seed: true,
            seed: self.seed,
            cadence: TraceCadence::Every(usize::MAX),
            check_every: self.check_every,
            inner: self.inner,
            reference: self.reference,
            jobs: self.jobs,
            ..SweepSpec::new(setting, method)
        }
    }
}

/// Tuned results for one setting: every grid cell of both methods, and the
/// best cell of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub setting: Setting,
    pub spd: Vec<CellResult>,
    pub psgd: Vec<CellResult>,
}

fn best(cells: &[CellResult]) -> &CellResult {
    // first minimum wins, so ties resolve to the earlier grid point
    cells
        .iter()
        .reduce(|a, b| if b.score() < a.score() { b } else { a })
        .expect("grids are non-empty")
}

impl Comparison {
    pub fn best_spd(&self) -> &CellResult {
        best(&self.spd)
    }

    pub fn best_psgd(&self) -> &CellResult {
        best(&self.psgd)
    }

    pub fn rows(&self) -> [SummaryRow; 2] {
        [self.best_spd().summary(&self.setting), self.best_psgd().summary(&self.setting)]
    }
}

/// Tune and compare both methods on every setting of `spec`.
pub fn compare(spec: &CompareSpec) -> Result<Vec<Comparison>> {
    if spec.settings.is_empty() {
        return Err(invalid("no settings to compare"));
    }
    spec.settings
        .iter()
        .map(|&setting| {
            let replicates =
                prepare_replicates(&setting, spec.seed, spec.replicates, spec.reference, spec.jobs)?;
            let spd = run_sweep_on(&spec.sweep(setting, Method::Spd), &replicates)?;
            let psgd = run_sweep_on(&spec.sweep(setting, Method::Psgd), &replicates)?;
            Ok(Comparison { setting, spd, psgd })
        })
        .collect()
}

/// Summary rows of [`compare`]: tuned SPD then tuned projected SGD per setting.
pub fn compare_table(spec: &CompareSpec) -> Result<Vec<SummaryRow>> {
    Ok(compare(spec)?.iter().flat_map(|c| c.rows()).collect())
}
