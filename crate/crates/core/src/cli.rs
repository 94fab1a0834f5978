//! Command-line front end.
//!
//! Every subcommand writes into `<out>/<subcommand>/<tag>/` (tag defaults to
//! `seed-<seed>`) together with a `manifest.txt` listing the resolved flags.
//! Identical arguments give byte-identical files.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 missing dataset
//! file, 4 malformed CSV.

use std::ffi::OsString;
use std::fmt::Debug;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::constraints::{ConstraintSet, Shape};
use crate::datagen::{self, GenSpec, Truth};
use crate::error::{Error, Result};
use crate::experiments::{self, CompareSpec, ReferenceKind, Setting, SweepSpec};
use crate::models::{Dataset, Family, Model};
use crate::prox::InnerControls;
use crate::solver::{self, Method, PenaltySchedule, Reference, ReferenceSource, Schedule, SolverConfig, StepSchedule, TraceCadence};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_DATA: i32 = 3;
pub const EXIT_MALFORMED_CSV: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "proxdist", version, about = "Stochastic proximal distance fits, sweeps and comparisons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write its trace and estimate.
    Fit(FitArgs),
    /// Run a method over a grid of schedules on replicated synthetic data.
    Sweep(SweepArgs),
    /// Tune SPD and projected SGD on identical synthetic replicates.
    Compare(CompareArgs),
    /// Write a synthetic dataset and its true parameter.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Linear,
    Logistic,
    Huber,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    Ball,
    Sparsity,
    Rank,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Spd,
    Batchpd,
    Psgd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spd => Method::Spd,
            MethodArg::Batchpd => Method::BatchPd,
            MethodArg::Psgd => Method::Psgd,
        }
    }
}

/// Model, constraint and synthetic-data size.
#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "ball")]
    pub constraint: ConstraintArg,
    /// Sparsity level for `--constraint sparsity`.
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    /// Rank for `--constraint rank`.
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Covariate dimension, or matrix rows.
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    /// Matrix columns (matrix family).
    #[arg(long, default_value_t = 16)]
    pub q: usize,
    /// Huber threshold.
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ProblemArgs {
    fn family(&self) -> Family {
        match self.family {
            FamilyArg::Linear => Family::Linear,
            FamilyArg::Logistic => Family::Logistic,
            FamilyArg::Huber => Family::Huber { delta: self.delta },
            FamilyArg::Matrix => Family::Matrix,
        }
    }

    fn shape(&self) -> Shape {
        match self.family {
            FamilyArg::Matrix => Shape::Matrix { rows: self.p, cols: self.q },
            _ => Shape::Vector(self.p),
        }
    }

    /// Structure of the synthetic truth; dense for ball and unconstrained fits.
    fn truth(&self) -> Truth {
        match self.constraint {
            ConstraintArg::Ball | ConstraintArg::None => Truth::UnitBall,
            ConstraintArg::Sparsity => Truth::Sparse { s: self.s },
            ConstraintArg::Rank => Truth::LowRank { r: self.r },
        }
    }

    fn constraint(&self) -> Result<ConstraintSet> {
        let shape = self.shape();
        match (self.constraint, shape) {
            (ConstraintArg::Ball, _) => Ok(ConstraintSet::unit_ball(shape)),
            (ConstraintArg::None, _) => Ok(ConstraintSet::unconstrained(shape)),
            (ConstraintArg::Sparsity, _) => ConstraintSet::sparsity(shape.len(), self.s),
            (ConstraintArg::Rank, Shape::Matrix { rows, cols }) => ConstraintSet::rank(rows, cols, self.r),
            (ConstraintArg::Rank, Shape::Vector(_)) => {
                Err(Error::InvalidInput("the rank constraint needs --family matrix".into()))
            }
        }
    }

    fn gen_spec(&self) -> GenSpec {
        let spec = match self.family {
            FamilyArg::Matrix => GenSpec::matrix(self.n, self.p, self.q, self.truth()),
            _ => GenSpec::new(self.family(), self.n, self.p, self.truth()),
        };
        spec.seed(self.seed)
    }

    fn setting(&self) -> Result<Setting> {
        if self.constraint == ConstraintArg::None {
            return Err(Error::InvalidInput(
                "sweeps and comparisons need --constraint ball, sparsity or rank".into(),
            ));
        }
        self.constraint()?;
        Ok(match self.family {
            FamilyArg::Matrix => Setting::matrix(self.truth(), self.n, self.p, self.q),
            _ => Setting::vector(self.family(), self.truth(), self.n, self.p),
        })
    }
}

/// Inner prox solver and stop-rule controls.
#[derive(Debug, Args)]
pub struct InnerArgs {
    /// Maximum inner Newton or gradient iterations per prox call.
    #[arg(long, default_value_t = 500)]
    pub inner_iters: usize,
    /// Inner stopping tolerance on the surrogate gradient norm.
    #[arg(long, default_value_t = 1e-8)]
    pub inner_tol: f64,
    /// Initial inner step (fixed step when backtracking is off).
    #[arg(long, default_value_t = 1.0)]
    pub inner_step: f64,
    /// Armijo step shrink factor.
    #[arg(long, default_value_t = 0.5)]
    pub armijo_shrink: f64,
    /// Armijo sufficient-decrease slope.
    #[arg(long, default_value_t = 1e-4)]
    pub armijo_slope: f64,
    /// Use the fixed inner step without backtracking.
    #[arg(long)]
    pub no_backtracking: bool,
    /// Evaluate the full-objective stop rule every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub check_every: usize,
}

impl InnerArgs {
    fn controls(&self) -> InnerControls {
        InnerControls {
            max_iter: self.inner_iters,
            tol: self.inner_tol,
            step: self.inner_step,
            shrink: self.armijo_shrink,
            slope: self.armijo_slope,
            backtracking: !self.no_backtracking,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output root; files go to `<out>/<subcommand>/<tag>/`.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run tag; defaults to `seed-<seed>`.
    #[arg(long)]
    pub tag: Option<String>,
}

impl OutputArgs {
    fn dir(&self, subcommand: &str, seed: u64) -> PathBuf {
        let tag = self.tag.clone().unwrap_or_else(|| format!("seed-{seed}"));
        self.out.join(subcommand).join(tag)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "spd")]
    pub method: MethodArg,
    /// Initial penalty rho_1.
    #[arg(long, default_value_t = 0.1)]
    pub rho1: f64,
    /// Penalty growth rho_k = rho_1 k^gamma; for psgd the step decay alpha_k = alpha_1 k^-gamma.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Initial step size alpha_1 (psgd).
    #[arg(long, default_value_t = 0.1)]
    pub alpha1: f64,
    /// Minibatch size; defaults to 5% of the sample size.
    #[arg(long)]
    pub b: Option<usize>,
    /// Iteration cap.
    #[arg(long, default_value_t = 1000)]
    pub kmax: usize,
    /// Stop when successive full objectives differ by less than this.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// CSV dataset (response in the last column) instead of synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Log every this many iterations instead of 10 points per decade.
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Record wall-clock time in the trace (output is then not reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub inner: InnerArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "spd")]
    pub method: MethodArg,
    /// Comma-separated initial penalties.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub rho1: Vec<f64>,
    /// Comma-separated penalty growth (or psgd step decay) exponents.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub gamma: Vec<f64>,
    /// Comma-separated initial step sizes (psgd).
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub alpha1: Vec<f64>,
    /// Minibatch size; defaults to 5% of the sample size.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub kmax: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Replicates per grid cell.
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Give every grid cell its own subsampling stream.
    #[arg(long)]
    pub no_shared_seed: bool,
    /// Log every this many iterations instead of 10 points per decade.
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub inner: InnerArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated SPD tuning grid for rho_1.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1,10")]
    pub rho1: Vec<f64>,
    /// Comma-separated projected SGD tuning grid for alpha_1.
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100,1000")]
    pub alpha1: Vec<f64>,
    /// Shared schedule exponent: rho_k = rho_1 k^gamma, alpha_k = alpha_1 k^-gamma.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Minibatch size; defaults to 2% of n for logistic and 0.5% otherwise.
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub kmax: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Maximum inner iterations per prox call.
    #[arg(long, default_value_t = 500)]
    pub inner_iters: usize,
    /// Evaluate the stop rule every this many iterations.
    #[arg(long, default_value_t = 10)]
    pub check_every: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Replicate index under the seed.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code. Diagnostics go to stderr as a single line.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_DATA,
        Error::MalformedCsv { .. } => EXIT_MALFORMED_CSV,
        _ => EXIT_FAILURE,
    }
}

/// Run a parsed command; returns the output directory.
pub fn run(command: &Command) -> Result<PathBuf> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::Gen(a) => gen(a),
    }
}

fn prepare_dir(output: &OutputArgs, subcommand: &str, seed: u64, args: &impl Debug) -> Result<PathBuf> {
    let dir = output.dir(subcommand, seed);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("manifest.txt"), format!("proxdist {subcommand}\n{args:#?}\n"))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = create(path)?;
    for x in v.iter() {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

fn cadence(log_every: Option<usize>) -> TraceCadence {
    match log_every {
        Some(m) => TraceCadence::Every(m.max(1)),
        None => TraceCadence::LogGrid { per_decade: 10 },
    }
}

fn default_batch(n: usize) -> usize {
    (n / 20).max(1)
}

fn fit(a: &FitArgs) -> Result<PathBuf> {
    let p = &a.problem;
    let c = p.constraint()?;
    let (data, truth) = match &a.data {
        Some(path) => {
            let shape = matches!(p.family, FamilyArg::Matrix).then(|| p.shape());
            let data = Dataset::from_csv_path(path, shape).map_err(|e| match e {
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("dataset file {} not found", path.display()),
                )),
                other => other,
            })?;
            (data, None)
        }
        None => {
            let spec = p.gen_spec();
            let truth = datagen::gen_theta_true(&spec)?;
            (datagen::gen_dataset(&spec, &truth)?, Some(truth))
        }
    };
    let model = Model::new(p.family(), &data)?;
    let reference = if c.is_convex() {
        Some(solver::projected_gradient_reference(&model, &c, 200_000, 1e-13)?)
    } else {
        truth
            .clone()
            .map(|t| Reference::new(&model, t, ReferenceSource::Truth))
            .transpose()?
    };

    let method = Method::from(a.method);
    let schedule = match method {
        Method::Psgd => Schedule::Step(StepSchedule::new(a.alpha1, a.gamma)?),
        _ => Schedule::Penalty(PenaltySchedule::new(a.rho1, a.gamma)?),
    };
    let mut config = SolverConfig::new(schedule, a.b.unwrap_or(default_batch(data.n())))
        .max_iter(a.kmax)
        .tol(a.eps)
        .seed(p.seed)
        .cadence(cadence(a.log_every))
        .inner(a.inner.controls());
    config.check_every = a.inner.check_every;
    config.record_time = a.timing;
    if let Some(r) = reference {
        config = config.reference(r);
    }
    if let (ConstraintArg::Sparsity, Some(t)) = (p.constraint, &truth) {
        config = config.truth(t.clone());
    }
    let (theta, trace) = match method {
        Method::Spd => solver::run_spd(&model, &c, &config)?,
        Method::BatchPd => solver::run_batch_pd(&model, &c, &config)?,
        Method::Psgd => solver::run_psgd(&model, &c, &config)?,
    };

    let dir = prepare_dir(&a.output, "fit", p.seed, a)?;
    let mut out = create(&dir.join("trace.csv"))?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    write_vector(&dir.join("theta.csv"), &theta)?;
    Ok(dir)
}

fn sweep(a: &SweepArgs) -> Result<PathBuf> {
    let setting = a.problem.setting()?;
    let spec = SweepSpec {
        gammas: a.gamma.clone(),
        rho1s: a.rho1.clone(),
        alpha1s: a.alpha1.clone(),
        replicates: a.replicates,
        max_iter: a.kmax,
        tol: a.eps,
        batch_size: a.b.unwrap_or(setting.default_batch()),
        shared_seed: !a.no_shared_seed,
        seed: a.problem.seed,
        cadence: cadence(a.log_every),
        check_every: a.inner.check_every,
        inner: a.inner.controls(),
        reference: ReferenceKind::Auto,
        jobs: a.jobs,
        ..SweepSpec::new(setting, a.method.into())
    };
    let results = experiments::run_sweep(&spec)?;
    let dir = prepare_dir(&a.output, "sweep", a.problem.seed, a)?;
    experiments::write_sweep(&dir, &setting, &results)?;
    Ok(dir)
}

fn compare(a: &CompareArgs) -> Result<PathBuf> {
    let setting = a.problem.setting()?;
    let spec = CompareSpec {
        replicates: a.replicates,
        max_iter: a.kmax,
        tol: a.eps,
        batch_size: a.b,
        gamma: a.gamma,
        rho1s: a.rho1.clone(),
        alpha1s: a.alpha1.clone(),
        seed: a.problem.seed,
        check_every: a.check_every,
        inner: InnerControls { max_iter: a.inner_iters, ..InnerControls::default() },
        jobs: a.jobs,
        ..CompareSpec::new(vec![setting])
    };
    let comparisons = experiments::compare(&spec)?;
    let dir = prepare_dir(&a.output, "compare", a.problem.seed, a)?;
    let tuned: Vec<_> = comparisons.iter().flat_map(|c| c.rows()).collect();
    experiments::write_summary(&tuned, create(&dir.join("summary.csv"))?)?;
    let grid: Vec<_> = comparisons
        .iter()
        .flat_map(|c| c.spd.iter().chain(&c.psgd).map(|cell| cell.summary(&c.setting)))
        .collect();
    experiments::write_summary(&grid, create(&dir.join("grid.csv"))?)?;
    Ok(dir)
}

fn gen(a: &GenArgs) -> Result<PathBuf> {
    let p = &a.problem;
    let spec = p.gen_spec().replicate(a.replicate);
    let truth = datagen::gen_theta_true(&spec)?;
    let generated = datagen::gen_dataset_detailed(&spec, &truth)?;
    let dir = prepare_dir(&a.output, "gen", p.seed, a)?;
    let mut out = create(&dir.join("data.csv"))?;
    generated.data.write_csv(&mut out)?;
    out.flush()?;
    write_vector(&dir.join("theta_true.csv"), &truth)?;
    if !generated.outliers.is_empty() {
        let mut out = create(&dir.join("outliers.csv"))?;
        for i in &generated.outliers {
            writeln!(out, "{i}")?;
        }
        out.flush()?;
    }
    Ok(dir)
}
