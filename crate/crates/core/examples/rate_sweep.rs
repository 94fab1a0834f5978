//! Shared-seed sweep over the penalty growth rate gamma, with fitted
//! convergence slopes of the averaged error traces.
//!
//! cargo run --release --example rate_sweep [output_dir]

use std::path::PathBuf;

use proxdist::datagen::Truth;
use proxdist::experiments::{fit_aggregate, run_sweep, write_sweep, ErrorKind, Setting, SweepSpec};
use proxdist::solver::Method;
use proxdist::Family;

fn main() -> proxdist::Result<()> {
    let setting = Setting::vector(Family::Linear, Truth::UnitBall, 1000, 50);
    let mut spec = SweepSpec::new(setting, Method::Spd);
    spec.gammas = vec![1.0 / 3.0, 2.0 / 3.0, 1.0, 4.0 / 3.0];
    spec.rho1s = vec![0.1];
    spec.replicates = 5;
    spec.max_iter = 3000;
    spec.tol = 1e-300;
    spec.check_every = 10;

    let results = run_sweep(&spec)?;
    println!("gamma   final F gap   final ||.||^2   slope (param)   R^2");
    for cell in &results {
        let last = cell.rows.last().expect("logged rows");
        let fit = fit_aggregate(&cell.rows, ErrorKind::Param, None)?;
        println!(
            "{:5.3}   {:.3e}     {:.3e}       {:+.3}          {:.3}",
            cell.cell.gamma, last.mean_obj_err, last.mean_param_err, fit.slope, fit.r2
        );
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        write_sweep(&dir, &setting, &results)?;
        println!("per-cell traces and summary.csv written to {}", dir.display());
    }
    Ok(())
}
