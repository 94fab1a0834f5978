//! Round trip through the CSV schema and a fit on the loaded data.
//!
//! cargo run --example csv_dataset [path.csv]

use std::fs::File;
use std::io::BufWriter;

use proxdist::datagen::{gen_dataset, gen_theta_true, GenSpec, Truth};
use proxdist::solver::run_spd;
use proxdist::{ConstraintSet, Dataset, Family, Model, PenaltySchedule, SolverConfig};

fn main() -> proxdist::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(path) => path.into(),
        None => {
            let spec = GenSpec::new(Family::Linear, 500, 8, Truth::Sparse { s: 3 }).seed(9);
            let data = gen_dataset(&spec, &gen_theta_true(&spec)?)?;
            let path = std::env::temp_dir().join("proxdist-example.csv");
            data.write_csv(BufWriter::new(File::create(&path)?))?;
            path
        }
    };

    // header row optional, response in the last column
    let data = Dataset::from_csv_path(&path, None)?;
    println!("loaded {} rows with {} covariates from {}", data.n(), data.dim(), path.display());

    let model = Model::new(Family::Linear, &data)?;
    let c = ConstraintSet::sparsity(data.dim(), 3.min(data.dim()))?;
    let config = SolverConfig::penalty(PenaltySchedule::new(0.01, 1.0)?, (data.n() / 20).max(1))
        .max_iter(5000)
        .tol(1e-7);
    let (theta, trace) = run_spd(&model, &c, &config)?;
    println!("{} iterations, converged: {}", trace.iterations, trace.converged);
    println!("theta_hat = {:.4?}", theta.as_slice());
    Ok(())
}
