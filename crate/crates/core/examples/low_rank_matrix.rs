//! Matrix regression under a rank constraint, where the implicit update
//! tolerates step sizes that make projected SGD blow up.
//!
//! cargo run --release --example low_rank_matrix

use nalgebra::DMatrix;
use proxdist::datagen::{gen_dataset, gen_theta_true, GenSpec, Truth};
use proxdist::solver::{run_psgd, run_spd, Reference, ReferenceSource};
use proxdist::{ConstraintSet, Model, Family, PenaltySchedule, SolverConfig, StepSchedule};

fn main() -> proxdist::Result<()> {
    let (rows, cols, r) = (16, 16, 5);
    let spec = GenSpec::matrix(2000, rows, cols, Truth::LowRank { r }).seed(5);
    let truth = gen_theta_true(&spec)?;
    let data = gen_dataset(&spec, &truth)?;
    let model = Model::new(Family::Matrix, &data)?;
    let c = ConstraintSet::rank(rows, cols, r)?;
    let reference = Reference::new(&model, truth.clone(), ReferenceSource::Truth)?;
    println!("||Theta_true||_F^2 = {}", truth.norm_squared());

    let spd = SolverConfig::penalty(PenaltySchedule::new(0.1, 1.0)?, 10)
        .max_iter(2000)
        .tol(1e-10)
        .seed(5)
        .reference(reference.clone());
    let (theta, trace) = run_spd(&model, &c, &spd)?;
    let svals = DMatrix::from_column_slice(rows, cols, theta.as_slice()).singular_values();
    println!("spd: error {:.4}, leading singular values {:.2?}", trace.final_param_err().unwrap(), &svals.as_slice()[..r + 1]);

    for alpha1 in [0.1, 0.5, 5.0] {
        let config = SolverConfig::step(StepSchedule::harmonic(alpha1)?, 10)
            .max_iter(2000)
            .tol(1e-10)
            .seed(5)
            .reference(reference.clone());
        let (_, trace) = run_psgd(&model, &c, &config)?;
        match trace.diverged {
            true => println!("psgd alpha_1 = {alpha1}: diverged at iteration {}", trace.iterations),
            false => println!("psgd alpha_1 = {alpha1}: error {:.4}", trace.final_param_err().unwrap()),
        }
    }
    Ok(())
}
