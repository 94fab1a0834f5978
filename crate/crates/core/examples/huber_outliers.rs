//! Huber regression on data with 10% gross outliers, compared with least
//! squares on the same minibatch sequence.
//!
//! cargo run --release --example huber_outliers

use proxdist::datagen::{gen_dataset_detailed, gen_theta_true, GenSpec, Truth};
use proxdist::solver::run_spd;
use proxdist::{ConstraintSet, Family, Model, PenaltySchedule, SolverConfig};

fn main() -> proxdist::Result<()> {
    let huber = Family::Huber { delta: 2.0 };
    let spec = GenSpec::new(huber, 2000, 50, Truth::Sparse { s: 5 }).seed(4);
    let truth = gen_theta_true(&spec)?;
    let generated = gen_dataset_detailed(&spec, &truth)?;
    println!("{} of {} responses carry outlier noise", generated.outliers.len(), generated.data.n());

    let c = ConstraintSet::sparsity(50, 5)?;
    let config = SolverConfig::penalty(PenaltySchedule::new(0.1, 1.0)?, 10)
        .max_iter(3000)
        .tol(1e-10)
        .seed(4);
    for family in [huber, Family::Linear] {
        let model = Model::new(family, &generated.data)?;
        let (theta, trace) = run_spd(&model, &c, &config)?;
        println!(
            "{:<7} ||theta_hat - theta_true||^2 = {:.4}  ({} iterations, {} short line searches)",
            family.name(),
            (&theta - &truth).norm_squared(),
            trace.iterations,
            trace.inner_failures
        );
    }
    Ok(())
}
