//! Sparse logistic regression: Newton prox steps, hard-thresholding
//! projection and support recovery.
//!
//! cargo run --release --example sparse_logistic

use proxdist::datagen::{gen_dataset, gen_theta_true, GenSpec, Truth};
use proxdist::solver::{run_psgd, run_spd, Reference, ReferenceSource};
use proxdist::{ConstraintSet, Family, Model, PenaltySchedule, SolverConfig, StepSchedule};

fn main() -> proxdist::Result<()> {
    let (n, p, s) = (2000, 100, 5);
    let spec = GenSpec::new(Family::Logistic, n, p, Truth::Sparse { s }).seed(3);
    let truth = gen_theta_true(&spec)?;
    let data = gen_dataset(&spec, &truth)?;
    let model = Model::new(Family::Logistic, &data)?;
    let c = ConstraintSet::sparsity(p, s)?;
    let reference = Reference::new(&model, truth.clone(), ReferenceSource::Truth)?;

    let spd = SolverConfig::penalty(PenaltySchedule::new(1e-3, 1.0)?, 40)
        .max_iter(2000)
        .tol(1e-10)
        .seed(3)
        .reference(reference.clone())
        .truth(truth.clone());
    let (theta, trace) = run_spd(&model, &c, &spd)?;
    println!(
        "spd:  error {:.3}  true discovery rate {:.2}  ({} iterations)",
        trace.final_param_err().unwrap(),
        trace.tdr.unwrap(),
        trace.iterations
    );
    let support: Vec<usize> = (0..p).filter(|&j| theta[j] != 0.0).collect();
    let true_support: Vec<usize> = (0..p).filter(|&j| truth[j] != 0.0).collect();
    println!("      support {support:?}, truth {true_support:?}");

    for alpha1 in [10.0, 100.0, 1000.0] {
        let psgd = SolverConfig::step(StepSchedule::harmonic(alpha1)?, 40)
            .max_iter(2000)
            .tol(1e-10)
            .seed(3)
            .reference(reference.clone())
            .truth(truth.clone());
        let (_, trace) = run_psgd(&model, &c, &psgd)?;
        println!(
            "psgd alpha_1 = {alpha1:>6}: error {:.3}  true discovery rate {:.2}",
            trace.final_param_err().unwrap(),
            trace.tdr.unwrap()
        );
    }
    Ok(())
}
