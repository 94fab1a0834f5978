//! Unit-ball constrained least squares: SPD against the full-batch iteration
//! and projected SGD, errors measured against the constrained minimizer.
//!
//! cargo run --release --example linear_unit_ball

use proxdist::datagen::{gen_dataset, gen_theta_true, GenSpec, Truth};
use proxdist::solver::{projected_gradient_reference, run_batch_pd, run_psgd, run_spd};
use proxdist::{ConstraintSet, Family, Model, PenaltySchedule, Shape, SolverConfig, StepSchedule};

fn main() -> proxdist::Result<()> {
    let spec = GenSpec::new(Family::Linear, 1000, 20, Truth::UnitBall).seed(1);
    let truth = gen_theta_true(&spec)?;
    let data = gen_dataset(&spec, &truth)?;
    let model = Model::new(Family::Linear, &data)?;
    let ball = ConstraintSet::unit_ball(Shape::Vector(20));

    // ||theta_true|| = 2, so the constrained solution sits on the sphere
    let reference = projected_gradient_reference(&model, &ball, 100_000, 1e-13)?;
    println!("||theta_true|| = {:.3}, ||theta*|| = {:.3}", truth.norm(), reference.theta.norm());

    let penalty = PenaltySchedule::new(0.1, 1.0)?;
    let spd = SolverConfig::penalty(penalty, 50).max_iter(5000).tol(1e-12).seed(1).reference(reference.clone());
    let step = SolverConfig::step(StepSchedule::harmonic(1.0)?, 50).max_iter(5000).tol(1e-12).seed(1).reference(reference.clone());
    let batch = SolverConfig::penalty(penalty, 1000).max_iter(200).tol(1e-12).reference(reference);

    for (name, trace) in [
        ("spd", run_spd(&model, &ball, &spd)?.1),
        ("batch pd", run_batch_pd(&model, &ball, &batch)?.1),
        ("psgd", run_psgd(&model, &ball, &step)?.1),
    ] {
        println!(
            "{name:<9} {:>5} iterations  ||theta_hat - theta*||^2 = {:.3e}  F gap = {:.3e}",
            trace.iterations,
            trace.final_param_err().unwrap(),
            trace.final_obj_err().unwrap()
        );
    }
    Ok(())
}
