//! One proximal step for each loss family, with the surrogate gradient at the
//! answer as a certificate of optimality.
//!
//! cargo run --example prox_operators

use nalgebra::{DMatrix, DVector};
use proxdist::prox::{self, linear_direct, linear_woodbury};
use proxdist::{Batch, Dataset, Family, Model, ProxProblem};

fn main() -> proxdist::Result<()> {
    let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.5, -1.0, 0.2, 1.5, 0.3, -0.7, 0.1, 2.0, 1.1, -0.4, 0.6]);
    let scores = DVector::from_vec(vec![2.0, -1.0, 6.5, 0.3]);
    let labels = DVector::from_vec(vec![1.0, 0.0, 1.0, 1.0]);
    let anchor = DVector::from_vec(vec![0.2, -0.1, 0.4]);
    let batch = Batch::new(vec![0, 2, 3], 4)?;
    let rho = 0.5;

    for (family, y) in [
        (Family::Linear, &scores),
        (Family::Logistic, &labels),
        (Family::Huber { delta: 1.0 }, &scores),
    ] {
        let data = Dataset::new(x.clone(), y.clone())?;
        let model = Model::new(family, &data)?;
        let problem = ProxProblem::new(model, &batch, &anchor, rho);
        let out = prox::solve(&problem)?;
        println!(
            "{:<8} theta = {:.5?}  inner iterations {:>2}  |grad surrogate| = {:.1e}",
            family.name(),
            out.theta.as_slice(),
            out.iterations,
            problem.surrogate_gradient(&out.theta)?.norm()
        );
    }

    // the two closed forms of the linear prox agree; Woodbury solves a b x b system
    let wide = DMatrix::from_fn(2, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let y = DVector::from_vec(vec![1.0, -2.0]);
    let v = DVector::from_element(6, 0.1);
    let direct = linear_direct(&wide, &y, &v, rho)?;
    let woodbury = linear_woodbury(&wide, &y, &v, rho)?;
    println!("direct vs Woodbury gap: {:.1e}", (direct - woodbury).norm());
    Ok(())
}
