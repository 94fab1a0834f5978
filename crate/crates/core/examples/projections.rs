//! Euclidean projections onto the three constraint families.
//!
//! cargo run --example projections

use nalgebra::{DMatrix, DVector};
use proxdist::{ConstraintSet, Shape};

fn main() -> proxdist::Result<()> {
    let x = DVector::from_vec(vec![3.0, -0.5, 4.0, 0.1]);

    let ball = ConstraintSet::unit_ball(Shape::Vector(4));
    let on_ball = ball.project(&x)?;
    println!("unit ball:   {:?}  norm {:.3}", on_ball.as_slice(), on_ball.norm());

    let sparse = ConstraintSet::sparsity(4, 2)?;
    println!("2-sparse:    {:?}", sparse.project(&x)?.as_slice());
    println!("dist^2 to the 2-sparse set: {}", sparse.distance_sq(&x)?);

    // matrices are stored column-major as vec(Theta)
    let m = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 2.0]);
    let rank1 = ConstraintSet::rank(3, 3, 1)?;
    let projected = rank1.project(&DVector::from_column_slice(m.as_slice()))?;
    let back = DMatrix::from_column_slice(3, 3, projected.as_slice());
    println!("best rank-1 approximation:{back:.3}");
    println!("singular values: {:.3?}", back.singular_values().as_slice());
    Ok(())
}
