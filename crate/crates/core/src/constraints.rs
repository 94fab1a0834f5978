//! Euclidean projections onto the constraint families and the squared
//! distance penalty `dist(x, C)^2 = ||x - P_C(x)||^2`.
//!
//! Parameters are flat vectors. Matrix parameters are stored column-major
//! (`vec(Theta)`), which is the layout the matrix covariates use as well.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};

/// Ambient space of a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    /// `rows x cols` matrix stored column-major.
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    /// Number of scalar coordinates.
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(p) => p,
            Shape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Unconstrained,
    /// `{x : ||x||_2 <= 1}` (Frobenius norm for matrices).
    UnitBall,
    /// At most `s` nonzero coordinates.
    Sparsity(usize),
    /// Matrix rank at most `r`.
    Rank(usize),
}

/// A projection-capable constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintSet {
    kind: ConstraintKind,
    shape: Shape,
}

// Norms within this many ulps of 1 count as feasible so that projecting a
// projected point returns it bit-for-bit.
const BALL_SLACK: f64 = 4.0 * f64::EPSILON;

impl ConstraintSet {
    pub fn new(kind: ConstraintKind, shape: Shape) -> Result<Self> {
        if shape.is_empty() {
            return Err(invalid("parameter dimension must be positive"));
        }
        match kind {
            ConstraintKind::Sparsity(s) if s == 0 || s > shape.len() => {
                return Err(invalid(format!(
                    "sparsity level {s} outside 1..={}",
                    shape.len()
                )));
            }
            ConstraintKind::Rank(r) => match shape {
                Shape::Matrix { rows, cols } if r >= 1 && r <= rows.min(cols) => {}
                Shape::Matrix { rows, cols } => {
                    return Err(invalid(format!(
                        "rank {r} outside 1..={}",
                        rows.min(cols)
                    )));
                }
                Shape::Vector(_) => {
                    return Err(invalid("rank constraint needs a matrix shape"));
                }
            },
            _ => {}
        }
        Ok(Self { kind, shape })
    }

    pub fn unconstrained(shape: Shape) -> Self {
        Self { kind: ConstraintKind::Unconstrained, shape }
    }

    pub fn unit_ball(shape: Shape) -> Self {
        Self { kind: ConstraintKind::UnitBall, shape }
    }

    pub fn sparsity(p: usize, s: usize) -> Result<Self> {
        Self::new(ConstraintKind::Sparsity(s), Shape::Vector(p))
    }

    pub fn rank(rows: usize, cols: usize, r: usize) -> Result<Self> {
        Self::new(ConstraintKind::Rank(r), Shape::Matrix { rows, cols })
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Whether the constraint set is convex (unit ball or whole space).
    pub fn is_convex(&self) -> bool {
        matches!(self.kind, ConstraintKind::Unconstrained | ConstraintKind::UnitBall)
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ConstraintKind::Unconstrained => x.clone(),
            ConstraintKind::UnitBall => project_ball(x),
            ConstraintKind::Sparsity(s) => project_sparse(x, s),
            ConstraintKind::Rank(r) => match self.shape {
                Shape::Matrix { rows, cols } => project_rank(x, rows, cols, r),
                Shape::Vector(_) => unreachable!("validated at construction"),
            },
        }
    }

    /// `||x - P_C(x)||^2`.
    pub fn distance_sq(&self, x: &DVector<f64>) -> Result<f64> {
        let proj = self.project(x)?;
        Ok((x - proj).norm_squared())
    }

    /// Feasibility test with absolute tolerance `tol` on the defining
    /// quantity (norm excess, off-support mass, or trailing singular values).
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self.kind {
            ConstraintKind::Unconstrained => true,
            ConstraintKind::UnitBall => x.norm() <= 1.0 + tol,
            ConstraintKind::Sparsity(s) => x.iter().filter(|v| v.abs() > tol).count() <= s,
            ConstraintKind::Rank(r) => {
                let Shape::Matrix { rows, cols } = self.shape else {
                    unreachable!()
                };
                let m = DMatrix::from_column_slice(rows, cols, x.as_slice());
                let sv = m.singular_values();
                let mut sorted: Vec<f64> = sv.iter().copied().collect();
                sorted.sort_by(|a, b| b.total_cmp(a));
                sorted.iter().skip(r).all(|v| *v <= tol)
            }
        })
    }
}

fn project_ball(x: &DVector<f64>) -> DVector<f64> {
    let norm = x.norm();
    if norm <= 1.0 + BALL_SLACK {
        x.clone()
    } else {
        x / norm
    }
}

/// Indices of the `s` largest-magnitude coordinates; ties keep the lower index.
pub(crate) fn top_s_support(x: &DVector<f64>, s: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    // stable sort: equal magnitudes stay in index order
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
    order.truncate(s);
    order
}

fn project_sparse(x: &DVector<f64>, s: usize) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for i in top_s_support(x, s) {
        out[i] = x[i];
    }
    out
}

fn project_rank(x: &DVector<f64>, rows: usize, cols: usize, r: usize) -> DVector<f64> {
    let m = DMatrix::from_column_slice(rows, cols, x.as_slice());
    // `SVD::new` returns singular values sorted in decreasing order.
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut out = DMatrix::zeros(rows, cols);
    for k in 0..r.min(svd.singular_values.len()) {
        let sigma = svd.singular_values[k];
        if sigma == 0.0 {
            continue;
        }
        out += (u.column(k) * sigma) * v_t.row(k);
    }
    DVector::from_column_slice(out.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn ball_scales_outside_points() {
        let c = ConstraintSet::unit_ball(Shape::Vector(2));
        let p = c.project(&v(&[3.0, 4.0])).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!((c.distance_sq(&v(&[3.0, 4.0])).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(c.project(&v(&[0.3, 0.4])).unwrap(), v(&[0.3, 0.4]));
    }

    #[test]
    fn sparsity_keeps_largest_magnitudes() {
        let c = ConstraintSet::sparsity(4, 2).unwrap();
        let x = v(&[3.0, -1.0, 5.0, 0.5]);
        assert_eq!(c.project(&x).unwrap(), v(&[3.0, 0.0, 5.0, 0.0]));
        assert!((c.distance_sq(&x).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn sparsity_ties_keep_lower_index() {
        let c = ConstraintSet::sparsity(4, 2).unwrap();
        let x = v(&[1.0, -2.0, 2.0, -2.0]);
        assert_eq!(c.project(&x).unwrap(), v(&[0.0, -2.0, 2.0, 0.0]));
        let zero = DVector::zeros(4);
        assert_eq!(c.project(&zero).unwrap(), zero);
    }

    #[test]
    fn rank_one_of_diagonal() {
        let c = ConstraintSet::rank(2, 2, 1).unwrap();
        let x = v(&[3.0, 0.0, 0.0, 1.0]);
        let p = c.project(&x).unwrap();
        let expect = v(&[3.0, 0.0, 0.0, 0.0]);
        assert!((p - expect).norm() < 1e-12);
    }

    #[test]
    fn feasible_points_have_zero_distance() {
        let ball = ConstraintSet::unit_ball(Shape::Vector(3));
        assert_eq!(ball.distance_sq(&v(&[0.1, 0.2, 0.3])).unwrap(), 0.0);
        let sp = ConstraintSet::sparsity(3, 1).unwrap();
        assert_eq!(sp.distance_sq(&v(&[0.0, 4.0, 0.0])).unwrap(), 0.0);
        let free = ConstraintSet::unconstrained(Shape::Vector(2));
        assert_eq!(free.project(&v(&[9.0, -9.0])).unwrap(), v(&[9.0, -9.0]));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ConstraintSet::sparsity(3, 0).is_err());
        assert!(ConstraintSet::sparsity(3, 4).is_err());
        assert!(ConstraintSet::rank(3, 2, 3).is_err());
        assert!(ConstraintSet::new(ConstraintKind::Rank(1), Shape::Vector(4)).is_err());
        let c = ConstraintSet::unit_ball(Shape::Vector(2));
        assert!(c.project(&v(&[1.0, 2.0, 3.0])).is_err());
        assert!(c.distance_sq(&v(&[1.0])).is_err());
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-5.0f64..5.0, len).prop_map(DVector::from_vec)
    }

    fn sets() -> Vec<ConstraintSet> {
        vec![
            ConstraintSet::unit_ball(Shape::Vector(6)),
            ConstraintSet::sparsity(6, 2).unwrap(),
            ConstraintSet::rank(3, 2, 1).unwrap(),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn projection_is_idempotent(x in vec_strategy(6)) {
            for c in sets() {
                let once = c.project(&x).unwrap();
                let twice = c.project(&once).unwrap();
                match c.kind() {
                    ConstraintKind::Rank(_) => prop_assert!((&twice - &once).norm() <= 1e-10),
                    _ => prop_assert_eq!(&twice, &once),
                }
            }
        }

        #[test]
        fn projection_is_nearest(x in vec_strategy(6), y in vec_strategy(6)) {
            for c in sets() {
                let y_in = c.project(&y).unwrap();
                let px = c.project(&x).unwrap();
                prop_assert!((&x - &px).norm() <= (&x - &y_in).norm() + 1e-12);
            }
        }

        #[test]
        fn ball_is_non_expansive(x in vec_strategy(6), y in vec_strategy(6)) {
            let c = ConstraintSet::unit_ball(Shape::Vector(6));
            let (px, py) = (c.project(&x).unwrap(), c.project(&y).unwrap());
            prop_assert!((px - py).norm() <= (&x - &y).norm() + 1e-12);
        }

        #[test]
        fn projections_are_feasible(x in vec_strategy(6)) {
            let ball = ConstraintSet::unit_ball(Shape::Vector(6));
            prop_assert!(ball.project(&x).unwrap().norm() <= 1.0 + 1e-12);
            let sp = ConstraintSet::sparsity(6, 2).unwrap();
            prop_assert!(sp.project(&x).unwrap().iter().filter(|v| **v != 0.0).count() <= 2);
            let rk = ConstraintSet::rank(3, 2, 1).unwrap();
            prop_assert!(rk.contains(&rk.project(&x).unwrap(), 1e-10).unwrap());
        }
    }
}
