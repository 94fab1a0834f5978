//! Synthetic data generators.
//!
//! * truths: a two-sided uniform band `(-7, -4) ∪ (4, 7)` scaled to norm 2
//!   (unit-ball experiments), `s` band entries on a random support (sparse
//!   experiments), or a 0/1 matrix with a fixed number of ones and rank `r`;
//! * linear: `x_ij ~ N(0, 1)`, `y_i ~ N(x_i^T theta, 1)`;
//! * logistic: `x_ij ~ 0.3 N(0, 1)`, `y_i ~ Bernoulli(sigmoid(x_i^T theta))`;
//! * Huber: linear data plus band noise `(-10, -5) ∪ (5, 10)` on a fixed
//!   fraction of rows;
//! * matrix: `X_i` entries `N(0, 1)`, `y_i ~ N(<X_i, Theta>, 1)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};

use crate::constraints::Shape;
use crate::error::{invalid, Result};
use crate::models::{sigmoid, Dataset, Family};
use crate::rng::{self, Purpose};

/// Structure of the true parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    /// Dense band entries scaled to Euclidean norm 2.
    UnitBall,
    /// Exactly `s` band entries.
    Sparse { s: usize },
    /// 0/1 matrix of rank `r`.
    LowRank { r: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    /// Covariate dimension, or matrix rows for the matrix family.
    pub p: usize,
    /// Matrix columns (matrix family only).
    pub q: usize,
    pub truth: Truth,
    /// Fraction of rows given outlier noise (Huber family only).
    pub outlier_frac: f64,
    /// Magnitude band of outlier noise.
    pub outlier_band: (f64, f64),
    /// Magnitude band of nonzero truth entries.
    pub signal_band: (f64, f64),
    /// Number of unit entries in a low-rank truth.
    pub matrix_ones: usize,
    pub seed: u64,
    /// Replicate index; selects independent streams under `seed`.
    pub replicate: u64,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, p: usize, truth: Truth) -> Self {
        Self {
            family,
            n,
            p,
            q: 1,
            truth,
            outlier_frac: match family {
                Family::Huber { .. } => 0.1,
                _ => 0.0,
            },
            outlier_band: (5.0, 10.0),
            signal_band: (4.0, 7.0),
            matrix_ones: 128,
            seed: 0,
            replicate: 0,
        }
    }

    /// Matrix regression with `rows x cols` covariates.
    pub fn matrix(n: usize, rows: usize, cols: usize, truth: Truth) -> Self {
        Self { q: cols, ..Self::new(Family::Matrix, n, rows, truth) }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn replicate(mut self, replicate: u64) -> Self {
        self.replicate = replicate;
        self
    }

    pub fn shape(&self) -> Shape {
        match self.family {
            Family::Matrix => Shape::Matrix { rows: self.p, cols: self.q },
            _ => Shape::Vector(self.p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(invalid("n, p and q must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.outlier_frac) {
            return Err(invalid("outlier fraction must lie in [0, 1]"));
        }
        let d = self.shape().len();
        match self.truth {
            Truth::Sparse { s } if s == 0 || s > d => {
                Err(invalid(format!("sparsity {s} outside 1..={d}")))
            }
            Truth::LowRank { .. } if self.family != Family::Matrix => {
                Err(invalid("low-rank truth needs the matrix family"))
            }
            Truth::LowRank { r } if r == 0 || r > self.p.min(self.q) => {
                Err(invalid(format!("rank {r} outside 1..={}", self.p.min(self.q))))
            }
            _ => Ok(()),
        }
    }
}

fn band<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let mag = rng.random_range(lo..hi);
    if rng.random_bool(0.5) { mag } else { -mag }
}

/// Draw the true parameter.
pub fn gen_theta_true(spec: &GenSpec) -> Result<DVector<f64>> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Purpose::Truth, spec.replicate);
    let d = spec.shape().len();
    Ok(match spec.truth {
        Truth::UnitBall => {
            let raw = DVector::from_fn(d, |_, _| band(&mut rng, spec.signal_band));
            let norm = raw.norm();
            raw * (2.0 / norm)
        }
        Truth::Sparse { s } => {
            let mut theta = DVector::zeros(d);
            for i in rand::seq::index::sample(&mut rng, d, s) {
                theta[i] = band(&mut rng, spec.signal_band);
            }
            theta
        }
        Truth::LowRank { r } => low_rank_truth(spec.matrix_ones, r, spec.p, spec.q)?,
    })
}

/// Row lengths of a top-left staircase of ones with exactly `r` distinct
/// lengths, `ones` cells in total, fitting `rows x cols`.
///
/// Rows `1{j < L}` with distinct `L` are linearly independent, so the
/// staircase has rank `r` and Frobenius norm `sqrt(ones)`.
fn staircase(ones: usize, r: usize, rows: usize, cols: usize) -> Option<Vec<usize>> {
    if r == 1 {
        return (1..=cols)
            .rev()
            .find(|&len| ones % len == 0 && ones / len <= rows)
            .map(|len| vec![len; ones / len]);
    }
    // r - 1 rows of lengths top, top - 1, ..., top - r + 2, then `count`
    // rows of a shorter length and `extra` more rows of length top
    (r..=cols).rev().find_map(|top| {
        let distinct: Vec<usize> = (0..r - 1).map(|i| top - i).collect();
        let rest = ones.checked_sub(distinct.iter().sum())?;
        for len in (1..=top + 1 - r).rev() {
            for count in 1..=rows {
                if count * len > rest {
                    break;
                }
                let left = rest - count * len;
                if left % top != 0 {
                    continue;
                }
                let extra = left / top;
                if r - 1 + extra + count > rows {
                    continue;
                }
                let mut out = vec![top; extra];
                out.extend(&distinct);
                out.extend(std::iter::repeat_n(len, count));
                return Some(out);
            }
        }
        None
    })
}

fn low_rank_truth(ones: usize, r: usize, rows: usize, cols: usize) -> Result<DVector<f64>> {
    let lengths = staircase(ones, r, rows, cols).ok_or_else(|| {
        invalid(format!("cannot place {ones} ones with rank {r} in a {rows}x{cols} matrix"))
    })?;
    let mut m = DMatrix::zeros(rows, cols);
    for (i, len) in lengths.iter().enumerate() {
        for j in 0..*len {
            m[(i, j)] = 1.0;
        }
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

/// Generated data plus bookkeeping.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: Dataset,
    /// Rows that received outlier noise, sorted.
    pub outliers: Vec<usize>,
}

/// Draw a dataset whose responses depend on `theta_true`.
pub fn gen_dataset(spec: &GenSpec, theta_true: &DVector<f64>) -> Result<Dataset> {
    Ok(gen_dataset_detailed(spec, theta_true)?.data)
}

pub fn gen_dataset_detailed(spec: &GenSpec, theta_true: &DVector<f64>) -> Result<Generated> {
    spec.validate()?;
    let shape = spec.shape();
    crate::error::check_dim(shape.len(), theta_true.len())?;
    let mut rng = rng::stream(spec.seed, Purpose::Data, spec.replicate);
    let (n, d) = (spec.n, shape.len());
    let scale = if spec.family == Family::Logistic { 0.3 } else { 1.0 };
    let x = DMatrix::from_fn(n, d, |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    });
    let u = &x * theta_true;
    let mut y = match spec.family {
        Family::Logistic => DVector::from_fn(n, |i, _| {
            let coin = Bernoulli::new(sigmoid(u[i])).expect("probability in [0, 1]");
            if coin.sample(&mut rng) { 1.0 } else { 0.0 }
        }),
        _ => DVector::from_fn(n, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            u[i] + z
        }),
    };
    let mut outliers = Vec::new();
    if matches!(spec.family, Family::Huber { .. }) && spec.outlier_frac > 0.0 {
        let count = (spec.outlier_frac * n as f64).round() as usize;
        outliers = rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec();
        outliers.sort_unstable();
        for &i in &outliers {
            y[i] += band(&mut rng, spec.outlier_band);
        }
    }
    let data = Dataset::with_shape(x, y, shape)?;
    Ok(Generated { data, outliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_truth_has_norm_two() {
        let spec = GenSpec::new(Family::Linear, 10, 50, Truth::UnitBall).seed(3);
        let t = gen_theta_true(&spec).unwrap();
        assert!((t.norm() - 2.0).abs() < 1e-12);
        assert_eq!(t, gen_theta_true(&spec).unwrap());
        assert_ne!(t, gen_theta_true(&spec.clone().seed(4)).unwrap());
    }

    #[test]
    fn sparse_truth_support_and_band() {
        let spec = GenSpec::new(Family::Linear, 10, 100, Truth::Sparse { s: 5 }).seed(1);
        let t = gen_theta_true(&spec).unwrap();
        let nz: Vec<f64> = t.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 5);
        assert!(nz.iter().all(|v| (4.0..=7.0).contains(&v.abs())));
        let bad = GenSpec::new(Family::Linear, 10, 4, Truth::Sparse { s: 5 });
        assert!(gen_theta_true(&bad).is_err());
    }

    #[test]
    fn staircase_hits_rank_and_count() {
        for (rows, cols) in [(64, 64), (16, 16), (12, 20)] {
            for r in [1, 2, 5] {
                let t = low_rank_truth(128, r, rows, cols).unwrap();
                assert_eq!(t.iter().filter(|v| **v == 1.0).count(), 128);
                let m = DMatrix::from_column_slice(rows, cols, t.as_slice());
                let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
                sv.sort_by(|a, b| b.total_cmp(a));
                assert!(sv[r - 1] > 1e-8, "{rows}x{cols} r={r}");
                assert!(sv.get(r).is_none_or(|v| *v < 1e-8), "{rows}x{cols} r={r}");
            }
        }
        assert!(low_rank_truth(300, 2, 16, 16).is_err());
    }

    #[test]
    fn matrix_truth_frobenius_norm() {
        let spec = GenSpec::matrix(20, 64, 64, Truth::LowRank { r: 5 });
        let t = gen_theta_true(&spec).unwrap();
        assert_eq!(t.norm_squared(), 128.0);
        let d = gen_dataset(&spec, &t).unwrap();
        assert_eq!(d.dim(), 4096);
        assert_eq!(d.shape(), Shape::Matrix { rows: 64, cols: 64 });
    }

    #[test]
    fn null_linear_model_has_centred_responses() {
        let spec = GenSpec::new(Family::Linear, 4000, 3, Truth::UnitBall).seed(11);
        let d = gen_dataset(&spec, &DVector::zeros(3)).unwrap();
        let mean = d.responses().mean();
        assert!(mean.abs() < 4.0 / (4000f64).sqrt());
    }

    #[test]
    fn huber_outlier_count() {
        let spec = GenSpec::new(Family::Huber { delta: 2.0 }, 1000, 5, Truth::UnitBall).seed(2);
        let t = gen_theta_true(&spec).unwrap();
        let g = gen_dataset_detailed(&spec, &t).unwrap();
        assert_eq!(g.outliers.len(), 100);
        let clean = GenSpec { family: Family::Linear, ..spec.clone() };
        let base = gen_dataset(&clean, &t).unwrap();
        let shifted: Vec<usize> = (0..1000)
            .filter(|&i| g.data.responses()[i] != base.responses()[i])
            .collect();
        assert_eq!(shifted, g.outliers);
        for &i in &g.outliers {
            let delta = (g.data.responses()[i] - base.responses()[i]).abs();
            assert!((5.0..=10.0).contains(&delta));
        }
    }

    #[test]
    fn logistic_covariate_scale_and_labels() {
        let spec = GenSpec::new(Family::Logistic, 2000, 50, Truth::UnitBall).seed(5);
        let t = gen_theta_true(&spec).unwrap();
        let d = gen_dataset(&spec, &t).unwrap();
        let x = d.covariates();
        let sd = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((sd - 0.3).abs() < 0.015, "{sd}");
        assert!(d.responses().iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn datasets_are_reproducible_per_seed() {
        let spec = GenSpec::new(Family::Linear, 30, 4, Truth::UnitBall).seed(9);
        let t = gen_theta_true(&spec).unwrap();
        let a = gen_dataset(&spec, &t).unwrap();
        let b = gen_dataset(&spec, &t).unwrap();
        assert_eq!(a.covariates(), b.covariates());
        assert_eq!(a.responses(), b.responses());
        let c = gen_dataset(&spec.clone().replicate(1), &t).unwrap();
        assert_ne!(a.covariates(), c.covariates());
    }
}
