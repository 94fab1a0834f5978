//! Random instances and independent oracles shared by the integration tests.
//!
//! The losses here are written out from their definitions and never call the
//! library, so agreement with the library is a genuine cross-check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use proxdist::{Batch, Dataset, Family, Shape};

pub const FAMILIES: [Family; 4] = [
    Family::Linear,
    Family::Logistic,
    Family::Huber { delta: 1.0 },
    Family::Matrix,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut impl Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn normal_mat(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// A prox problem: data, batch, anchor and penalty.
pub struct Instance {
    pub family: Family,
    pub data: Dataset,
    pub batch: Batch,
    pub anchor: DVector<f64>,
    pub rho: f64,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Batch rows as `(x_i, y_i)`.
    pub fn rows(&self) -> Vec<(DVector<f64>, f64)> {
        let x = self.data.covariates();
        let y = self.data.responses();
        self.batch
            .indices()
            .iter()
            .map(|&i| (x.row(i).transpose(), y[i]))
            .collect()
    }
}

/// Draw an instance with dimension at most `d_max` and batch size at most
/// `b_max`; `rho` is log-uniform on `[rho_lo, rho_hi]`.
pub fn instance(rng: &mut impl Rng, family: Family, d_max: usize, b_max: usize, (rho_lo, rho_hi): (f64, f64)) -> Instance {
    let shape = match family {
        Family::Matrix => {
            let rows = rng.random_range(1..=3.min(d_max));
            let cols = rng.random_range(1..=(d_max / rows).clamp(1, 3));
            Shape::Matrix { rows, cols }
        }
        _ => Shape::Vector(rng.random_range(1..=d_max)),
    };
    let d = shape.len();
    let b = rng.random_range(1..=b_max);
    let n = b + rng.random_range(0..=4);
    let x = normal_mat(rng, n, d);
    let theta = normal_vec(rng, d, 1.0);
    let u = &x * &theta;
    let y = DVector::from_fn(n, |i, _| match family {
        Family::Logistic => {
            let p = 1.0 / (1.0 + (-u[i]).exp());
            if rng.random_bool(p) { 1.0 } else { 0.0 }
        }
        // wide noise so both Huber regimes occur
        Family::Huber { .. } => u[i] + 3.0 * rng.sample::<f64, _>(StandardNormal),
        _ => u[i] + rng.sample::<f64, _>(StandardNormal),
    });
    let data = match shape {
        Shape::Matrix { rows, cols } => Dataset::matrix(x, y, rows, cols).unwrap(),
        Shape::Vector(_) => Dataset::new(x, y).unwrap(),
    };
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, n, b).into_vec();
    idx.sort_unstable();
    let batch = Batch::new(idx, n).unwrap();
    let anchor = normal_vec(rng, d, 2.0);
    let rho = (rng.random_range(rho_lo.ln()..=rho_hi.ln())).exp();
    Instance { family, data, batch, anchor, rho }
}

/// Per-observation loss `f(y, u)` with `u = x^T theta`.
pub fn loss(family: Family, y: f64, u: f64) -> f64 {
    match family {
        Family::Linear | Family::Matrix => 0.5 * (y - u).powi(2),
        Family::Logistic => u.max(0.0) + (-u.abs()).exp().ln_1p() - y * u,
        Family::Huber { delta } => {
            let a = (y - u).abs();
            if a <= delta { 0.5 * a * a } else { delta * a - 0.5 * delta * delta }
        }
    }
}

/// Mean batch loss.
pub fn batch_loss(inst: &Instance, theta: &DVector<f64>) -> f64 {
    let rows = inst.rows();
    rows.iter().map(|(x, y)| loss(inst.family, *y, x.dot(theta))).sum::<f64>() / rows.len() as f64
}

/// `g(theta) + (rho / 2) ||theta - v||^2`.
pub fn surrogate(inst: &Instance, theta: &DVector<f64>) -> f64 {
    batch_loss(inst, theta) + 0.5 * inst.rho * (theta - &inst.anchor).norm_squared()
}

/// Root of a nondecreasing function of one variable, bracketed outward
/// from `c` and then bisected down to adjacent floats.
pub fn bisect_root(g: impl Fn(f64) -> f64, c: f64) -> f64 {
    let mut h = 1.0;
    while g(c - h) > 0.0 || g(c + h) < 0.0 {
        h *= 2.0;
    }
    let (mut lo, mut hi) = (c - h, c + h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimize the prox surrogate by cyclic coordinate descent, each coordinate
/// solved exactly by bisection on its partial derivative.
pub fn coordinate_oracle(inst: &Instance) -> DVector<f64> {
    let rows = inst.rows();
    let b = rows.len() as f64;
    let d = inst.dim();
    let mut theta = inst.anchor.clone();
    let mut u: Vec<f64> = rows.iter().map(|(x, _)| x.dot(&theta)).collect();
    for _ in 0..100_000 {
        let mut moved: f64 = 0.0;
        for j in 0..d {
            let old = theta[j];
            let slope = |t: f64| {
                let fit: f64 = rows
                    .iter()
                    .zip(&u)
                    .map(|((x, y), ui)| x[j] * dloss(inst.family, *y, ui + (t - old) * x[j]))
                    .sum();
                fit / b + inst.rho * (t - inst.anchor[j])
            };
            let t = bisect_root(slope, old);
            for ((x, _), ui) in rows.iter().zip(u.iter_mut()) {
                *ui += (t - old) * x[j];
            }
            theta[j] = t;
            moved = moved.max((t - old).abs());
        }
        if moved < 1e-14 * (1.0 + theta.amax()) {
            break;
        }
    }
    theta
}

/// Explicit linear prox `(b rho I + X^T X)^{-1} (b rho v + X^T y)` via LU.
pub fn linear_explicit(inst: &Instance) -> DVector<f64> {
    let rows = inst.rows();
    let d = inst.dim();
    let b = rows.len() as f64;
    let mut lhs = DMatrix::<f64>::identity(d, d) * (b * inst.rho);
    let mut rhs = &inst.anchor * (b * inst.rho);
    for (x, y) in &rows {
        lhs += x * x.transpose();
        rhs += x * *y;
    }
    lhs.lu().solve(&rhs).expect("nonsingular")
}

/// Per-observation derivative `df/du`.
pub fn dloss(family: Family, y: f64, u: f64) -> f64 {
    match family {
        Family::Linear | Family::Matrix => u - y,
        Family::Logistic => 1.0 / (1.0 + (-u).exp()) - y,
        Family::Huber { delta } => (u - y).clamp(-delta, delta),
    }
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, theta: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(theta.len(), |j, _| {
        let mut a = theta.clone();
        let mut b = theta.clone();
        a[j] += h;
        b[j] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}
