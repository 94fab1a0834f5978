//! Loss families, datasets and minibatches.
//!
//! Each family is evaluated through the linear predictor `u_i = x_i^T theta`:
//!
//! | family   | per-sample loss                    | score `psi_i`            |
//! |----------|------------------------------------|--------------------------|
//! | linear   | `(y - u)^2 / 2`                    | `y - u`                  |
//! | matrix   | same as linear on `vec(X_i)`       | `y - u`                  |
//! | logistic | `log(1 + e^u) - y u`               | `y - sigmoid(u)`         |
//! | huber    | `L_delta(y - u)`                   | `L'_delta(y - u)`        |
//!
//! and the batch gradient is always `-(1/b) X^T psi`.

use std::borrow::Cow;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::constraints::Shape;
use crate::error::{check_dim, invalid, Error, Result};

/// Logistic predictors are clamped to this magnitude before exponentiation.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Linear,
    Logistic,
    Huber { delta: f64 },
    /// Least squares on matrix covariates, `(y_i - <X_i, Theta>)^2 / 2`.
    Matrix,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Huber { .. } => "huber",
            Family::Matrix => "matrix",
        }
    }

    /// Families whose prox has a closed form.
    pub fn is_quadratic(&self) -> bool {
        matches!(self, Family::Linear | Family::Matrix)
    }
}

/// Cached full-data quantities for the closed-form full-batch prox.
#[derive(Debug)]
pub(crate) struct Gram {
    pub eigen: SymmetricEigen<f64, nalgebra::Dyn>,
    pub xty: DVector<f64>,
}

/// Immutable design matrix and responses.
///
/// Matrix covariates are stored one observation per row as `vec(X_i)`
/// (column-major), so every family sees an `n x d` design.
#[derive(Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    shape: Shape,
    gram: OnceLock<Gram>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            shape: self.shape,
            gram: OnceLock::new(),
        }
    }
}

impl Dataset {
    /// Vector covariates: `x` is `n x p`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let p = x.ncols();
        Self::with_shape(x, y, Shape::Vector(p))
    }

    /// Matrix covariates: row `i` of `x` holds `vec(X_i)` for a `rows x cols` X_i.
    pub fn matrix(x: DMatrix<f64>, y: DVector<f64>, rows: usize, cols: usize) -> Result<Self> {
        Self::with_shape(x, y, Shape::Matrix { rows, cols })
    }

    pub fn with_shape(x: DMatrix<f64>, y: DVector<f64>, shape: Shape) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(invalid("dataset needs at least one observation"));
        }
        check_dim(x.nrows(), y.len())?;
        check_dim(shape.len(), x.ncols())?;
        if shape.is_empty() {
            return Err(invalid("covariate dimension must be positive"));
        }
        Ok(Self { x, y, shape, gram: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of parameters (`p`, or `p * q` for matrix covariates).
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.y
    }

    pub(crate) fn gram(&self) -> &Gram {
        self.gram.get_or_init(|| {
            let xt = self.x.transpose();
            let gram = &xt * &self.x;
            Gram {
                eigen: SymmetricEigen::new(gram),
                xty: xt * &self.y,
            }
        })
    }

    /// Parse CSV text: optional header, one observation per row, response in
    /// the last column. `shape` declares the parameter shape for matrix
    /// covariates; `None` means vector covariates.
    pub fn read_csv<R: BufRead>(reader: R, shape: Option<Shape>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<f64> = Vec::new();
        let mut y: Vec<f64> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, record) in rdr.records().enumerate() {
            let line = idx + 1;
            let record = record.map_err(|e| Error::MalformedCsv {
                line,
                reason: e.to_string(),
            })?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let values = match parsed {
                Ok(v) => v,
                // a non-numeric first row is a header
                Err(_) if idx == 0 => continue,
                Err(e) => {
                    return Err(Error::MalformedCsv { line, reason: e.to_string() });
                }
            };
            if values.len() < 2 {
                return Err(Error::MalformedCsv {
                    line,
                    reason: "need at least one covariate and a response".into(),
                });
            }
            match width {
                None => width = Some(values.len()),
                Some(w) if w != values.len() => {
                    return Err(Error::MalformedCsv {
                        line,
                        reason: format!("expected {w} fields, found {}", values.len()),
                    });
                }
                _ => {}
            }
            let (resp, cov) = values.split_last().expect("non-empty");
            rows.extend_from_slice(cov);
            y.push(*resp);
        }
        let Some(width) = width else {
            return Err(Error::MalformedCsv { line: 0, reason: "no observations".into() });
        };
        let d = width - 1;
        let x = DMatrix::from_row_slice(y.len(), d, &rows);
        let shape = shape.unwrap_or(Shape::Vector(d));
        Self::with_shape(x, DVector::from_vec(y), shape)
    }

    pub fn from_csv_path(path: &Path, shape: Option<Shape>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), shape)
    }

    /// Write as CSV with a header row `x1,...,xd,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for i in 0..self.n() {
            let mut line = String::new();
            for j in 0..self.dim() {
                line.push_str(&format!("{},", self.x[(i, j)]));
            }
            line.push_str(&format!("{}", self.y[i]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// A minibatch index set, sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    indices: Vec<usize>,
    full: bool,
}

impl Batch {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("batch must be non-empty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("batch indices must be distinct"));
        }
        if *indices.last().expect("non-empty") >= n {
            return Err(invalid("batch index out of range"));
        }
        let full = indices.len() == n;
        Ok(Self { indices, full })
    }

    /// Every observation.
    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect(), full: true }
    }

    /// `b` indices drawn from `0..n` without replacement.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize, b: usize) -> Result<Self> {
        if b == 0 || b > n {
            return Err(invalid(format!("batch size {b} outside 1..={n}")));
        }
        let mut indices = rand::seq::index::sample(rng, n, b).into_vec();
        indices.sort_unstable();
        let full = b == n;
        Ok(Self { indices, full })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }
}

/// Rows of the design selected by a batch.
pub(crate) struct BatchData<'a> {
    pub x: Cow<'a, DMatrix<f64>>,
    pub y: Cow<'a, DVector<f64>>,
    pub full: bool,
}

impl BatchData<'_> {
    pub fn b(&self) -> usize {
        self.y.len()
    }
}

/// A loss family bound to a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    family: Family,
    data: &'a Dataset,
}

impl<'a> Model<'a> {
    pub fn new(family: Family, data: &'a Dataset) -> Result<Self> {
        match family {
            Family::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(invalid("Huber threshold must be positive"));
            }
            Family::Logistic if data.y.iter().any(|&v| v != 0.0 && v != 1.0) => {
                return Err(invalid("logistic responses must be 0 or 1"));
            }
            Family::Matrix if !matches!(data.shape, Shape::Matrix { .. }) => {
                return Err(invalid("matrix family needs matrix covariates"));
            }
            Family::Linear | Family::Logistic | Family::Huber { .. }
                if matches!(data.shape, Shape::Matrix { .. }) =>
            {
                return Err(invalid("matrix covariates pair with the matrix family only"));
            }
            _ => {}
        }
        Ok(Self { family, data })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub(crate) fn batch_data(&self, batch: &Batch) -> BatchData<'a> {
        if batch.is_full() {
            BatchData {
                x: Cow::Borrowed(&self.data.x),
                y: Cow::Borrowed(&self.data.y),
                full: true,
            }
        } else {
            let idx = batch.indices();
            BatchData {
                x: Cow::Owned(self.data.x.select_rows(idx.iter())),
                y: Cow::Owned(DVector::from_iterator(
                    idx.len(),
                    idx.iter().map(|&i| self.data.y[i]),
                )),
                full: false,
            }
        }
    }

    fn check(&self, theta: &DVector<f64>, batch: &Batch) -> Result<()> {
        check_dim(self.dim(), theta.len())?;
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        if batch.indices().last().is_some_and(|&i| i >= self.data.n()) {
            return Err(invalid("batch index out of range"));
        }
        Ok(())
    }

    /// Mean per-sample loss over the batch.
    pub fn loss(&self, theta: &DVector<f64>, batch: &Batch) -> Result<f64> {
        self.check(theta, batch)?;
        Ok(self.loss_on(&self.batch_data(batch), theta))
    }

    /// Gradient of [`Model::loss`] in `theta`.
    pub fn gradient(&self, theta: &DVector<f64>, batch: &Batch) -> Result<DVector<f64>> {
        self.check(theta, batch)?;
        Ok(self.gradient_on(&self.batch_data(batch), theta))
    }

    /// Logistic Hessian weights `e^u / (1 + e^u)^2`, one per batch row.
    pub fn hessian_weights(&self, theta: &DVector<f64>, batch: &Batch) -> Result<DVector<f64>> {
        if self.family != Family::Logistic {
            return Err(invalid(format!(
                "Hessian weights are defined for the logistic family, not {}",
                self.family.name()
            )));
        }
        self.check(theta, batch)?;
        let bd = self.batch_data(batch);
        Ok((&*bd.x * theta).map(logistic_weight))
    }

    /// Full-data objective `F(theta)`.
    pub fn objective(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.objective_unchecked(theta))
    }

    pub(crate) fn objective_unchecked(&self, theta: &DVector<f64>) -> f64 {
        let u = &self.data.x * theta;
        self.mean_loss(&u, &self.data.y)
    }

    pub(crate) fn loss_on(&self, bd: &BatchData, theta: &DVector<f64>) -> f64 {
        let u = &*bd.x * theta;
        self.mean_loss(&u, &bd.y)
    }

    pub(crate) fn gradient_on(&self, bd: &BatchData, theta: &DVector<f64>) -> DVector<f64> {
        let u = &*bd.x * theta;
        let psi = self.scores(&u, &bd.y);
        bd.x.tr_mul(&psi) * (-1.0 / bd.b() as f64)
    }

    pub(crate) fn mean_loss(&self, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let total: f64 = match self.family {
            Family::Linear | Family::Matrix => {
                u.iter().zip(y.iter()).map(|(u, y)| 0.5 * (y - u) * (y - u)).sum()
            }
            Family::Logistic => u.iter().zip(y.iter()).map(|(&u, &y)| softplus(u) - y * u).sum(),
            Family::Huber { delta } => {
                u.iter().zip(y.iter()).map(|(u, y)| huber(y - u, delta)).sum()
            }
        };
        total / u.len() as f64
    }

    /// `psi_i` with gradient `-(1/b) X^T psi`.
    pub(crate) fn scores(&self, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match self.family {
            Family::Linear | Family::Matrix => y - u,
            Family::Logistic => DVector::from_iterator(
                u.len(),
                u.iter().zip(y.iter()).map(|(&u, &y)| y - sigmoid(u)),
            ),
            Family::Huber { delta } => DVector::from_iterator(
                u.len(),
                u.iter().zip(y.iter()).map(|(u, y)| huber_slope(y - u, delta)),
            ),
        }
    }
}

/// `L_delta(a)`: quadratic inside `|a| <= delta`, linear outside.
pub fn huber(a: f64, delta: f64) -> f64 {
    if a.abs() <= delta {
        0.5 * a * a
    } else {
        delta * (a.abs() - 0.5 * delta)
    }
}

/// `L'_delta(a) = min(|a|, delta) sign(a)`.
pub fn huber_slope(a: f64, delta: f64) -> f64 {
    a.abs().min(delta).copysign(a)
}

/// Numerically stable `log(1 + e^u)`.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

pub fn sigmoid(u: f64) -> f64 {
    let u = u.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-u).exp())
}

pub(crate) fn logistic_weight(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn single(x: &[f64], y: f64) -> Dataset {
        Dataset::new(DMatrix::from_row_slice(1, x.len(), x), DVector::from_element(1, y)).unwrap()
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(1.0, 2.0), 0.5);
        assert_eq!(huber(3.0, 2.0), 4.0);
        assert_eq!(huber(-3.0, 2.0), 4.0);
        assert_eq!(huber_slope(3.0, 2.0), 2.0);
        assert_eq!(huber_slope(-0.5, 2.0), -0.5);
    }

    #[test]
    fn linear_single_sample() {
        let d = single(&[1.0, 0.0], 2.0);
        let m = Model::new(Family::Linear, &d).unwrap();
        let theta = DVector::zeros(2);
        let b = Batch::full(1);
        assert_eq!(m.loss(&theta, &b).unwrap(), 2.0);
        assert_eq!(m.gradient(&theta, &b).unwrap(), DVector::from_column_slice(&[-2.0, 0.0]));
    }

    #[test]
    fn huber_gradient_in_linear_tail() {
        let d = single(&[1.0, 0.0], 3.0);
        let m = Model::new(Family::Huber { delta: 2.0 }, &d).unwrap();
        let g = m.gradient(&DVector::zeros(2), &Batch::full(1)).unwrap();
        assert_eq!(g, DVector::from_column_slice(&[-2.0, 0.0]));
        // central-difference slope of L_delta at a = 3
        let h = 1e-6;
        let fd = (huber(3.0 + h, 2.0) - huber(3.0 - h, 2.0)) / (2.0 * h);
        assert_relative_eq!(fd, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let d = Dataset::new(x, DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let m = Model::new(Family::Logistic, &d).unwrap();
        let g = m.gradient(&DVector::zeros(2), &Batch::full(2)).unwrap();
        // mean of -(y - 0.5) x
        let expect = DVector::from_column_slice(&[(-0.5 * 1.0 + 0.5 * -1.0) / 2.0, (-0.5 * 2.0 + 0.5 * 0.5) / 2.0]);
        assert_relative_eq!(g, expect, epsilon = 1e-15);
    }

    #[test]
    fn hessian_weights_values() {
        let d = single(&[1.0], 1.0);
        let m = Model::new(Family::Logistic, &d).unwrap();
        let b = Batch::full(1);
        let w0 = m.hessian_weights(&DVector::from_element(1, 0.0), &b).unwrap();
        assert_eq!(w0[0], 0.25);
        let w = m.hessian_weights(&DVector::from_element(1, 3f64.ln()), &b).unwrap();
        assert_relative_eq!(w[0], 3.0 / 16.0, epsilon = 1e-15);
        let big = m.hessian_weights(&DVector::from_element(1, 1e6), &b).unwrap();
        assert!(big[0] > 0.0 && big[0] < 1e-12);
        let lin = Model::new(Family::Linear, &d).unwrap();
        assert!(lin.hessian_weights(&DVector::zeros(1), &b).is_err());
    }

    #[test]
    fn model_validation() {
        let d = single(&[1.0], 0.5);
        assert!(Model::new(Family::Logistic, &d).is_err());
        assert!(Model::new(Family::Huber { delta: 0.0 }, &d).is_err());
        assert!(Model::new(Family::Matrix, &d).is_err());
        let m = Model::new(Family::Linear, &d).unwrap();
        assert!(m.loss(&DVector::zeros(2), &Batch::full(1)).is_err());
        assert!(Batch::new(vec![], 3).is_err());
        assert!(Batch::new(vec![0, 0], 3).is_err());
        assert!(Batch::new(vec![3], 3).is_err());
    }

    #[test]
    fn full_batch_loss_is_mean_of_singles() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(40, |_, _| rng.random_range(-2.0..2.0));
        let d = Dataset::new(x, y).unwrap();
        let theta = DVector::from_column_slice(&[0.3, -1.0, 2.0]);
        for fam in [Family::Linear, Family::Huber { delta: 0.7 }] {
            let m = Model::new(fam, &d).unwrap();
            let full = m.loss(&theta, &Batch::full(40)).unwrap();
            let mean: f64 = (0..40)
                .map(|i| m.loss(&theta, &Batch::new(vec![i], 40).unwrap()).unwrap())
                .sum::<f64>()
                / 40.0;
            assert_relative_eq!(full, mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_header_is_optional_and_errors_are_reported() {
        let with = "a,b,y\n1,2,3\n4,5,6\n";
        let without = "1,2,3\n4,5,6\n";
        let a = Dataset::read_csv(with.as_bytes(), None).unwrap();
        let b = Dataset::read_csv(without.as_bytes(), None).unwrap();
        assert_eq!(a.covariates(), b.covariates());
        assert_eq!(a.responses(), &DVector::from_column_slice(&[3.0, 6.0]));
        assert!(matches!(
            Dataset::read_csv("1,2,3\n4,x,6\n".as_bytes(), None),
            Err(Error::MalformedCsv { line: 2, .. })
        ));
        assert!(Dataset::read_csv("1,2,3\n4,5\n".as_bytes(), None).is_err());
        let m = Dataset::read_csv("1,2,3,4,9\n".as_bytes(), Some(Shape::Matrix { rows: 2, cols: 2 }))
            .unwrap();
        assert_eq!(m.dim(), 4);
    }

    #[test]
    fn csv_round_trip() {
        let x = DMatrix::from_row_slice(2, 2, &[0.1, -2.5e-7, 3.0, 1.0 / 3.0]);
        let d = Dataset::new(x, DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.covariates(), d.covariates());
        assert_eq!(back.responses(), d.responses());
    }
}
