//! Proximal maps of minibatch losses.
//!
//! Every solver here returns `argmin_theta g(theta) + (rho / 2) ||theta - v||^2`
//! where `g` is the mean batch loss and `v` is the anchor, normally the
//! projection of the previous iterate.
//!
//! * quadratic families: closed form, with the Woodbury form when `b < p`;
//! * logistic: damped Newton with Armijo backtracking;
//! * Huber: gradient descent with Barzilai-Borwein trial steps and Armijo
//!   backtracking (or a fixed step when backtracking is switched off).

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};
use crate::models::{logistic_weight, BatchData, Batch, Family, Model};

/// Maximum number of step halvings in one line search.
pub const MAX_HALVINGS: usize = 50;

/// Controls for the iterative inner solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerControls {
    /// Maximum inner iterations `S`.
    pub max_iter: usize,
    /// Stop once the surrogate gradient norm is at most this.
    pub tol: f64,
    /// Initial (or fixed) step `eta`.
    pub step: f64,
    /// Armijo shrink factor.
    pub shrink: f64,
    /// Armijo sufficient-decrease slope.
    pub slope: f64,
    /// When false the Huber solver takes fixed steps of size `step`.
    pub backtracking: bool,
}

impl Default for InnerControls {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            step: 1.0,
            shrink: 0.5,
            slope: 1e-4,
            backtracking: true,
        }
    }
}

impl InnerControls {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(invalid("inner iteration cap must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("inner tolerance must be positive"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("inner step must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("Armijo shrink must lie in (0, 1)"));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(invalid("Armijo slope must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One proximal evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ProxProblem<'a> {
    pub model: Model<'a>,
    pub batch: &'a Batch,
    pub anchor: &'a DVector<f64>,
    pub rho: f64,
    /// Starting point for iterative solvers; the anchor when `None`.
    pub start: Option<&'a DVector<f64>>,
    pub controls: InnerControls,
}

impl<'a> ProxProblem<'a> {
    pub fn new(model: Model<'a>, batch: &'a Batch, anchor: &'a DVector<f64>, rho: f64) -> Self {
        Self {
            model,
            batch,
            anchor,
            rho,
            start: None,
            controls: InnerControls::default(),
        }
    }

    pub fn with_start(mut self, start: &'a DVector<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_controls(mut self, controls: InnerControls) -> Self {
        self.controls = controls;
        self
    }

    fn validate(&self) -> Result<()> {
        check_dim(self.model.dim(), self.anchor.len())?;
        if let Some(s) = self.start {
            check_dim(self.model.dim(), s.len())?;
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("penalty must be positive and finite, got {}", self.rho)));
        }
        if self.batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        if self.batch.indices().last().is_some_and(|&i| i >= self.model.data().n()) {
            return Err(invalid("batch index out of range"));
        }
        self.controls.validate()
    }

    /// `g(theta) + (rho / 2) ||theta - v||^2`.
    pub fn surrogate(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.model.dim(), theta.len())?;
        let bd = self.model.batch_data(self.batch);
        Ok(surrogate_on(&self.model, &bd, self.anchor, self.rho, theta))
    }

    /// `grad g(theta) + rho (theta - v)`.
    pub fn surrogate_gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.model.dim(), theta.len())?;
        let bd = self.model.batch_data(self.batch);
        Ok(self.model.gradient_on(&bd, theta) + (theta - self.anchor) * self.rho)
    }
}

/// Result of a prox evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutcome {
    pub theta: DVector<f64>,
    /// Inner iterations taken (0 for closed forms).
    pub iterations: usize,
    /// Surrogate gradient norm at `theta` (0 for closed forms).
    pub residual: f64,
    /// A line search ran out of halvings; `theta` is the last accepted iterate.
    pub line_search_failed: bool,
}

impl ProxOutcome {
    fn exact(theta: DVector<f64>) -> Self {
        Self { theta, iterations: 0, residual: 0.0, line_search_failed: false }
    }
}

/// Evaluate the prox with the strategy for the model's family.
pub fn solve(problem: &ProxProblem) -> Result<ProxOutcome> {
    match problem.model.family() {
        Family::Linear | Family::Matrix => prox_linear(problem).map(ProxOutcome::exact),
        Family::Logistic => prox_newton_logistic(problem),
        Family::Huber { .. } => prox_gd_huber(problem),
    }
}

fn surrogate_on(model: &Model, bd: &BatchData, anchor: &DVector<f64>, rho: f64, theta: &DVector<f64>) -> f64 {
    model.loss_on(bd, theta) + 0.5 * rho * (theta - anchor).norm_squared()
}

/// Closed-form prox for the quadratic families.
pub fn prox_linear(problem: &ProxProblem) -> Result<DVector<f64>> {
    problem.validate()?;
    if !problem.model.family().is_quadratic() {
        return Err(invalid(format!(
            "closed-form prox needs a least-squares family, not {}",
            problem.model.family().name()
        )));
    }
    let bd = problem.model.batch_data(problem.batch);
    if bd.full {
        return Ok(linear_full_batch(problem));
    }
    if bd.b() < problem.model.dim() {
        linear_woodbury(&bd.x, &bd.y, problem.anchor, problem.rho)
    } else {
        linear_direct(&bd.x, &bd.y, problem.anchor, problem.rho)
    }
}

/// `(b rho I + X^T X)^{-1} [b rho v + X^T y]`.
pub fn linear_direct(x: &DMatrix<f64>, y: &DVector<f64>, anchor: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    let brho = x.nrows() as f64 * rho;
    let mut lhs = x.tr_mul(x);
    for i in 0..lhs.nrows() {
        lhs[(i, i)] += brho;
    }
    let rhs = anchor * brho + x.tr_mul(y);
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::Numerical("prox system (b rho I + X^T X) is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// `[I - X^T (b rho I_b + X X^T)^{-1} X] [v + (b rho)^{-1} X^T y]`.
pub fn linear_woodbury(x: &DMatrix<f64>, y: &DVector<f64>, anchor: &DVector<f64>, rho: f64) -> Result<DVector<f64>> {
    let brho = x.nrows() as f64 * rho;
    let w = anchor + x.tr_mul(y) / brho;
    let mut inner = x * x.transpose();
    for i in 0..inner.nrows() {
        inner[(i, i)] += brho;
    }
    let chol = inner
        .cholesky()
        .ok_or_else(|| Error::Numerical("Woodbury system (b rho I + X X^T) is singular".into()))?;
    let s = chol.solve(&(x * &w));
    Ok(w - x.tr_mul(&s))
}

// Full batch: reuse the cached eigendecomposition of X^T X.
fn linear_full_batch(problem: &ProxProblem) -> DVector<f64> {
    let data = problem.model.data();
    let gram = data.gram();
    let nrho = data.n() as f64 * problem.rho;
    let rhs = problem.anchor * nrho + &gram.xty;
    let q = &gram.eigen.eigenvectors;
    let mut coef = q.tr_mul(&rhs);
    for (c, lambda) in coef.iter_mut().zip(gram.eigen.eigenvalues.iter()) {
        *c /= lambda.max(0.0) + nrho;
    }
    q * coef
}

fn scale_rows(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (mut row, wi) in out.row_iter_mut().zip(w.iter()) {
        row *= *wi;
    }
    out
}

/// Newton direction `[rho I + X^T W X / b]^{-1} grad`.
fn newton_direction(x: &DMatrix<f64>, w: &DVector<f64>, rho: f64, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let b = x.nrows();
    let p = x.ncols();
    if b < p {
        // rho^{-1} [I - X^T (b rho I_b + W X X^T)^{-1} W X] grad
        let mut inner = scale_rows(&(x * x.transpose()), w);
        for i in 0..b {
            inner[(i, i)] += b as f64 * rho;
        }
        let t = (x * grad).component_mul(w);
        let s = inner
            .lu()
            .solve(&t)
            .ok_or_else(|| Error::Numerical("singular Woodbury system in Newton step".into()))?;
        Ok((grad - x.tr_mul(&s)) / rho)
    } else {
        let mut h = x.tr_mul(&scale_rows(x, w)) / b as f64;
        for i in 0..p {
            h[(i, i)] += rho;
        }
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Numerical("Newton system is not positive definite".into()))?;
        Ok(chol.solve(grad))
    }
}

/// Newton iteration for the logistic prox, started at `problem.start`.
pub fn prox_newton_logistic(problem: &ProxProblem) -> Result<ProxOutcome> {
    problem.validate()?;
    if problem.model.family() != Family::Logistic {
        return Err(invalid("Newton prox solver needs the logistic family"));
    }
    let model = &problem.model;
    let bd = model.batch_data(problem.batch);
    let (rho, anchor, ctl) = (problem.rho, problem.anchor, problem.controls);
    let b = bd.b() as f64;

    let mut beta = problem.start.unwrap_or(anchor).clone();
    let mut value = surrogate_on(model, &bd, anchor, rho, &beta);
    let mut failed = false;
    let mut iterations = 0;
    let mut residual;
    loop {
        let u = &*bd.x * &beta;
        let psi = model.scores(&u, &bd.y);
        let grad = bd.x.tr_mul(&psi) * (-1.0 / b) + (&beta - anchor) * rho;
        residual = grad.norm();
        if residual <= ctl.tol || iterations == ctl.max_iter || failed {
            break;
        }
        let w = u.map(logistic_weight);
        let dir = newton_direction(&bd.x, &w, rho, &grad)?;
        let decrease = grad.dot(&dir);
        match armijo(ctl, decrease, value, |eta| {
            let cand = &beta - &dir * eta;
            let v = surrogate_on(model, &bd, anchor, rho, &cand);
            (cand, v)
        }) {
            Some((cand, v)) => {
                beta = cand;
                value = v;
            }
            None => failed = true,
        }
        iterations += 1;
    }
    Ok(ProxOutcome { theta: beta, iterations, residual, line_search_failed: failed })
}

/// Gradient descent for the Huber prox.
pub fn prox_gd_huber(problem: &ProxProblem) -> Result<ProxOutcome> {
    problem.validate()?;
    if !matches!(problem.model.family(), Family::Huber { .. }) {
        return Err(invalid("gradient-descent prox solver needs the Huber family"));
    }
    let model = &problem.model;
    let bd = model.batch_data(problem.batch);
    let (rho, anchor, ctl) = (problem.rho, problem.anchor, problem.controls);
    let b = bd.b() as f64;
    let grad_at = |beta: &DVector<f64>| {
        let u = &*bd.x * beta;
        bd.x.tr_mul(&model.scores(&u, &bd.y)) * (-1.0 / b) + (beta - anchor) * rho
    };

    let mut beta = problem.start.unwrap_or(anchor).clone();
    let mut value = surrogate_on(model, &bd, anchor, rho, &beta);
    let mut grad = grad_at(&beta);
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut failed = false;
    let mut iterations = 0;
    while grad.norm() > ctl.tol && iterations < ctl.max_iter && !failed {
        if !ctl.backtracking {
            beta -= &grad * ctl.step;
            grad = grad_at(&beta);
            iterations += 1;
            continue;
        }
        // Surrogate curvature is at least rho, so no useful step exceeds 1/rho.
        let mut trial = ctl.step.min(1.0 / rho);
        if let Some((ref s, ref yv)) = prev {
            let sy = s.dot(yv);
            if sy > 0.0 {
                trial = (s.norm_squared() / sy).min(1.0 / rho);
            }
        }
        let decrease = grad.norm_squared();
        let ctl_trial = InnerControls { step: trial, ..ctl };
        match armijo(ctl_trial, decrease, value, |eta| {
            let cand = &beta - &grad * eta;
            let v = surrogate_on(model, &bd, anchor, rho, &cand);
            (cand, v)
        }) {
            Some((cand, v)) => {
                let new_grad = grad_at(&cand);
                prev = Some((&cand - &beta, &new_grad - &grad));
                beta = cand;
                grad = new_grad;
                value = v;
            }
            None => failed = true,
        }
        iterations += 1;
    }
    let residual = grad.norm();
    Ok(ProxOutcome { theta: beta, iterations, residual, line_search_failed: failed })
}

/// Backtracking on `phi(eta) <= phi(0) - slope * eta * decrease`.
fn armijo<F>(ctl: InnerControls, decrease: f64, value: f64, mut eval: F) -> Option<(DVector<f64>, f64)>
where
    F: FnMut(f64) -> (DVector<f64>, f64),
{
    // Near the minimizer the predicted decrease drops below the rounding error
    // of the surrogate itself; without this allowance Armijo rejects good
    // steps and the solver creeps towards its iteration cap.
    let noise = 8.0 * f64::EPSILON * value.abs();
    let mut eta = ctl.step;
    for _ in 0..=MAX_HALVINGS {
        let (cand, v) = eval(eta);
        if v <= value - ctl.slope * eta * decrease + noise {
            return Some((cand, v));
        }
        eta *= ctl.shrink;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Dataset;
    use approx::assert_relative_eq;

    fn data(x: &[f64], rows: usize, y: &[f64]) -> Dataset {
        let cols = x.len() / rows;
        Dataset::new(DMatrix::from_row_slice(rows, cols, x), DVector::from_column_slice(y)).unwrap()
    }

    // Brute-force root of a monotone scalar function.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f(hi) > 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn linear_single_sample_closed_form() {
        // (I + x x^T) theta = x y with x = (1, 0), y = 3
        let d = data(&[1.0, 0.0], 1, &[3.0]);
        let m = Model::new(Family::Linear, &d).unwrap();
        let batch = Batch::new(vec![0], 1).unwrap();
        let v = DVector::zeros(2);
        let out = prox_linear(&ProxProblem::new(m, &batch, &v, 1.0)).unwrap();
        assert_relative_eq!(out, DVector::from_column_slice(&[1.5, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn zero_covariates_return_anchor() {
        let d = data(&[0.0; 6], 2, &[1.0, -4.0]);
        let m = Model::new(Family::Linear, &d).unwrap();
        let batch = Batch::new(vec![1], 2).unwrap();
        let v = DVector::from_column_slice(&[0.2, -0.7, 3.0]);
        let out = prox_linear(&ProxProblem::new(m, &batch, &v, 0.3)).unwrap();
        assert_relative_eq!(out, v, epsilon = 1e-15);
    }

    #[test]
    fn huge_penalty_contracts_to_anchor() {
        let d = data(&[1.0, 2.0, -1.0, 0.5, 0.3, 0.9], 3, &[1.0, 0.0, 1.0]);
        let v = DVector::from_column_slice(&[0.4, -0.2]);
        let start = DVector::from_column_slice(&[3.0, 3.0]);
        let batch = Batch::full(3);
        for fam in [Family::Linear, Family::Logistic, Family::Huber { delta: 0.5 }] {
            let m = Model::new(fam, &d).unwrap();
            let out = solve(&ProxProblem::new(m, &batch, &v, 1e12).with_start(&start)).unwrap();
            assert!((out.theta - &v).norm() < 1e-6, "{}", fam.name());
        }
    }

    #[test]
    fn logistic_scalar_stationarity() {
        // sigmoid(t) - 1 + t = 0
        let d = data(&[1.0], 1, &[1.0]);
        let m = Model::new(Family::Logistic, &d).unwrap();
        let batch = Batch::full(1);
        let v = DVector::zeros(1);
        let out = prox_newton_logistic(&ProxProblem::new(m, &batch, &v, 1.0)).unwrap();
        let root = bisect(|t| 1.0 / (1.0 + (-t).exp()) - 1.0 + t, -5.0, 5.0);
        assert_relative_eq!(out.theta[0], root, epsilon = 1e-9);
        assert!((root - 0.40106).abs() < 1e-5);
        assert!(out.residual <= 1e-8 && !out.line_search_failed);
    }

    #[test]
    fn huber_scalar_tail_solution() {
        // -delta + rho theta = 0 while the residual stays above delta
        let d = data(&[1.0], 1, &[10.0]);
        let m = Model::new(Family::Huber { delta: 2.0 }, &d).unwrap();
        let batch = Batch::full(1);
        let v = DVector::zeros(1);
        let out = prox_gd_huber(&ProxProblem::new(m, &batch, &v, 1.0)).unwrap();
        assert_relative_eq!(out.theta[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn huber_with_small_residuals_matches_linear() {
        let x = [0.5, -0.2, 0.1, 0.3, 0.4, -0.6, -0.1, 0.2, 0.7, 0.05, -0.3, 0.2];
        let y = [0.1, -0.2, 0.05, 0.15];
        let d = data(&x, 4, &y);
        let batch = Batch::new(vec![0, 2, 3], 4).unwrap();
        let v = DVector::from_column_slice(&[0.1, 0.0, -0.1]);
        let lin = Model::new(Family::Linear, &d).unwrap();
        let hub = Model::new(Family::Huber { delta: 10.0 }, &d).unwrap();
        let a = prox_linear(&ProxProblem::new(lin, &batch, &v, 0.5)).unwrap();
        let b = prox_gd_huber(&ProxProblem::new(hub, &batch, &v, 0.5)).unwrap();
        assert!((a - b.theta).norm() < 1e-6);
    }

    #[test]
    fn fixed_step_huber_still_converges() {
        let d = data(&[1.0, 0.5, -0.5, 1.0], 2, &[2.0, -1.0]);
        let m = Model::new(Family::Huber { delta: 1.0 }, &d).unwrap();
        let batch = Batch::full(2);
        let v = DVector::zeros(2);
        let ctl = InnerControls { backtracking: false, step: 0.4, max_iter: 2000, ..Default::default() };
        let out = prox_gd_huber(&ProxProblem::new(m, &batch, &v, 1.0).with_controls(ctl)).unwrap();
        assert!(out.residual <= 1e-8);
    }

    #[test]
    fn wrong_family_and_bad_parameters_are_rejected() {
        let d = data(&[1.0, 2.0], 1, &[1.0]);
        let v = DVector::zeros(2);
        let batch = Batch::full(1);
        let lin = Model::new(Family::Linear, &d).unwrap();
        assert!(prox_newton_logistic(&ProxProblem::new(lin, &batch, &v, 1.0)).is_err());
        assert!(prox_gd_huber(&ProxProblem::new(lin, &batch, &v, 1.0)).is_err());
        assert!(prox_linear(&ProxProblem::new(lin, &batch, &v, 0.0)).is_err());
        let short = DVector::zeros(1);
        assert!(prox_linear(&ProxProblem::new(lin, &batch, &short, 1.0)).is_err());
        let log = Model::new(Family::Logistic, &d).unwrap();
        assert!(prox_linear(&ProxProblem::new(log, &batch, &v, 1.0)).is_err());
        let bad = InnerControls { shrink: 1.5, ..Default::default() };
        assert!(solve(&ProxProblem::new(log, &batch, &v, 1.0).with_controls(bad)).is_err());
    }
}
