//! Weibull accelerated-failure-time regression, `log T = βᵀx + σε` with
//! standard extreme-value `ε`, fit by right-censored maximum likelihood.
//!
//! The optimizer works on `(β, log σ)` with Newton steps (gradient ascent
//! when the Hessian is not negative definite) and a backtracking line search
//! that never accepts a decrease in log-likelihood.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::models::SurvivalModel;

pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    /// Intercept first, then one coefficient per covariate (log-time units).
    pub beta: Vec<f64>,
    /// Extreme-value scale.
    pub sigma: f64,
    pub converged: bool,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

struct Problem {
    /// `[n × (p + 1)]` with a leading column of ones.
    design: DMatrix<f64>,
    log_y: DVector<f64>,
    event: DVector<f64>,
}

struct Eval {
    ll: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Problem {
    fn new(x: ArrayView2<f64>, y: &[f64], event: impl Iterator<Item = bool>) -> Self {
        let (n, p) = x.dim();
        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
        Problem {
            design,
            log_y: DVector::from_iterator(n, y.iter().map(|v| v.ln())),
            event: DVector::from_iterator(n, event.map(|e| if e { 1.0 } else { 0.0 })),
        }
    }

    fn dim(&self) -> usize {
        self.design.ncols() + 1
    }

    fn log_likelihood(&self, theta: &DVector<f64>) -> f64 {
        let k = self.design.ncols();
        let beta = theta.rows(0, k);
        let log_sigma = theta[k];
        let sigma = log_sigma.exp();
        let eta = &self.design * beta;
        let mut ll = 0.0;
        for i in 0..self.log_y.len() {
            let z = (self.log_y[i] - eta[i]) / sigma;
            ll += self.event[i] * (z - log_sigma) - z.exp();
        }
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    fn evaluate(&self, theta: &DVector<f64>) -> Eval {
        let k = self.design.ncols();
        let beta = theta.rows(0, k);
        let log_sigma = theta[k];
        let sigma = log_sigma.exp();
        let eta = &self.design * beta;
        let mut ll = 0.0;
        let mut grad = DVector::zeros(k + 1);
        let mut hess = DMatrix::zeros(k + 1, k + 1);
        for i in 0..self.log_y.len() {
            let d = self.event[i];
            let z = (self.log_y[i] - eta[i]) / sigma;
            let ez = z.exp();
            ll += d * (z - log_sigma) - ez;
            let x = self.design.row(i);
            // ∂ℓ/∂β = (e^z − δ) x / σ ; ∂ℓ/∂s = (e^z − δ) z − δ
            let gb = (ez - d) / sigma;
            for a in 0..k {
                grad[a] += gb * x[a];
            }
            grad[k] += (ez - d) * z - d;
            // second derivatives
            let hbb = -ez / (sigma * sigma);
            let hbs = -(ez * z + ez - d) / sigma;
            for a in 0..k {
                for b in 0..=a {
                    hess[(a, b)] += hbb * x[a] * x[b];
                }
                hess[(k, a)] += hbs * x[a];
            }
            hess[(k, k)] += -(ez * z * z + (ez - d) * z);
        }
        for a in 0..=k {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        Eval { ll, grad, hess }
    }

    fn start(&self) -> DVector<f64> {
        let k = self.design.ncols();
        let rows: Vec<usize> = (0..self.event.len()).filter(|&i| self.event[i] > 0.0).collect();
        // Least squares of log y on x over events; fall back to all records
        // when events cannot identify the coefficients.
        let fit = |idx: &[usize]| -> Option<DVector<f64>> {
            let a = self.design.select_rows(idx);
            let b = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.log_y[i]));
            let ata = a.transpose() * &a;
            let atb = a.transpose() * b;
            ata.cholesky().map(|c| c.solve(&atb))
        };
        let all: Vec<usize> = (0..self.event.len()).collect();
        let beta = fit(&rows)
            .or_else(|| fit(&all))
            .unwrap_or_else(|| DVector::zeros(k));
        let mut theta = DVector::zeros(k + 1);
        theta.rows_mut(0, k).copy_from(&beta);
        theta
    }
}

fn check_rank(design: &DMatrix<f64>) -> Result<()> {
    let sv = design.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= max * 1e-10 {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (singular values {min:.3e} .. {max:.3e})"
        )));
    }
    Ok(())
}

fn maximize(problem: &Problem) -> (WeibullModel, Vec<f64>) {
    let k = problem.design.ncols();
    let mut theta = problem.start();
    let mut eval = problem.evaluate(&theta);
    if !eval.ll.is_finite() {
        // Start from the intercept-only point when the least-squares start
        // overflows.
        theta.fill(0.0);
        theta[0] = problem.log_y.mean();
        eval = problem.evaluate(&theta);
    }
    let mut iterations = 0;
    let mut path = vec![eval.ll];
    let mut converged = eval.grad.norm() < GRADIENT_TOLERANCE;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let neg_h = -&eval.hess;
        let direction = match neg_h.clone().cholesky() {
            Some(c) => c.solve(&eval.grad),
            None => eval.grad.clone(),
        };
        let slope = eval.grad.dot(&direction);
        // Once the predicted gain is below the rounding level of the summed
        // log-likelihood, accept non-decreasing steps up to that rounding.
        let noise = 1e-12 * (1.0 + eval.ll.abs());
        let in_noise = slope < noise;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &theta + &direction * step;
            let ll = problem.log_likelihood(&trial);
            let sufficient = ll >= eval.ll + 1e-4 * step * slope;
            if ll.is_finite() && (sufficient || (in_noise && ll >= eval.ll - noise)) {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some(t) => {
                theta = t;
                eval = problem.evaluate(&theta);
                path.push(eval.ll);
            }
            None => break,
        }
        converged = eval.grad.norm() < GRADIENT_TOLERANCE;
    }
    let model = WeibullModel {
        beta: theta.rows(0, k).iter().copied().collect(),
        sigma: theta[k].exp(),
        converged,
        log_likelihood: eval.ll,
        iterations,
        gradient_norm: eval.grad.norm(),
    };
    (model, path)
}

fn fit_events(x: ArrayView2<f64>, y: &[f64], event: impl Iterator<Item = bool>) -> Result<WeibullModel> {
    fit_events_traced(x, y, event).map(|(m, _)| m)
}

fn fit_events_traced(
    x: ArrayView2<f64>,
    y: &[f64],
    event: impl Iterator<Item = bool>,
) -> Result<(WeibullModel, Vec<f64>)> {
    let problem = Problem::new(x, y, event);
    if problem.event.sum() == 0.0 {
        return Err(Error::Fit("no events to fit".into()));
    }
    check_rank(&problem.design)?;
    debug_assert_eq!(problem.dim(), x.ncols() + 2);
    Ok(maximize(&problem))
}

/// Censored maximum-likelihood fit; `delta = 1` are events.
pub fn fit_weibull(dataset: &Dataset) -> Result<WeibullModel> {
    if dataset.mode() != Mode::Noncompeting {
        return Err(Error::ModeMismatch {
            model: Mode::Noncompeting.to_string(),
            data: dataset.mode().to_string(),
        });
    }
    fit_weibull_cause(dataset, 1)
}

/// Fit treating `delta = cause` as events and everything else as censored.
pub fn fit_weibull_cause(dataset: &Dataset, cause: u8) -> Result<WeibullModel> {
    let x = dataset.covariates();
    let y = dataset.times();
    fit_events(x.view(), &y, dataset.records().iter().map(|r| r.delta == cause))
        .map_err(|e| match e {
            Error::Fit(msg) => Error::Fit(format!("cause {cause}: {msg}")),
            other => other,
        })
}

/// One cause-specific fit per cause; each entry fails independently.
pub fn fit_cause_specific_weibull(dataset: &Dataset) -> [Result<WeibullModel>; 2] {
    [fit_weibull_cause(dataset, 1), fit_weibull_cause(dataset, 2)]
}

/// Log-likelihood and its gradient in `(β, log σ)` at the given model.
pub fn score(model: &WeibullModel, x: ArrayView2<f64>, y: &[f64], delta: &[u8], cause: u8) -> (f64, Vec<f64>) {
    let problem = Problem::new(x, y, delta.iter().map(|&d| d == cause));
    let mut theta: Vec<f64> = model.beta.clone();
    theta.push(model.sigma.ln());
    let e = problem.evaluate(&DVector::from_vec(theta));
    (e.ll, e.grad.iter().copied().collect())
}

/// `exp(β̂ᵀx)` per row; not clipped.
pub fn predict_weibull(model: &WeibullModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() + 1 != model.beta.len() {
        return Err(Error::Shape(format!(
            "covariate matrix has {} columns, model has {}",
            x.ncols(),
            model.beta.len() - 1
        )));
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let eta = model.beta[0]
                + row.iter().zip(&model.beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            eta.exp()
        })
        .collect())
}

impl SurvivalModel for WeibullModel {
    fn mode(&self) -> Mode {
        Mode::Noncompeting
    }

    fn covariate_width(&self) -> usize {
        self.beta.len() - 1
    }

    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        Ok(vec![predict_weibull(self, x)?])
    }

    fn sample_all(&self, x: ArrayView2<f64>, _rng: &mut crate::rng::SeededRng) -> Result<Vec<Vec<f64>>> {
        self.predict_all(x)
    }
}

/// Pair of cause-specific fits used as a competing-risks predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrWeibullModel {
    pub cause1: WeibullModel,
    pub cause2: WeibullModel,
}

impl CrWeibullModel {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        let [a, b] = fit_cause_specific_weibull(dataset);
        Ok(CrWeibullModel {
            cause1: a?,
            cause2: b?,
        })
    }
}

impl SurvivalModel for CrWeibullModel {
    fn mode(&self) -> Mode {
        Mode::Competing
    }

    fn covariate_width(&self) -> usize {
        self.cause1.beta.len() - 1
    }

    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        Ok(vec![predict_weibull(&self.cause1, x)?, predict_weibull(&self.cause2, x)?])
    }

    fn sample_all(&self, x: ArrayView2<f64>, _rng: &mut crate::rng::SeededRng) -> Result<Vec<Vec<f64>>> {
        self.predict_all(x)
    }
}
