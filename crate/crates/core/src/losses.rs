//! Training objectives over predicted event times.
//!
//! Every loss comes in two forms: a value-only function matching the
//! published expression, and a `*_grad` variant that also returns the
//! gradient with respect to the predictions. The network layer turns that
//! gradient into parameter updates.
//!
//! Losses are plain sums over records (no `1/n` normalisation); the rank terms
//! are averages over comparable pairs.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the single-risk loss: `λ₁` scales the penalty for predicting
/// before a censoring time, `λ₂` the ranking term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2]
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Weights of the competing-risks loss.
///
/// * `lambda0`: either prediction falls before a censoring time
/// * `lambda1`: cause-1 event but the cause-2 prediction is earlier
/// * `lambda2`: cause-2 event but the cause-1 prediction is earlier
/// * `lambda3`, `lambda4`: ranking terms for cause 1 and cause 2
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrLossParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl Default for CrLossParams {
    fn default() -> Self {
        CrLossParams {
            lambda0: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 1.0,
        }
    }
}

impl CrLossParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda0,
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.lambda4,
        ];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Index pairs `(i, j)` with `y[i] < y[j]` and `delta[i]` equal to the event
/// of interest: the pairs whose true ordering is known under censoring.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComparablePairs {
    pairs: Vec<(usize, usize)>,
}

impl ComparablePairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

fn check_len(name: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{name}: length {b} does not match {a}")));
    }
    Ok(())
}

fn check_finite(yhat: &[f64]) -> Result<()> {
    if let Some(i) = yhat.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("non-finite prediction at index {i}")));
    }
    Ok(())
}

pub fn comparable_pairs(y: &[f64], delta: &[u8], event_of_interest: u8) -> Result<ComparablePairs> {
    check_len("delta", y.len(), delta.len())?;
    let mut pairs = Vec::new();
    for (i, (&yi, &di)) in y.iter().zip(delta).enumerate() {
        if di != event_of_interest {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yi < yj {
                pairs.push((i, j));
            }
        }
    }
    Ok(ComparablePairs { pairs })
}

/// `log σ(z)` without overflow.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `σ(z)`, stable for large `|z|`.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smooth lower bound of the C-index on a fixed pair set, with its gradient.
/// `None` when the pair set is empty.
pub fn cstar_on_pairs(pairs: &ComparablePairs, yhat: &[f64]) -> Option<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return None;
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; yhat.len()];
    for (i, j) in pairs.iter() {
        let d = yhat[j] - yhat[i];
        value += 1.0 + log_sigmoid(d) / LN_2;
        // d/dd log σ(d) = σ(-d)
        let g = sigmoid(-d) / LN_2 * scale;
        grad[j] += g;
        grad[i] -= g;
    }
    Some((value * scale, grad))
}

pub fn cstar(y: &[f64], delta: &[u8], yhat: &[f64], event_of_interest: u8) -> Result<f64> {
    check_len("yhat", y.len(), yhat.len())?;
    check_finite(yhat)?;
    let pairs = comparable_pairs(y, delta, event_of_interest)?;
    cstar_on_pairs(&pairs, yhat)
        .map(|(v, _)| v)
        .ok_or_else(|| Error::Undefined("c* has no comparable pairs".into()))
}

fn check_single(y: &[f64], delta: &[u8], yhat: &[f64]) -> Result<()> {
    check_len("delta", y.len(), delta.len())?;
    check_len("yhat", y.len(), yhat.len())?;
    if let Some(i) = delta.iter().position(|&d| d > 1) {
        return Err(Error::Input(format!(
            "event indicator {} at index {i} is not in {{0, 1}}",
            delta[i]
        )));
    }
    check_finite(yhat)
}

/// Squared error on events plus `λ₁`-weighted squared error on censored
/// records predicted before their censoring time.
pub fn censored_mse(y: &[f64], delta: &[u8], yhat: &[f64], lambda1: f64) -> Result<f64> {
    censored_mse_grad(y, delta, yhat, lambda1).map(|(v, _)| v)
}

pub fn censored_mse_grad(
    y: &[f64],
    delta: &[u8],
    yhat: &[f64],
    lambda1: f64,
) -> Result<(f64, Vec<f64>)> {
    check_single(y, delta, yhat)?;
    let mut value = 0.0;
    let mut grad = vec![0.0; y.len()];
    for i in 0..y.len() {
        let r = yhat[i] - y[i];
        let w = match delta[i] {
            1 => 1.0,
            _ if yhat[i] < y[i] => lambda1,
            _ => 0.0,
        };
        value += w * r * r;
        grad[i] = 2.0 * w * r;
    }
    Ok((value, grad))
}

/// `censored_mse − λ₂ · c*`; the rank term is dropped when there are no
/// comparable pairs.
pub fn total_loss(y: &[f64], delta: &[u8], yhat: &[f64], params: &LossParams) -> Result<f64> {
    let pairs = comparable_pairs(y, delta, 1)?;
    total_loss_on_pairs(y, delta, yhat, params, &pairs).map(|(v, _)| v)
}

pub fn total_loss_on_pairs(
    y: &[f64],
    delta: &[u8],
    yhat: &[f64],
    params: &LossParams,
    pairs: &ComparablePairs,
) -> Result<(f64, Vec<f64>)> {
    let (mut value, mut grad) = censored_mse_grad(y, delta, yhat, params.lambda1)?;
    if params.lambda2 != 0.0 {
        if let Some((c, gc)) = cstar_on_pairs(pairs, yhat) {
            value -= params.lambda2 * c;
            grad.iter_mut()
                .zip(&gc)
                .for_each(|(g, h)| *g -= params.lambda2 * h);
        }
    }
    Ok((value, grad))
}

/// Mean over comparable pairs of `((yⱼ − yᵢ) − (ŷⱼ − ŷᵢ))²`.
pub fn rankdeepsurv_rank_loss(y: &[f64], delta: &[u8], yhat: &[f64]) -> Result<f64> {
    check_single(y, delta, yhat)?;
    let pairs = comparable_pairs(y, delta, 1)?;
    pairwise_mse_on_pairs(y, yhat, &pairs)
        .map(|(v, _)| v)
        .ok_or_else(|| Error::Undefined("pairwise MSE has no comparable pairs".into()))
}

pub fn pairwise_mse_on_pairs(
    y: &[f64],
    yhat: &[f64],
    pairs: &ComparablePairs,
) -> Option<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return None;
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; yhat.len()];
    for (i, j) in pairs.iter() {
        let r = (y[j] - y[i]) - (yhat[j] - yhat[i]);
        value += r * r;
        let g = 2.0 * r * scale;
        grad[j] -= g;
        grad[i] += g;
    }
    Some((value * scale, grad))
}

fn check_competing(y: &[f64], delta: &[u8], yhat1: &[f64], yhat2: &[f64]) -> Result<()> {
    check_len("delta", y.len(), delta.len())?;
    check_len("yhat1", y.len(), yhat1.len())?;
    check_len("yhat2", y.len(), yhat2.len())?;
    if let Some(i) = delta.iter().position(|&d| d > 2) {
        return Err(Error::Input(format!(
            "event indicator {} at index {i} is not in {{0, 1, 2}}",
            delta[i]
        )));
    }
    check_finite(yhat1)?;
    check_finite(yhat2)
}

pub fn cr_censored_mse(
    y: &[f64],
    delta: &[u8],
    yhat1: &[f64],
    yhat2: &[f64],
    params: &CrLossParams,
) -> Result<f64> {
    cr_censored_mse_grad(y, delta, yhat1, yhat2, params).map(|(v, _, _)| v)
}

/// Competing-risks squared-error loss. The cross-cause penalty measures the
/// wrongly-earlier prediction against the record's observed time.
pub fn cr_censored_mse_grad(
    y: &[f64],
    delta: &[u8],
    yhat1: &[f64],
    yhat2: &[f64],
    params: &CrLossParams,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_competing(y, delta, yhat1, yhat2)?;
    let n = y.len();
    let mut value = 0.0;
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for i in 0..n {
        let r1 = yhat1[i] - y[i];
        let r2 = yhat2[i] - y[i];
        let (w1, w2) = match delta[i] {
            1 => (
                1.0,
                if yhat2[i] < yhat1[i] { params.lambda1 } else { 0.0 },
            ),
            2 => (
                if yhat1[i] < yhat2[i] { params.lambda2 } else { 0.0 },
                1.0,
            ),
            _ => (
                if yhat1[i] < y[i] { params.lambda0 } else { 0.0 },
                if yhat2[i] < y[i] { params.lambda0 } else { 0.0 },
            ),
        };
        value += w1 * r1 * r1 + w2 * r2 * r2;
        g1[i] = 2.0 * w1 * r1;
        g2[i] = 2.0 * w2 * r2;
    }
    Ok((value, g1, g2))
}

pub fn cr_rank_loss(
    y: &[f64],
    delta: &[u8],
    yhat1: &[f64],
    yhat2: &[f64],
    params: &CrLossParams,
) -> Result<f64> {
    check_competing(y, delta, yhat1, yhat2)?;
    let p1 = comparable_pairs(y, delta, 1)?;
    let p2 = comparable_pairs(y, delta, 2)?;
    Ok(cr_rank_on_pairs(yhat1, yhat2, params, &p1, &p2).0)
}

/// `−(λ₃ c*₁ + λ₄ c*₂)` with gradients; a cause without pairs contributes 0.
pub fn cr_rank_on_pairs(
    yhat1: &[f64],
    yhat2: &[f64],
    params: &CrLossParams,
    pairs1: &ComparablePairs,
    pairs2: &ComparablePairs,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mut value = 0.0;
    let mut g1 = vec![0.0; yhat1.len()];
    let mut g2 = vec![0.0; yhat2.len()];
    for (weight, pairs, yhat, grad) in [
        (params.lambda3, pairs1, yhat1, &mut g1),
        (params.lambda4, pairs2, yhat2, &mut g2),
    ] {
        if weight == 0.0 {
            continue;
        }
        if let Some((c, gc)) = cstar_on_pairs(pairs, yhat) {
            value -= weight * c;
            grad.iter_mut().zip(&gc).for_each(|(g, h)| *g -= weight * h);
        }
    }
    (value, g1, g2)
}

pub fn cr_total_loss(
    y: &[f64],
    delta: &[u8],
    yhat1: &[f64],
    yhat2: &[f64],
    params: &CrLossParams,
) -> Result<f64> {
    Ok(cr_censored_mse(y, delta, yhat1, yhat2, params)?
        + cr_rank_loss(y, delta, yhat1, yhat2, params)?)
}

/// Single-risk training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    /// Censoring-penalised squared error minus the weighted c* term.
    Deepcent(LossParams),
    /// `α · (squared error with unit censoring penalty) + β · pairwise MSE`.
    Rankdeepsurv { alpha: f64, beta: f64 },
}

impl Default for Objective {
    fn default() -> Self {
        Objective::Deepcent(LossParams::default())
    }
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::Deepcent(p) => p.validate(),
            Objective::Rankdeepsurv { alpha, beta } => {
                if !(*alpha >= 0.0 && *beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::Config("loss weights must be finite and >= 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// A single-risk objective bound to one dataset, with its comparable pairs
/// computed once.
#[derive(Debug, Clone)]
pub struct SingleLoss {
    y: Vec<f64>,
    delta: Vec<u8>,
    pairs: ComparablePairs,
    objective: Objective,
}

impl SingleLoss {
    pub fn new(y: Vec<f64>, delta: Vec<u8>, objective: Objective) -> Result<Self> {
        objective.validate()?;
        let pairs = comparable_pairs(&y, &delta, 1)?;
        Ok(SingleLoss {
            y,
            delta,
            pairs,
            objective,
        })
    }

    pub fn pairs(&self) -> &ComparablePairs {
        &self.pairs
    }

    pub fn eval(&self, yhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.objective {
            Objective::Deepcent(p) => {
                total_loss_on_pairs(&self.y, &self.delta, yhat, &p, &self.pairs)
            }
            Objective::Rankdeepsurv { alpha, beta } => {
                let (mut value, mut grad) = censored_mse_grad(&self.y, &self.delta, yhat, 1.0)?;
                value *= alpha;
                grad.iter_mut().for_each(|g| *g *= alpha);
                if beta != 0.0 {
                    if let Some((v, g)) = pairwise_mse_on_pairs(&self.y, yhat, &self.pairs) {
                        value += beta * v;
                        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += beta * b);
                    }
                }
                Ok((value, grad))
            }
        }
    }
}

/// Competing-risks objective bound to one dataset.
#[derive(Debug, Clone)]
pub struct CompetingLoss {
    y: Vec<f64>,
    delta: Vec<u8>,
    pairs1: ComparablePairs,
    pairs2: ComparablePairs,
    params: CrLossParams,
}

impl CompetingLoss {
    pub fn new(y: Vec<f64>, delta: Vec<u8>, params: CrLossParams) -> Result<Self> {
        params.validate()?;
        let pairs1 = comparable_pairs(&y, &delta, 1)?;
        let pairs2 = comparable_pairs(&y, &delta, 2)?;
        Ok(CompetingLoss {
            y,
            delta,
            pairs1,
            pairs2,
            params,
        })
    }

    pub fn eval(&self, yhat1: &[f64], yhat2: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (mut v, mut g1, mut g2) =
            cr_censored_mse_grad(&self.y, &self.delta, yhat1, yhat2, &self.params)?;
        let (rv, r1, r2) = cr_rank_on_pairs(yhat1, yhat2, &self.params, &self.pairs1, &self.pairs2);
        v += rv;
        g1.iter_mut().zip(&r1).for_each(|(a, b)| *a += b);
        g2.iter_mut().zip(&r2).for_each(|(a, b)| *a += b);
        Ok((v, g1, g2))
    }
}
