//! Simulation generators with a quadratic log-risk and uniform censoring.
//!
//! Noncompeting: `x₁..x_m ~ U(-1, 1)`, a group indicator `x_{m+1} ~
//! Bernoulli(0.5)`, `T ~ Exp(rate)` with
//! `rate = λ · exp(Σ βₖ xₖ²)`, `T` multiplied by `κ` in the treatment group,
//! `C ~ U(0, θ)`.
//!
//! Competing: four uniforms plus the group indicator, cause-1 rate
//! `λ₁ · exp(β₁x₁² + β₂x₂² + β₃x₃²)`, cause-2 rate `λ₂ · exp(β₁x₁² + β₂x₄²)`,
//! group multiplier on `T₁` only.

use rand::Rng;

use crate::data::{Dataset, LatentTimes, Mode, SurvivalRecord};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub base_rate: f64,
    pub beta: Vec<f64>,
    pub group_multiplier: f64,
    /// Upper bound of the uniform censoring distribution; `f64::INFINITY`
    /// disables censoring.
    pub theta: f64,
    pub seed: u64,
}

impl SimConfig {
    /// `λ = 2`, `β = (5, -5, 2, -2)`, `κ = 2`.
    pub fn standard(n: usize, theta: f64, seed: u64) -> Self {
        SimConfig {
            n,
            base_rate: 2.0,
            beta: vec![5.0, -5.0, 2.0, -2.0],
            group_multiplier: 2.0,
            theta,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("sample size {} < 2", self.n)));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(Error::Config("base rate must be positive".into()));
        }
        if !(self.group_multiplier > 0.0 && self.group_multiplier.is_finite()) {
            return Err(Error::Config("group multiplier must be positive".into()));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config("theta must be positive".into()));
        }
        if self.beta.is_empty() || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta must be a non-empty finite vector".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrSimConfig {
    pub n: usize,
    pub rates: (f64, f64),
    /// `(β₁, β₂, β₃)`
    pub beta: [f64; 3],
    pub group_multiplier: f64,
    pub theta: f64,
    pub seed: u64,
}

impl CrSimConfig {
    /// `λ₁ = 2`, `λ₂ = 4`, `β = (5, -5, 2)`, `κ = 2`.
    pub fn standard(n: usize, theta: f64, seed: u64) -> Self {
        CrSimConfig {
            n,
            rates: (2.0, 4.0),
            beta: [5.0, -5.0, 2.0],
            group_multiplier: 2.0,
            theta,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("sample size {} < 2", self.n)));
        }
        let (a, b) = self.rates;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Config("both rates must be positive".into()));
        }
        if !(self.group_multiplier > 0.0 && self.group_multiplier.is_finite()) {
            return Err(Error::Config("group multiplier must be positive".into()));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config("theta must be positive".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta must be finite".into()));
        }
        Ok(())
    }
}

/// Either simulation design; used where both are handled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Noncompeting(SimConfig),
    Competing(CrSimConfig),
}

impl Design {
    pub fn theta(&self) -> f64 {
        match self {
            Design::Noncompeting(c) => c.theta,
            Design::Competing(c) => c.theta,
        }
    }

    pub fn with_theta(&self, theta: f64) -> Design {
        let mut d = self.clone();
        match &mut d {
            Design::Noncompeting(c) => c.theta = theta,
            Design::Competing(c) => c.theta = theta,
        }
        d
    }

    pub fn with_n_seed(&self, n: usize, seed: u64) -> Design {
        let mut d = self.clone();
        match &mut d {
            Design::Noncompeting(c) => {
                c.n = n;
                c.seed = seed;
            }
            Design::Competing(c) => {
                c.n = n;
                c.seed = seed;
            }
        }
        d
    }

    pub fn simulate(&self) -> Result<Dataset> {
        match self {
            Design::Noncompeting(c) => simulate_noncompeting(c),
            Design::Competing(c) => simulate_competing(c),
        }
    }

    /// Draw covariates and latent event times only, returning the earliest
    /// event time per record.
    fn earliest_event_times<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| match self {
                Design::Noncompeting(c) => draw_noncompeting(c, rng).1,
                Design::Competing(c) => {
                    let (_, t1, t2) = draw_competing(c, rng);
                    t1.min(t2)
                }
            })
            .collect()
    }
}

fn exp_draw<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

fn censor_draw<R: Rng>(theta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if theta.is_infinite() {
        f64::INFINITY
    } else {
        u * theta
    }
}

fn uniform_sym<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-1.0..1.0)
}

fn draw_noncompeting<R: Rng>(c: &SimConfig, rng: &mut R) -> (Vec<f64>, f64) {
    let m = c.beta.len();
    let mut x: Vec<f64> = (0..m).map(|_| uniform_sym(rng)).collect();
    let group = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    x.push(group);
    let lin: f64 = c.beta.iter().zip(&x).map(|(b, v)| b * v * v).sum();
    let mut t = exp_draw(c.base_rate * lin.exp(), rng);
    if group == 1.0 {
        t *= c.group_multiplier;
    }
    (x, t)
}

fn draw_competing<R: Rng>(c: &CrSimConfig, rng: &mut R) -> (Vec<f64>, f64, f64) {
    let mut x: Vec<f64> = (0..4).map(|_| uniform_sym(rng)).collect();
    let group = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
    x.push(group);
    let [b1, b2, b3] = c.beta;
    let lin1 = b1 * x[0] * x[0] + b2 * x[1] * x[1] + b3 * x[2] * x[2];
    let lin2 = b1 * x[0] * x[0] + b2 * x[3] * x[3];
    let mut t1 = exp_draw(c.rates.0 * lin1.exp(), rng);
    if group == 1.0 {
        t1 *= c.group_multiplier;
    }
    let t2 = exp_draw(c.rates.1 * lin2.exp(), rng);
    (x, t1, t2)
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

pub fn simulate_noncompeting(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let mut records = Vec::with_capacity(config.n);
    let mut latent = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let (x, t) = draw_noncompeting(config, &mut rng);
        let c = censor_draw(config.theta, &mut rng);
        let (y, delta) = if t < c { (t, 1) } else { (c, 0) };
        records.push(SurvivalRecord { x, y, delta });
        latent.push(LatentTimes {
            event: vec![t],
            censor: c,
        });
    }
    Dataset::new(records, names(config.beta.len() + 1), Mode::Noncompeting)?
        .with_true_times(latent)
}

pub fn simulate_competing(config: &CrSimConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let mut records = Vec::with_capacity(config.n);
    let mut latent = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let (x, t1, t2) = draw_competing(config, &mut rng);
        let c = censor_draw(config.theta, &mut rng);
        let (y, delta) = if t1 < t2 && t1 < c {
            (t1, 1)
        } else if t2 < c {
            (t2, 2)
        } else {
            (c, 0)
        };
        records.push(SurvivalRecord { x, y, delta });
        latent.push(LatentTimes {
            event: vec![t1, t2],
            censor: c,
        });
    }
    Dataset::new(records, names(5), Mode::Competing)?.with_true_times(latent)
}

/// Monte Carlo draws per censoring evaluation in [`calibrate_theta`].
pub const CALIBRATION_DRAWS: usize = 100_000;
const CALIBRATION_MAX_STEPS: usize = 200;

/// Find `θ` so that the censoring proportion of `design` is within
/// `tolerance` of `target`.
///
/// Latent event times and the uniform censoring quantiles are drawn once
/// (seeded from the design), so the estimated proportion is a monotone step
/// function of `θ` and bisection on `log θ` is well defined.
pub fn calibrate_theta(design: &Design, target: f64, tolerance: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("target censoring {target} outside (0, 1)")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let probe = design.with_theta(1.0).with_n_seed(2, 0);
    match &probe {
        Design::Noncompeting(c) => c.validate()?,
        Design::Competing(c) => c.validate()?,
    }
    let seed = match design {
        Design::Noncompeting(c) => c.seed,
        Design::Competing(c) => c.seed,
    };
    let mut rng = seeded(seed ^ 0xCA11_B8A7_E000_0000);
    let events = design.earliest_event_times(CALIBRATION_DRAWS, &mut rng);
    let quantiles: Vec<f64> = (0..CALIBRATION_DRAWS).map(|_| rng.random::<f64>()).collect();
    let censoring = |theta: f64| {
        let censored = events
            .iter()
            .zip(&quantiles)
            .filter(|(t, u)| *u * theta <= **t)
            .count();
        censored as f64 / CALIBRATION_DRAWS as f64
    };

    // Censoring falls as θ grows: bracket in log space.
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut steps = 0;
    while censoring(lo) < target {
        lo /= 4.0;
        steps += 1;
        if steps > 60 {
            return Err(Error::Calibration {
                lo,
                hi,
                msg: format!("target {target} unreachable at small theta"),
            });
        }
    }
    while censoring(hi) > target {
        hi *= 4.0;
        steps += 1;
        if steps > 60 {
            return Err(Error::Calibration {
                lo,
                hi,
                msg: format!("target {target} unreachable at large theta"),
            });
        }
    }
    for _ in 0..CALIBRATION_MAX_STEPS {
        let mid = (lo * hi).sqrt();
        let c = censoring(mid);
        if (c - target).abs() <= tolerance {
            return Ok(mid);
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration {
        lo,
        hi,
        msg: format!("no theta within {tolerance} of {target}"),
    })
}
