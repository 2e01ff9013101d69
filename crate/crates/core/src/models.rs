//! Trainable event-time predictors.
//!
//! [`DeepCentModel`] is a single feed-forward network with one output node.
//! [`CrDeepCentModel`] wraps a [`CrNet`]: a shared trunk whose output is
//! concatenated with the (standardised) covariates and fed to two
//! structurally independent cause-specific heads.
//!
//! Both train full-batch with the adaptive-moment optimizer. Predictions are
//! clamped below at [`MIN_PREDICTION`].

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::losses::{CompetingLoss, CrLossParams, Objective, SingleLoss};
use crate::nn::{adam_step, init_mlp_with, init_trunk_with, AdamState, ForwardCache, Gradients, Mlp};
use crate::rng::{derive_seed, seeded};

/// Lower clamp applied to every reported prediction.
pub const MIN_PREDICTION: f64 = 1e-6;

/// Per-column centring and scaling learned from training covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(p: usize) -> Self {
        Standardizer {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    /// Constant columns keep unit scale.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.width() {
            return Err(Error::Shape(format!(
                "covariate matrix has {} columns, model expects {}",
                x.ncols(),
                self.width()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepCentConfig {
    pub hidden_widths: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss: Objective,
    /// Standardise covariates with training-set mean and SD.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for DeepCentConfig {
    fn default() -> Self {
        DeepCentConfig {
            hidden_widths: vec![32, 32],
            dropout: 0.1,
            epochs: 500,
            learning_rate: 1e-2,
            loss: Objective::default(),
            standardize: true,
            seed: 0,
        }
    }
}

fn validate_common(dropout: f64, epochs: usize, lr: f64) -> Result<()> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
    }
    if epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    Ok(())
}

impl DeepCentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        validate_common(self.dropout, self.epochs, self.learning_rate)?;
        self.loss.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrDeepCentConfig {
    /// Hidden widths of the shared trunk; the last entry is the width of
    /// the shared representation. Must be non-empty.
    pub shared_widths: Vec<usize>,
    /// Hidden widths inside each head (may be empty: linear heads).
    pub head_widths: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub loss: CrLossParams,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for CrDeepCentConfig {
    fn default() -> Self {
        CrDeepCentConfig {
            shared_widths: vec![32],
            head_widths: vec![16],
            dropout: 0.1,
            epochs: 500,
            learning_rate: 1e-2,
            loss: CrLossParams::default(),
            standardize: true,
            seed: 0,
        }
    }
}

impl CrDeepCentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shared_widths.is_empty() {
            return Err(Error::Config("shared trunk needs at least one layer".into()));
        }
        if self.shared_widths.contains(&0) || self.head_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        validate_common(self.dropout, self.epochs, self.learning_rate)?;
        self.loss.validate()
    }
}

/// Shared trunk plus two heads reading `[trunk output ∥ covariates]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrNet {
    pub trunk: Mlp,
    pub head1: Mlp,
    pub head2: Mlp,
}

pub struct CrCache {
    pub trunk: ForwardCache,
    pub head1: ForwardCache,
    pub head2: ForwardCache,
    trunk_width: usize,
}

pub struct CrGradients {
    pub trunk: Gradients,
    pub head1: Gradients,
    pub head2: Gradients,
}

impl CrNet {
    pub fn init<R: Rng>(
        p: usize,
        shared_widths: &[usize],
        head_widths: &[usize],
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut trunk_widths = vec![p];
        trunk_widths.extend_from_slice(shared_widths);
        let trunk = init_trunk_with(&trunk_widths, dropout, rng)?;
        let r = *shared_widths.last().expect("validated non-empty");
        let mut head_spec = vec![r + p];
        head_spec.extend_from_slice(head_widths);
        head_spec.push(1);
        let head1 = init_mlp_with(&head_spec, dropout, rng)?;
        let head2 = init_mlp_with(&head_spec, dropout, rng)?;
        CrNet::new(trunk, head1, head2)
    }

    pub fn new(trunk: Mlp, head1: Mlp, head2: Mlp) -> Result<Self> {
        let p = trunk.input_width();
        let r = trunk.output_width();
        for (name, h) in [("head1", &head1), ("head2", &head2)] {
            if h.input_width() != r + p {
                return Err(Error::Shape(format!(
                    "{name} expects {} inputs, trunk provides {r} + {p} covariates",
                    h.input_width()
                )));
            }
            if h.output_width() != 1 || !h.is_regression_head() {
                return Err(Error::Shape(format!("{name} must end in one identity node")));
            }
        }
        Ok(CrNet { trunk, head1, head2 })
    }

    pub fn input_width(&self) -> usize {
        self.trunk.input_width()
    }

    pub fn forward<R: Rng>(
        &self,
        x: ArrayView2<f64>,
        dropout_enabled: bool,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>, CrCache)> {
        let (shared, trunk) = self.trunk.forward(x, dropout_enabled, rng)?;
        let joined = concatenate(Axis(1), &[shared.view(), x])
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (o1, head1) = self.head1.forward(joined.view(), dropout_enabled, rng)?;
        let (o2, head2) = self.head2.forward(joined.view(), dropout_enabled, rng)?;
        Ok((
            o1.column(0).to_vec(),
            o2.column(0).to_vec(),
            CrCache {
                trunk,
                head1,
                head2,
                trunk_width: shared.ncols(),
            },
        ))
    }

    /// Gradients of a loss with output gradients `g1`, `g2`. The trunk
    /// receives the sum of both heads' contributions.
    pub fn backward(&self, cache: &CrCache, g1: &[f64], g2: &[f64]) -> Result<CrGradients> {
        let col = |g: &[f64]| Array2::from_shape_vec((g.len(), 1), g.to_vec());
        let g1 = col(g1).map_err(|e| Error::Shape(e.to_string()))?;
        let g2 = col(g2).map_err(|e| Error::Shape(e.to_string()))?;
        let (head1, d1) = self.head1.backward_with_input(&cache.head1, g1.view())?;
        let (head2, d2) = self.head2.backward_with_input(&cache.head2, g2.view())?;
        let d_shared = &d1.slice(s![.., ..cache.trunk_width]) + &d2.slice(s![.., ..cache.trunk_width]);
        let trunk = self.trunk.backward(&cache.trunk, d_shared.view())?;
        Ok(CrGradients { trunk, head1, head2 })
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.trunk.parameters();
        p.extend(self.head1.parameters());
        p.extend(self.head2.parameters());
        p
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let a = self.trunk.n_parameters();
        let b = self.head1.n_parameters();
        if values.len() != a + b + self.head2.n_parameters() {
            return Err(Error::Shape("parameter count mismatch".into()));
        }
        self.trunk.set_parameters(&values[..a])?;
        self.head1.set_parameters(&values[a..a + b])?;
        self.head2.set_parameters(&values[a + b..])
    }
}

impl CrGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.trunk.flatten();
        v.extend(self.head1.flatten());
        v.extend(self.head2.flatten());
        v
    }
}

fn clamp(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|p| p.max(MIN_PREDICTION)).collect()
}

/// Common prediction surface for every fitted model.
pub trait SurvivalModel {
    fn mode(&self) -> Mode;

    fn covariate_width(&self) -> usize;

    /// Deterministic predictions, one vector per cause, clamped.
    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>>;

    /// One stochastic pass with dropout enabled, clamped. Models without
    /// dropout return their deterministic prediction.
    fn sample_all(&self, x: ArrayView2<f64>, rng: &mut crate::rng::SeededRng) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepCentModel {
    pub config: DeepCentConfig,
    pub net: Mlp,
    pub standardizer: Standardizer,
    pub covariate_names: Vec<String>,
    /// Training loss before each optimizer step.
    pub loss_trace: Vec<f64>,
}

impl DeepCentModel {
    /// Raw network output (no clamp) for standardised input.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_all(x)?.remove(0))
    }
}

impl SurvivalModel for DeepCentModel {
    fn mode(&self) -> Mode {
        Mode::Noncompeting
    }

    fn covariate_width(&self) -> usize {
        self.standardizer.width()
    }

    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        let z = self.standardizer.apply(x)?;
        let out = self.net.predict(z.view())?;
        Ok(vec![clamp(out.column(0).to_vec())])
    }

    fn sample_all(&self, x: ArrayView2<f64>, rng: &mut crate::rng::SeededRng) -> Result<Vec<Vec<f64>>> {
        let z = self.standardizer.apply(x)?;
        let (out, _) = self.net.forward(z.view(), true, rng)?;
        Ok(vec![clamp(out.column(0).to_vec())])
    }
}

fn standardizer_for(x: ArrayView2<f64>, enabled: bool) -> Standardizer {
    if enabled {
        Standardizer::fit(x)
    } else {
        Standardizer::identity(x.ncols())
    }
}

/// Mean observed time over event records: starting value for output biases
/// so training begins on the scale of the data.
fn event_time_mean(y: &[f64], delta: &[u8], cause: Option<u8>) -> f64 {
    let (s, c) = y
        .iter()
        .zip(delta)
        .filter(|(_, &d)| match cause {
            Some(k) => d == k,
            None => d > 0,
        })
        .fold((0.0, 0usize), |(s, c), (t, _)| (s + t, c + 1));
    if c == 0 {
        y.iter().sum::<f64>() / y.len().max(1) as f64
    } else {
        s / c as f64
    }
}

fn set_output_bias(net: &mut Mlp, value: f64) {
    let last = net.layers_mut().last_mut().expect("non-empty");
    last.bias.fill(value);
}

/// Full-batch training of the single-output network.
pub fn train_single(train: &Dataset, config: &DeepCentConfig) -> Result<DeepCentModel> {
    config.validate()?;
    if train.mode() != Mode::Noncompeting {
        return Err(Error::ModeMismatch {
            model: Mode::Noncompeting.to_string(),
            data: train.mode().to_string(),
        });
    }
    if train.event_count(1) == 0 {
        return Err(Error::Training("training set has no events".into()));
    }
    let x_raw = train.covariates();
    let standardizer = standardizer_for(x_raw.view(), config.standardize);
    let x = standardizer.apply(x_raw.view())?;
    let y = train.times();
    let delta = train.events();

    let mut widths = vec![train.n_covariates()];
    widths.extend_from_slice(&config.hidden_widths);
    widths.push(1);
    let mut net = init_mlp_with(&widths, config.dropout, &mut seeded(derive_seed(config.seed, 0)))?;
    set_output_bias(&mut net, event_time_mean(&y, &delta, None));

    let loss = SingleLoss::new(y, delta, config.loss)?;
    let mut opt = AdamState::new(&net, config.learning_rate);
    let mut rng = seeded(derive_seed(config.seed, 1));
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (out, cache) = net.forward(x.view(), config.dropout > 0.0, &mut rng)?;
        let yhat = out.column(0).to_vec();
        let (value, grad) = loss.eval(&yhat).map_err(|e| at_epoch(e, epoch))?;
        trace.push(value);
        let g = Array2::from_shape_vec((grad.len(), 1), grad).expect("column shape");
        let grads = net.backward(&cache, g.view())?;
        adam_step(&mut net, &grads, &mut opt).map_err(|e| at_epoch(e, epoch))?;
    }
    Ok(DeepCentModel {
        config: config.clone(),
        net,
        standardizer,
        covariate_names: train.covariate_names().to_vec(),
        loss_trace: trace,
    })
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numerical { layer, msg } => Error::Numerical {
            layer,
            msg: format!("{msg} (epoch {epoch})"),
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrDeepCentModel {
    pub config: CrDeepCentConfig,
    pub net: CrNet,
    pub standardizer: Standardizer,
    pub covariate_names: Vec<String>,
    pub loss_trace: Vec<f64>,
}

impl CrDeepCentModel {
    pub fn predict_competing(&self, x: ArrayView2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut v = self.predict_all(x)?;
        let b = v.pop().expect("two heads");
        let a = v.pop().expect("two heads");
        Ok((a, b))
    }
}

impl SurvivalModel for CrDeepCentModel {
    fn mode(&self) -> Mode {
        Mode::Competing
    }

    fn covariate_width(&self) -> usize {
        self.standardizer.width()
    }

    fn predict_all(&self, x: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        let z = self.standardizer.apply(x)?;
        let (a, b, _) = self.net.forward(z.view(), false, &mut seeded(0))?;
        Ok(vec![clamp(a), clamp(b)])
    }

    fn sample_all(&self, x: ArrayView2<f64>, rng: &mut crate::rng::SeededRng) -> Result<Vec<Vec<f64>>> {
        let z = self.standardizer.apply(x)?;
        let (a, b, _) = self.net.forward(z.view(), true, rng)?;
        Ok(vec![clamp(a), clamp(b)])
    }
}

/// Joint full-batch training of trunk and both heads.
pub fn train_competing(train: &Dataset, config: &CrDeepCentConfig) -> Result<CrDeepCentModel> {
    config.validate()?;
    if train.mode() != Mode::Competing {
        return Err(Error::ModeMismatch {
            model: Mode::Competing.to_string(),
            data: train.mode().to_string(),
        });
    }
    if train.event_count(1) + train.event_count(2) == 0 {
        return Err(Error::Training("training set has no events".into()));
    }
    let x_raw = train.covariates();
    let standardizer = standardizer_for(x_raw.view(), config.standardize);
    let x = standardizer.apply(x_raw.view())?;
    let y = train.times();
    let delta = train.events();

    let mut init_rng = seeded(derive_seed(config.seed, 0));
    let mut net = CrNet::init(
        train.n_covariates(),
        &config.shared_widths,
        &config.head_widths,
        config.dropout,
        &mut init_rng,
    )?;
    set_output_bias(&mut net.head1, event_time_mean(&y, &delta, Some(1)));
    set_output_bias(&mut net.head2, event_time_mean(&y, &delta, Some(2)));

    let loss = CompetingLoss::new(y, delta, config.loss)?;
    let mut opt_trunk = AdamState::new(&net.trunk, config.learning_rate);
    let mut opt1 = AdamState::new(&net.head1, config.learning_rate);
    let mut opt2 = AdamState::new(&net.head2, config.learning_rate);
    let mut rng = seeded(derive_seed(config.seed, 1));
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (a, b, cache) = net.forward(x.view(), config.dropout > 0.0, &mut rng)?;
        let (value, g1, g2) = loss.eval(&a, &b).map_err(|e| at_epoch(e, epoch))?;
        trace.push(value);
        let grads = net.backward(&cache, &g1, &g2)?;
        adam_step(&mut net.trunk, &grads.trunk, &mut opt_trunk).map_err(|e| at_epoch(e, epoch))?;
        adam_step(&mut net.head1, &grads.head1, &mut opt1).map_err(|e| at_epoch(e, epoch))?;
        adam_step(&mut net.head2, &grads.head2, &mut opt2).map_err(|e| at_epoch(e, epoch))?;
    }
    Ok(CrDeepCentModel {
        config: config.clone(),
        net,
        standardizer,
        covariate_names: train.covariate_names().to_vec(),
        loss_trace: trace,
    })
}

/// Monte Carlo dropout band for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    /// Dropout-disabled prediction.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_draws: usize,
    /// Miscoverage: bounds are the `alpha/2` and `1 − alpha/2` quantiles.
    pub alpha: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn check_interval_args(n_draws: usize, alpha: f64) -> Result<()> {
    if n_draws < 1 {
        return Err(Error::Config("need at least one dropout draw".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Raw dropout draws for every row: `draws[cause][row][b]`. Draw `b` uses a
/// generator seeded from `(seed, b)`.
pub fn mc_dropout_draws<M: SurvivalModel>(
    model: &M,
    x: ArrayView2<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let causes = model.mode().causes().len();
    let mut draws = vec![vec![Vec::with_capacity(n_draws); x.nrows()]; causes];
    for b in 0..n_draws {
        let mut rng = seeded(derive_seed(seed, b as u64));
        let sample = model.sample_all(x, &mut rng)?;
        for (k, per_cause) in sample.into_iter().enumerate() {
            for (i, v) in per_cause.into_iter().enumerate() {
                draws[k][i].push(v);
            }
        }
    }
    Ok(draws)
}

/// Prediction intervals for every row of `x`: `result[cause][row]`.
pub fn mc_dropout_intervals<M: SurvivalModel>(
    model: &M,
    x: ArrayView2<f64>,
    n_draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Vec<PredictionInterval>>> {
    check_interval_args(n_draws, alpha)?;
    let points = model.predict_all(x)?;
    let draws = mc_dropout_draws(model, x, n_draws, seed)?;
    Ok(points
        .into_iter()
        .zip(draws)
        .map(|(pts, rows)| {
            pts.into_iter()
                .zip(rows)
                .map(|(point, mut d)| {
                    d.sort_by(f64::total_cmp);
                    PredictionInterval {
                        point,
                        lower: quantile(&d, alpha / 2.0),
                        upper: quantile(&d, 1.0 - alpha / 2.0),
                        n_draws,
                        alpha,
                    }
                })
                .collect()
        })
        .collect())
}

/// Interval for a single covariate vector, one entry per cause.
pub fn mc_dropout_interval<M: SurvivalModel>(
    model: &M,
    x: &[f64],
    n_draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<PredictionInterval>> {
    let row = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("row shape");
    Ok(mc_dropout_intervals(model, row.view(), n_draws, alpha, seed)?
        .into_iter()
        .map(|mut v| v.remove(0))
        .collect())
}
