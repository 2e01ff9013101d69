//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Rows of every input matrix are samples. A layer computes
//! `a = mask ⊙ act(x · Wᵀ + b)` where `W` is `[out × in]` and `mask` is an
//! inverted-dropout mask (entries `0` or `1/(1 - rate)`), so evaluation with
//! dropout disabled needs no rescaling.
//!
//! Losses elsewhere in the crate return the gradient with respect to the
//! network output; [`Mlp::backward`] turns that into parameter gradients and
//! [`adam_step`] applies them.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Format(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `[out × in]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    /// Applied after the activation when dropout is enabled.
    pub dropout: f64,
}

impl Layer {
    pub fn input_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Intermediate values recorded by [`Mlp::forward`], consumed by
/// [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    pub pre_activations: Vec<Array2<f64>>,
    pub post_activations: Vec<Array2<f64>>,
    pub masks: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients, shape-mirroring an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers.iter().position(|g| {
            g.weight.iter().any(|v| !v.is_finite()) || g.bias.iter().any(|v| !v.is_finite())
        })
    }

    /// Flattened in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weight.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        out
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 layer widths, got {}",
            widths.len()
        )));
    }
    if widths.contains(&0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

fn he_layer<R: Rng>(
    fan_in: usize,
    fan_out: usize,
    activation: Activation,
    dropout: f64,
    rng: &mut R,
) -> Layer {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    let weight = Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(rng));
    Layer {
        weight,
        bias: Array1::zeros(fan_out),
        activation,
        dropout,
    }
}

/// Regression network: ReLU hidden layers with dropout, identity output
/// layer without dropout. He-normal weights, zero biases.
pub fn init_mlp(widths: &[usize], dropout: f64, seed: u64) -> Result<Mlp> {
    let mut rng = seeded(seed);
    init_mlp_with(widths, dropout, &mut rng)
}

pub fn init_mlp_with<R: Rng>(widths: &[usize], dropout: f64, rng: &mut R) -> Result<Mlp> {
    check_widths(widths)?;
    check_rate(dropout)?;
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if i == last {
                he_layer(w[0], w[1], Activation::Identity, 0.0, rng)
            } else {
                he_layer(w[0], w[1], Activation::Relu, dropout, rng)
            }
        })
        .collect();
    Ok(Mlp { layers })
}

/// Representation network: every layer ReLU followed by dropout. Used as the
/// shared trunk of the competing-risks model.
pub fn init_trunk_with<R: Rng>(widths: &[usize], dropout: f64, rng: &mut R) -> Result<Mlp> {
    check_widths(widths)?;
    check_rate(dropout)?;
    let layers = widths
        .windows(2)
        .map(|w| he_layer(w[0], w[1], Activation::Relu, dropout, rng))
        .collect();
    Ok(Mlp { layers })
}

impl Mlp {
    /// Assemble a network from explicit layers, checking that widths chain
    /// and dropout rates are valid.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            check_rate(l.dropout)?;
            if l.bias.len() != l.output_width() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} != output width {}",
                    l.bias.len(),
                    l.output_width()
                )));
            }
            if l.input_width() == 0 || l.output_width() == 0 {
                return Err(Error::Config(format!("layer {i} has zero width")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_width(),
                    i + 1,
                    pair[1].input_width()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// True when the network ends in an identity layer without dropout, as a
    /// prediction network must.
    pub fn is_regression_head(&self) -> bool {
        let last = self.layers.last().expect("non-empty");
        last.activation == Activation::Identity && last.dropout == 0.0
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").output_width()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(Layer::output_width));
        w
    }

    pub fn max_dropout(&self) -> f64 {
        self.layers.iter().map(|l| l.dropout).fold(0.0, f64::max)
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// All parameters flattened: per layer, row-major weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`Mlp::parameters`].
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_parameters() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_parameters(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn forward<R: Rng>(
        &self,
        x: ArrayView2<f64>,
        dropout_enabled: bool,
        rng: &mut R,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_width()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite covariate value".into()));
        }
        let n = x.nrows();
        let mut cache = ForwardCache {
            input: x.to_owned(),
            pre_activations: Vec::with_capacity(self.layers.len()),
            post_activations: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
        };
        let mut current = x.to_owned();
        for layer in &self.layers {
            let mut z = current.dot(&layer.weight.t());
            z += &layer.bias;
            let mut a = match layer.activation {
                Activation::Relu => z.mapv(|v| if v > 0.0 { v } else { 0.0 }),
                Activation::Identity => z.clone(),
            };
            let mask = if dropout_enabled && layer.dropout > 0.0 {
                let keep = 1.0 / (1.0 - layer.dropout);
                Array2::from_shape_fn((n, layer.output_width()), |_| {
                    if rng.random::<f64>() < layer.dropout {
                        0.0
                    } else {
                        keep
                    }
                })
            } else {
                Array2::ones((n, layer.output_width()))
            };
            a *= &mask;
            cache.pre_activations.push(z);
            cache.masks.push(mask);
            cache.post_activations.push(a.clone());
            current = a;
        }
        Ok((current, cache))
    }

    /// Deterministic forward pass with dropout disabled.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        // The RNG is never drawn from when dropout is disabled.
        let mut rng = seeded(0);
        self.forward(x, false, &mut rng).map(|(out, _)| out)
    }

    /// Parameter gradients for the loss whose gradient with respect to the
    /// network output is `output_gradient`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: ArrayView2<f64>,
    ) -> Result<Gradients> {
        self.backward_with_input(cache, output_gradient)
            .map(|(g, _)| g)
    }

    /// As [`Mlp::backward`], also returning the gradient with respect to the
    /// network input (needed when the input is itself computed).
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        output_gradient: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.pre_activations.len() != self.layers.len()
            || cache.masks.len() != self.layers.len()
        {
            return Err(Error::Shape("cache does not match network depth".into()));
        }
        let n = cache.input.nrows();
        if output_gradient.dim() != (n, self.output_width()) {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, expected ({n}, {})",
                output_gradient.dim(),
                self.output_width()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_gradient.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[idx];
            if z.dim() != (n, layer.output_width()) {
                return Err(Error::Shape(format!("cache layer {idx} shape mismatch")));
            }
            let mut dz = upstream * &cache.masks[idx];
            if layer.activation == Activation::Relu {
                dz.zip_mut_with(z, |g, &zv| {
                    if zv <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            let prev = if idx == 0 {
                &cache.input
            } else {
                &cache.post_activations[idx - 1]
            };
            let weight = dz.t().dot(prev);
            let bias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&layer.weight);
            grads.push(LayerGradient { weight, bias });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Text serialization. Values are written with 17 significant digits so
    /// that parsing restores them bit for bit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
        writeln!(s, "mlp 1").unwrap();
        writeln!(
            s,
            "widths {}",
            join(&mut self.widths().iter().map(|w| w.to_string()))
        )
        .unwrap();
        writeln!(
            s,
            "activations {}",
            join(&mut self.layers.iter().map(|l| l.activation.name().to_string()))
        )
        .unwrap();
        writeln!(
            s,
            "dropout {}",
            join(&mut self.layers.iter().map(|l| fmt_f64(l.dropout)))
        )
        .unwrap();
        for l in &self.layers {
            writeln!(s, "weight {}", join(&mut l.weight.iter().map(|v| fmt_f64(*v)))).unwrap();
            writeln!(s, "bias {}", join(&mut l.bias.iter().map(|v| fmt_f64(*v)))).unwrap();
        }
        s
    }

    /// Parse the format written by [`Mlp::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok(parts.map(str::to_string).collect()),
                other => Err(Error::Format(format!(
                    "expected `{key}`, found `{}`",
                    other.unwrap_or("")
                ))),
            }
        };
        let version = next("mlp")?;
        if version != ["1"] {
            return Err(Error::Format(format!("unsupported mlp version {version:?}")));
        }
        let widths = next("widths")?
            .iter()
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad width `{w}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        check_widths(&widths).map_err(|e| Error::Format(e.to_string()))?;
        let n_layers = widths.len() - 1;
        let activations = next("activations")?
            .iter()
            .map(|a| Activation::parse(a))
            .collect::<Result<Vec<_>>>()?;
        let dropout = parse_floats(&next("dropout")?)?;
        if activations.len() != n_layers || dropout.len() != n_layers {
            return Err(Error::Format("per-layer field count mismatch".into()));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let (fan_in, fan_out) = (widths[i], widths[i + 1]);
            let w = parse_floats(&next("weight")?)?;
            let b = parse_floats(&next("bias")?)?;
            let weight = Array2::from_shape_vec((fan_out, fan_in), w)
                .map_err(|_| Error::Format(format!("layer {i}: weight count mismatch")))?;
            if b.len() != fan_out {
                return Err(Error::Format(format!("layer {i}: bias count mismatch")));
            }
            layers.push(Layer {
                weight,
                bias: Array1::from(b),
                activation: activations[i],
                dropout: dropout[i],
            });
        }
        Mlp::from_layers(layers)
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_floats(tokens: &[String]) -> Result<Vec<f64>> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number `{t}`")))
        })
        .collect()
}

/// Adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected adaptive-moment update. Parameters are untouched when
/// any gradient is non-finite.
pub fn adam_step(net: &mut Mlp, gradients: &Gradients, state: &mut AdamState) -> Result<()> {
    if gradients.layers.len() != net.layers.len()
        || state.first_moment.layers.len() != net.layers.len()
    {
        return Err(Error::Shape("gradient depth does not match network".into()));
    }
    for (i, (g, l)) in gradients.layers.iter().zip(&net.layers).enumerate() {
        if g.weight.dim() != l.weight.dim() || g.bias.len() != l.bias.len() {
            return Err(Error::Shape(format!("layer {i}: gradient shape mismatch")));
        }
    }
    if let Some(layer) = gradients.first_non_finite() {
        return Err(Error::Numerical {
            layer: Some(layer),
            msg: "non-finite gradient".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let g = &gradients.layers[i];
        let m = &mut state.first_moment.layers[i];
        let v = &mut state.second_moment.layers[i];
        ndarray::Zip::from(&mut layer.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
