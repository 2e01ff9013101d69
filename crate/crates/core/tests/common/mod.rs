#![allow(dead_code)]

use deepcent::losses::{CompetingLoss, CrLossParams, LossParams, Objective, SingleLoss};
use deepcent::models::CrNet;
use deepcent::nn::{init_mlp_with, ForwardCache, Mlp};
use deepcent::rng::{derive_seed, seeded, SeededRng};
use ndarray::Array2;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
/// Minimum distance of every ReLU pre-activation and every censored
/// `ŷ − y` from zero, so finite differences never straddle a kink.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Deepcent,
    Rankdeepsurv,
    Competing,
}

#[derive(Debug)]
pub struct GradCheck {
    pub kind: LossKind,
    pub n_parameters: usize,
    pub max_rel_error: f64,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `relu_layers` leading layers of `cache` are ReLU.
fn near_kink(cache: &ForwardCache, relu_layers: usize) -> bool {
    cache.pre_activations[..relu_layers]
        .iter()
        .any(|z| z.iter().any(|v| v.abs() < KINK_MARGIN))
}

fn censored_near_kink(y: &[f64], delta: &[u8], yhat: &[f64]) -> bool {
    y.iter()
        .zip(delta)
        .zip(yhat)
        .any(|((y, d), p)| *d == 0 && (p - y).abs() < KINK_MARGIN)
}

fn random_widths(rng: &mut SeededRng, p: usize) -> Vec<usize> {
    let depth = rng.random_range(1..=3);
    let mut w = vec![p];
    w.extend((0..depth).map(|_| rng.random_range(2..=6)));
    w
}

fn random_data(rng: &mut SeededRng, n: usize, p: usize, causes: u8) -> (Array2<f64>, Vec<f64>, Vec<u8>) {
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.5..1.5));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let delta: Vec<u8> = (0..n).map(|_| rng.random_range(0..=causes)).collect();
    (x, y, delta)
}

/// Central-difference check of one random (architecture, loss, data) triple.
/// Draws are retried with a derived seed when the sampled point lies within
/// the kink margin.
pub fn gradient_triple(seed: u64, kind: LossKind) -> GradCheck {
    for attempt in 0..100u64 {
        let mut rng = seeded(derive_seed(seed, attempt));
        let p = rng.random_range(2..=5);
        let n = rng.random_range(5..=12);
        let dropout = if rng.random::<bool>() { 0.0 } else { 0.3 };
        let mask_seed = rng.random::<u64>();
        let result = match kind {
            LossKind::Deepcent | LossKind::Rankdeepsurv => {
                let mut widths = random_widths(&mut rng, p);
                widths.push(1);
                let net = init_mlp_with(&widths, dropout, &mut rng).unwrap();
                let (x, y, delta) = random_data(&mut rng, n, p, 1);
                let objective = if kind == LossKind::Deepcent {
                    Objective::Deepcent(LossParams {
                        lambda1: rng.random_range(0.0..3.0),
                        lambda2: rng.random_range(0.0..3.0),
                    })
                } else {
                    Objective::Rankdeepsurv {
                        alpha: rng.random_range(0.1..2.0),
                        beta: rng.random_range(0.1..2.0),
                    }
                };
                check_single(net, &x, y, delta, objective, mask_seed)
            }
            LossKind::Competing => {
                let shared = random_widths(&mut rng, p)[1..].to_vec();
                let heads: Vec<usize> = if rng.random::<bool>() {
                    vec![]
                } else {
                    vec![rng.random_range(2..=4)]
                };
                let net = CrNet::init(p, &shared, &heads, dropout, &mut rng).unwrap();
                let (x, y, delta) = random_data(&mut rng, n, p, 2);
                let params = CrLossParams {
                    lambda0: rng.random_range(0.0..3.0),
                    lambda1: rng.random_range(0.0..3.0),
                    lambda2: rng.random_range(0.0..3.0),
                    lambda3: rng.random_range(0.0..3.0),
                    lambda4: rng.random_range(0.0..3.0),
                };
                check_competing(net, &x, y, delta, params, mask_seed)
            }
        };
        if let Some(r) = result {
            return r;
        }
    }
    panic!("no kink-free draw for seed {seed}");
}

fn check_single(
    net: Mlp,
    x: &Array2<f64>,
    y: Vec<f64>,
    delta: Vec<u8>,
    objective: Objective,
    mask_seed: u64,
) -> Option<GradCheck> {
    let kind = match objective {
        Objective::Deepcent(_) => LossKind::Deepcent,
        Objective::Rankdeepsurv { .. } => LossKind::Rankdeepsurv,
    };
    let loss = SingleLoss::new(y.clone(), delta.clone(), objective).unwrap();
    let eval = |net: &Mlp| {
        let (out, cache) = net.forward(x.view(), true, &mut seeded(mask_seed)).unwrap();
        let yhat = out.column(0).to_vec();
        let (v, g) = loss.eval(&yhat).unwrap();
        (v, g, yhat, cache)
    };
    let (_, g, yhat, cache) = eval(&net);
    if near_kink(&cache, cache.pre_activations.len() - 1) || censored_near_kink(&y, &delta, &yhat) {
        return None;
    }
    let og = Array2::from_shape_vec((g.len(), 1), g).unwrap();
    let analytic = net.backward(&cache, og.view()).unwrap().flatten();
    let theta = net.parameters();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] += FD_STEP;
        probe.set_parameters(&t).unwrap();
        let up = eval(&probe).0;
        t[i] -= 2.0 * FD_STEP;
        probe.set_parameters(&t).unwrap();
        let down = eval(&probe).0;
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    Some(GradCheck {
        kind,
        n_parameters: theta.len(),
        max_rel_error: worst,
    })
}

fn check_competing(
    net: CrNet,
    x: &Array2<f64>,
    y: Vec<f64>,
    delta: Vec<u8>,
    params: CrLossParams,
    mask_seed: u64,
) -> Option<GradCheck> {
    let loss = CompetingLoss::new(y.clone(), delta.clone(), params).unwrap();
    let eval = |net: &CrNet| {
        let (a, b, cache) = net.forward(x.view(), true, &mut seeded(mask_seed)).unwrap();
        let (v, g1, g2) = loss.eval(&a, &b).unwrap();
        (v, g1, g2, a, b, cache)
    };
    let (_, g1, g2, a, b, cache) = eval(&net);
    let trunk_kink = near_kink(&cache.trunk, cache.trunk.pre_activations.len());
    let head_kink = [&cache.head1, &cache.head2]
        .iter()
        .any(|c| near_kink(c, c.pre_activations.len() - 1));
    // Cross penalties switch where ŷ₁ = ŷ₂.
    let cross_kink = a.iter().zip(&b).any(|(u, v)| (u - v).abs() < KINK_MARGIN);
    if trunk_kink || head_kink || cross_kink || censored_near_kink(&y, &delta, &a) || censored_near_kink(&y, &delta, &b)
    {
        return None;
    }
    let analytic = net.backward(&cache, &g1, &g2).unwrap().flatten();
    let theta = net.parameters();
    let mut probe = CrNet::new(net.trunk.clone(), net.head1.clone(), net.head2.clone()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] += FD_STEP;
        probe.set_parameters(&t).unwrap();
        let up = eval(&probe).0;
        t[i] -= 2.0 * FD_STEP;
        probe.set_parameters(&t).unwrap();
        let down = eval(&probe).0;
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    Some(GradCheck {
        kind: LossKind::Competing,
        n_parameters: theta.len(),
        max_rel_error: worst,
    })
}

/// The 50-triple suite: kinds cycle through the three objectives.
pub fn gradient_suite(base_seed: u64) -> Vec<GradCheck> {
    const KINDS: [LossKind; 3] = [LossKind::Deepcent, LossKind::Rankdeepsurv, LossKind::Competing];
    (0..50u64)
        .map(|i| gradient_triple(derive_seed(base_seed, i), KINDS[i as usize % 3]))
        .collect()
}

/// Random instances for the c* ≤ C lower-bound check: `(y, delta, yhat)`
/// with a censoring rate drawn per instance.
pub fn lower_bound_instance(seed: u64, n: usize) -> (Vec<f64>, Vec<u8>, Vec<f64>) {
    let mut rng = seeded(seed);
    let cens: f64 = rng.random_range(0.0..0.8);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let delta: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() >= cens)).collect();
    let scale: f64 = rng.random_range(0.01..10.0);
    let yhat: Vec<f64> = y
        .iter()
        .map(|v| if rng.random::<bool>() { v + rng.random_range(-scale..scale) } else { rng.random_range(0.0..10.0) })
        .collect();
    (y, delta, yhat)
}
