//! Acceptance checks. Runs as a plain binary so every criterion prints a
//! single PASS/FAIL line; exits non-zero if any criterion fails.

mod common;

use std::process::Command;
use std::time::Instant;

use deepcent::bench::{run_benchmark, BenchConfig, Method};
use deepcent::data::{Dataset, Mode, SurvivalRecord};
use deepcent::losses::{
    comparable_pairs, censored_mse, cr_censored_mse, cr_rank_loss, cstar, rankdeepsurv_rank_loss, total_loss,
    CrLossParams, LossParams,
};
use deepcent::metrics::{harrell_c, mse_events, mse_true};
use deepcent::models::{mc_dropout_intervals, train_single, DeepCentConfig};
use deepcent::rng::{derive_seed, seeded};
use deepcent::sim::{calibrate_theta, Design, SimConfig};
use deepcent::weibull::fit_weibull;
use deepcent::Error;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gradient_suite() -> Outcome {
    let t = Instant::now();
    let checks = common::gradient_suite(2024);
    let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        checks.len() == 50 && worst < 1e-4 && secs < 60.0,
        format!("{} triples, max relative error {worst:.2e}, {secs:.1}s", checks.len()),
    )
}

fn lower_bound() -> Outcome {
    let t = Instant::now();
    let mut violations = 0;
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 1000 {
        let (y, d, p) = common::lower_bound_instance(derive_seed(77, seed), 30);
        seed += 1;
        let (Ok(lb), Ok(c)) = (cstar(&y, &d, &p, 1), harrell_c(&y, &d, &p, 1)) else {
            continue;
        };
        checked += 1;
        if lb > c + 1e-12 {
            violations += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 10.0,
        format!("{checked} instances, {violations} violations, {secs:.2}s"),
    )
}

fn hand_oracles() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let lp = |l1, l2| LossParams { lambda1: l1, lambda2: l2 };
    let cr = |l: [f64; 5]| CrLossParams {
        lambda0: l[0],
        lambda1: l[1],
        lambda2: l[2],
        lambda3: l[3],
        lambda4: l[4],
    };
    let log2 = std::f64::consts::LN_2;
    let cstar1 = 1.0 + (1.0 / (1.0 + (-1.0f64).exp())).ln() / log2;
    let mut failed = Vec::new();
    let mut n = 0;
    let mut check = |name: &str, ok: bool| {
        n += 1;
        if !ok {
            failed.push(name.to_string());
        }
    };

    let pairs = comparable_pairs(&[1.0, 2.0], &[1, 1], 1).unwrap();
    check("pairs (1,2)/(1,1)", pairs.as_slice() == [(0, 1)]);
    check("pairs (1,2)/(0,1)", comparable_pairs(&[1.0, 2.0], &[0, 1], 1).unwrap().is_empty());
    check("censored_mse event", close(censored_mse(&[3.0], &[1], &[2.0], 1.0).unwrap(), 1.0));
    check("censored_mse no penalty", censored_mse(&[3.0], &[0], &[4.0], 7.0).unwrap() == 0.0);
    check("censored_mse penalty", close(censored_mse(&[3.0], &[0], &[2.0], 0.5).unwrap(), 0.5));
    check("cstar zero gap", close(cstar(&[1.0, 2.0], &[1, 1], &[1.0, 1.0], 1).unwrap(), 0.0));
    check(
        "cstar log 3",
        close(cstar(&[1.0, 2.0], &[1, 1], &[0.0, 3f64.ln()], 1).unwrap(), 1.0 + (0.75f64).ln() / log2),
    );
    let far = cstar(&[1.0, 2.0], &[1, 1], &[0.0, 30.0], 1).unwrap();
    check("cstar limit", far < 1.0 && far > 1.0 - 1e-12);
    let (y, d, p) = ([1.0, 2.0, 3.0], [1u8, 0, 1], [1.5, 1.0, 4.0]);
    check(
        "total λ₂=0",
        total_loss(&y, &d, &p, &lp(0.7, 0.0)).unwrap() == censored_mse(&y, &d, &p, 0.7).unwrap(),
    );
    let exact = [1.0, 2.0, 3.0];
    let t = total_loss(&exact, &[1, 1, 1], &exact, &lp(1.0, 2.0)).unwrap();
    let c = cstar(&exact, &[1, 1, 1], &exact, 1).unwrap();
    check("total perfect order", close(t, -2.0 * c) && c > 0.0 && c < 1.0);
    check(
        "total two-record",
        close(total_loss(&[1.0, 2.0], &[1, 1], &[1.0, 2.0], &lp(1.0, 1.0)).unwrap(), -cstar1),
    );
    let ones = cr([1.0; 5]);
    check("cr event 1", close(cr_censored_mse(&[2.0], &[1], &[1.5], &[3.0], &ones).unwrap(), 0.25));
    check("cr censored", close(cr_censored_mse(&[2.0], &[0], &[3.0], &[1.0], &ones).unwrap(), 1.0));
    check(
        "cr cross penalty",
        close(cr_censored_mse(&[2.0], &[1], &[3.0], &[2.5], &cr([1.0, 0.5, 1.0, 1.0, 1.0])).unwrap(), 1.125),
    );
    let (y3, d3, a3, b3) = ([1.0, 2.0, 3.0], [1u8, 2, 1], [1.2, 2.5, 2.0], [0.8, 1.9, 3.3]);
    check(
        "cr rank λ₃=λ₄=0",
        cr_rank_loss(&y3, &d3, &a3, &b3, &cr([1.0, 1.0, 1.0, 0.0, 0.0])).unwrap() == 0.0,
    );
    let only1 = [1u8, 0, 1];
    check(
        "cr rank cause-1 only",
        close(
            cr_rank_loss(&y3, &only1, &a3, &b3, &cr([1.0, 1.0, 1.0, 1.5, 2.0])).unwrap(),
            -1.5 * cstar(&y3, &only1, &a3, 1).unwrap(),
        ),
    );
    check("rank mse exact", rankdeepsurv_rank_loss(&exact, &[1, 1, 1], &exact).unwrap() == 0.0);
    check("rank mse pair", close(rankdeepsurv_rank_loss(&[1.0, 2.0], &[1, 1], &[1.0, 3.0]).unwrap(), 1.0));
    let shifted: Vec<f64> = [1.5, 1.0, 4.0].iter().map(|v| v + 3.25).collect();
    check(
        "rank mse shift",
        close(
            rankdeepsurv_rank_loss(&y, &d, &[1.5, 1.0, 4.0]).unwrap(),
            rankdeepsurv_rank_loss(&y, &d, &shifted).unwrap(),
        ),
    );
    check("harrell concordant", harrell_c(&[1.0, 2.0], &[1, 1], &[1.5, 2.5], 1).unwrap() == 1.0);
    check("harrell discordant", harrell_c(&[1.0, 2.0], &[1, 1], &[2.5, 1.5], 1).unwrap() == 0.0);
    check("mse exact", mse_true(&[1.0, 2.0], &[1.0, 2.0]).unwrap() == 0.0);
    check("mse true", close(mse_true(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5));
    check(
        "mse all censored",
        matches!(mse_events(&[1.0, 2.0], &[0, 0], &[1.0, 1.0], 1), Err(Error::Undefined(_))),
    );
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{n} loss/metric examples reproduce within 1e-12")
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

/// `log T = β₀ + β₁x + σW`, `W` standard minimum-extreme-value, `C ~ U(0, θ)`.
fn weibull_data(seed: u64, n: usize, theta: f64) -> Dataset {
    let mut rng = seeded(seed);
    let records = (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-2.0..2.0);
            let w = (-(1.0 - rng.random::<f64>()).ln()).ln();
            let t = (1.0 + 0.5 * x + w).exp();
            let c = rng.random::<f64>() * theta;
            SurvivalRecord {
                x: vec![x],
                y: t.min(c),
                delta: u8::from(t <= c),
            }
        })
        .collect();
    Dataset::new(records, vec!["x".into()], Mode::Noncompeting).unwrap()
}

fn weibull_recovery() -> Outcome {
    let t = Instant::now();
    // θ for 20% censoring, by bisection on a large fixed sample.
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let p = weibull_data(123_456, 100_000, mid.exp()).censoring_proportion();
        if p > 0.2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = (0.5 * (lo + hi)).exp();
    let mut worst_beta: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    let mut cens = Vec::new();
    for seed in 0..10 {
        let ds = weibull_data(seed, 5000, theta);
        cens.push(ds.censoring_proportion());
        match fit_weibull(&ds) {
            Ok(m) => {
                worst_beta = worst_beta.max((m.beta[1] - 0.5).abs());
                worst_sigma = worst_sigma.max((m.sigma - 1.0).abs());
            }
            Err(_) => {
                worst_beta = f64::INFINITY;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let mean_cens = cens.iter().sum::<f64>() / cens.len() as f64;
    outcome(
        worst_beta <= 0.05 && worst_sigma <= 0.05 && secs < 30.0,
        format!(
            "10 seeds, censoring {mean_cens:.3}, max |β̂₁−0.5| {worst_beta:.4}, max |σ̂−1| {worst_sigma:.4}, {secs:.1}s"
        ),
    )
}

fn noncompeting_study() -> Outcome {
    let t = Instant::now();
    let cfg = BenchConfig::new(Mode::Noncompeting, 500, 0.4, 20, 3);
    let r = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("benchmark failed: {e}")),
    };
    let c_d = r.mean(Method::Deepcent, "c_index").unwrap_or(f64::NAN);
    let c_w = r.mean(Method::Weibull, "c_index").unwrap_or(f64::NAN);
    let m_d = r.mean(Method::Deepcent, "mse").unwrap_or(f64::NAN);
    let m_w = r.mean(Method::Weibull, "mse").unwrap_or(f64::NAN);
    outcome(
        c_d - c_w >= 0.03 && m_d < m_w,
        format!(
            "C-index DeepCENT {c_d:.4} vs Weibull {c_w:.4}; true-time MSE {m_d:.2} vs {m_w:.2}; {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn competing_study() -> Outcome {
    let t = Instant::now();
    let cfg = BenchConfig::new(Mode::Competing, 500, 0.4, 20, 3);
    let r = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("benchmark failed: {e}")),
    };
    let get = |m, k| r.mean(m, k).unwrap_or(f64::NAN);
    let (d1, d2) = (get(Method::CrDeepcent, "c_index1"), get(Method::CrDeepcent, "c_index2"));
    let (w1, w2) = (get(Method::CrWeibull, "c_index1"), get(Method::CrWeibull, "c_index2"));
    outcome(
        d1 > w1 && d2 > w2,
        format!(
            "cause 1 C-index {d1:.4} vs {w1:.4}; cause 2 {d2:.4} vs {w2:.4}; {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn penalty_sweep() -> Outcome {
    let mut bad = 0;
    let mut points = 0;
    for &y in &[0.05, 1.0, 3.7, 250.0] {
        for k in 0..=400 {
            let p = y * k as f64 / 200.0;
            points += 1;
            for l1 in [0.1, 1.0, 10.0] {
                let v = censored_mse(&[y], &[0], &[p], l1).unwrap();
                let lp = CrLossParams {
                    lambda0: l1,
                    ..CrLossParams::default()
                };
                // Only the prediction under test moves; the other sits at y.
                let v1 = cr_censored_mse(&[y], &[0], &[p], &[y], &lp).unwrap();
                let v2 = cr_censored_mse(&[y], &[0], &[y], &[p], &lp).unwrap();
                for v in [v, v1, v2] {
                    let ok = if p >= y { v == 0.0 } else { v > 0.0 };
                    if !ok {
                        bad += 1;
                    }
                }
            }
        }
    }
    outcome(bad == 0, format!("{points} predictions × 3 weights × 3 losses, {bad} violations"))
}

fn mc_dropout() -> Outcome {
    let t = Instant::now();
    let design = Design::Noncompeting(SimConfig::standard(500, 1.0, 41));
    let theta = match calibrate_theta(&design, 0.4, 0.005) {
        Ok(v) => v,
        Err(e) => return outcome(false, e.to_string()),
    };
    let train = design.with_theta(theta).simulate().unwrap();
    let test = design.with_theta(theta).with_n_seed(250, 42).simulate().unwrap();
    let x = test.covariates();
    let widths = |dropout: f64| -> Vec<f64> {
        let cfg = DeepCentConfig {
            dropout,
            seed: 5,
            ..DeepCentConfig::default()
        };
        let model = train_single(&train, &cfg).unwrap();
        mc_dropout_intervals(&model, x.view(), 200, 0.05, 9).unwrap()[0]
            .iter()
            .map(|i| i.upper - i.lower)
            .collect()
    };
    let w = widths(0.3);
    let share = w.iter().filter(|v| **v > 0.0).count() as f64 / w.len() as f64;
    let zero = widths(0.0).iter().all(|v| *v == 0.0);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        share >= 0.95 && zero && secs < 60.0,
        format!(
            "dropout 0.3: {:.1}% nondegenerate; dropout 0: all zero width = {zero}; {secs:.1}s",
            100.0 * share
        ),
    )
}

fn benchmark_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_deepcent"))
            .current_dir(dir.path())
            .args([
                "benchmark", "--mode", "single", "--n", "200", "--censoring", "0.4", "--reps", "3", "--seed", "3",
                "--methods", "weibull,deepcent,rankdeepsurv-loss", "--out", out,
            ])
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    if !(run("a.csv") && run("b.csv")) {
        return outcome(false, "benchmark command failed");
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    outcome(a == b && !a.is_empty(), format!("two runs, {} bytes, identical = {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient suite", gradient_suite),
        ("c* lower bound", lower_bound),
        ("hand-oracle losses", hand_oracles),
        ("Weibull recovery", weibull_recovery),
        ("noncompeting study", noncompeting_study),
        ("competing study", competing_study),
        ("censoring-penalty sweep", penalty_sweep),
        ("MC dropout intervals", mc_dropout),
        ("benchmark determinism", benchmark_determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} — {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {}/9 passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
