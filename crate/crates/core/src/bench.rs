//! Replicated simulation benchmark: simulate train (n) and test (n/2) sets,
//! fit every requested method, score on the test set, and emit one long-format
//! row per (replicate, method, metric).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::losses::{LossParams, Objective};
use crate::metrics::evaluate;
use crate::models::{train_competing, train_single, CrDeepCentConfig, DeepCentConfig, SurvivalModel};
use crate::rng::derive_seed;
use crate::sim::{calibrate_theta, CrSimConfig, Design, SimConfig};
use crate::weibull::{fit_weibull, CrWeibullModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Weibull,
    Deepcent,
    RankdeepsurvLoss,
    CrWeibull,
    CrDeepcent,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Weibull,
        Method::Deepcent,
        Method::RankdeepsurvLoss,
        Method::CrWeibull,
        Method::CrDeepcent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Weibull => "weibull",
            Method::Deepcent => "deepcent",
            Method::RankdeepsurvLoss => "rankdeepsurv-loss",
            Method::CrWeibull => "cr-weibull",
            Method::CrDeepcent => "cr-deepcent",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Method::Weibull | Method::Deepcent | Method::RankdeepsurvLoss => Mode::Noncompeting,
            Method::CrWeibull | Method::CrDeepcent => Mode::Competing,
        }
    }

    pub fn defaults_for(mode: Mode) -> Vec<Method> {
        match mode {
            Mode::Noncompeting => vec![Method::Weibull, Method::Deepcent],
            Mode::Competing => vec![Method::CrWeibull, Method::CrDeepcent],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected one of {})",
                    Method::ALL.map(Method::name).join(", ")
                ))
            })
    }
}

/// Network settings used by the benchmark when no tuned config is supplied.
/// Uses a heavier censoring penalty (`λ₁ = 10`) than the library default.
pub fn default_deepcent_config() -> DeepCentConfig {
    DeepCentConfig {
        loss: Objective::Deepcent(LossParams {
            lambda1: 10.0,
            lambda2: 1.0,
        }),
        ..DeepCentConfig::default()
    }
}

pub fn default_rankdeepsurv_config() -> DeepCentConfig {
    DeepCentConfig {
        loss: Objective::Rankdeepsurv {
            alpha: 1.0,
            beta: 1.0,
        },
        ..DeepCentConfig::default()
    }
}

pub fn default_cr_config() -> CrDeepCentConfig {
    CrDeepCentConfig::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub mode: Mode,
    /// Training size; the test set has `n / 2` records.
    pub n: usize,
    pub censoring: f64,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub deepcent: DeepCentConfig,
    pub rankdeepsurv: DeepCentConfig,
    pub cr_deepcent: CrDeepCentConfig,
    /// Group multiplier of the simulation design.
    pub group_multiplier: f64,
}

impl BenchConfig {
    pub fn new(mode: Mode, n: usize, censoring: f64, reps: usize, seed: u64) -> Self {
        BenchConfig {
            mode,
            n,
            censoring,
            reps,
            seed,
            methods: Method::defaults_for(mode),
            deepcent: default_deepcent_config(),
            rankdeepsurv: default_rankdeepsurv_config(),
            cr_deepcent: default_cr_config(),
            group_multiplier: 2.0,
        }
    }

    pub fn design(&self) -> Design {
        match self.mode {
            Mode::Noncompeting => {
                let mut c = SimConfig::standard(self.n, f64::INFINITY, self.seed);
                c.group_multiplier = self.group_multiplier;
                Design::Noncompeting(c)
            }
            Mode::Competing => {
                let mut c = CrSimConfig::standard(self.n, f64::INFINITY, self.seed);
                c.group_multiplier = self.group_multiplier;
                Design::Competing(c)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        if self.n < 4 {
            return Err(Error::Config("training size must be >= 4".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if let Some(m) = self.methods.iter().find(|m| m.mode() != self.mode) {
            return Err(Error::Config(format!(
                "method {m} does not apply to {} data",
                self.mode
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub replicate: usize,
    pub method: Method,
    pub metric: String,
    /// `None` when the statistic is undefined on that replicate.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub theta: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchResult {
    /// Mean of a metric over replicates where it is defined.
    pub fn mean(&self, method: Method, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.metric == metric)
            .filter_map(|r| r.value)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "replicate,method,metric,value")?;
        for r in &self.rows {
            let v = r.value.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
            writeln!(w, "{},{},{},{}", r.replicate, r.method, r.metric, v)?;
        }
        Ok(())
    }
}

/// Train/test pair for one replicate: seeds derive from `seed + replicate`.
pub fn replicate_data(design: &Design, n: usize, base_seed: u64, replicate: usize) -> Result<(Dataset, Dataset)> {
    let rep_seed = base_seed.wrapping_add(replicate as u64);
    let train = design.with_n_seed(n, derive_seed(rep_seed, 0)).simulate()?;
    let test = design.with_n_seed(n / 2, derive_seed(rep_seed, 1)).simulate()?;
    Ok((train, test))
}

fn fit_and_score(
    cfg: &BenchConfig,
    method: Method,
    replicate: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<BenchRow>> {
    let rep_seed = cfg.seed.wrapping_add(replicate as u64);
    let method_seed = derive_seed(rep_seed, 2 + method as u64);
    let x = test.covariates();
    let predictions = match method {
        Method::Weibull => fit_weibull(train)?.predict_all(x.view())?,
        Method::Deepcent => {
            let c = DeepCentConfig {
                seed: method_seed,
                ..cfg.deepcent.clone()
            };
            train_single(train, &c)?.predict_all(x.view())?
        }
        Method::RankdeepsurvLoss => {
            let c = DeepCentConfig {
                seed: method_seed,
                ..cfg.rankdeepsurv.clone()
            };
            train_single(train, &c)?.predict_all(x.view())?
        }
        Method::CrWeibull => CrWeibullModel::fit(train)?.predict_all(x.view())?,
        Method::CrDeepcent => {
            let c = CrDeepCentConfig {
                seed: method_seed,
                ..cfg.cr_deepcent.clone()
            };
            train_competing(train, &c)?.predict_all(x.view())?
        }
    };
    let report = evaluate(test, &predictions, method.mode())?;
    let suffix = |k: u8| match method.mode() {
        Mode::Noncompeting => String::new(),
        Mode::Competing => k.to_string(),
    };
    let mut rows = Vec::new();
    for c in &report.causes {
        rows.push(BenchRow {
            replicate,
            method,
            metric: format!("c_index{}", suffix(c.cause)),
            value: c.c_index,
        });
        rows.push(BenchRow {
            replicate,
            method,
            metric: format!("mse{}", suffix(c.cause)),
            value: c.mse,
        });
    }
    Ok(rows)
}

/// Calibrate `θ` once for the configuration, then run every
/// (replicate, method) cell. Cells run in parallel; rows are emitted in
/// (replicate, method) order.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let theta = calibrate_theta(&cfg.design(), cfg.censoring, 0.005)?;
    let design = cfg.design().with_theta(theta);
    let data = (0..cfg.reps)
        .into_par_iter()
        .map(|r| replicate_data(&design, cfg.n, cfg.seed, r))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, Method)> = (0..cfg.reps)
        .flat_map(|r| cfg.methods.iter().map(move |&m| (r, m)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(r, m)| fit_and_score(cfg, m, r, &data[r].0, &data[r].1))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchResult {
        theta,
        rows: results.into_iter().flatten().collect(),
    })
}
