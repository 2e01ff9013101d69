//! k-fold cross-validated grid search.
//!
//! Each (candidate, fold) cell trains on the other folds and scores the held
//! out fold. Candidates are ranked by mean validation C-index (mean over
//! causes in competing mode), ties broken by lower mean validation squared
//! error and then by grid position. The tie-break error uses unit penalty
//! weights for every candidate so values are comparable across λ settings,
//! and is divided by the fold size.

use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_indices, Dataset, Mode};
use crate::error::{Error, Result};
use crate::losses::{censored_mse, cr_censored_mse, CrLossParams, LossParams, Objective};
use crate::metrics::evaluate;
use crate::models::{train_competing, train_single, CrDeepCentConfig, DeepCentConfig, SurvivalModel};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Hidden layers (single risk) or shared trunk layers (competing).
    pub hidden_widths: Vec<Vec<usize>>,
    /// Per-head hidden layers; competing mode only.
    pub head_widths: Vec<Vec<usize>>,
    pub dropout: Vec<f64>,
    pub epochs: Vec<usize>,
    pub learning_rate: Vec<f64>,
    /// Candidate values for every loss weight (`λ₁, λ₂` single risk,
    /// `λ₀..λ₄` competing); each weight varies independently.
    pub lambda: Vec<f64>,
    /// Maximum number of configurations; larger products are subsampled
    /// uniformly without replacement.
    pub budget: Option<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            hidden_widths: vec![vec![32], vec![32, 32], vec![64, 32]],
            head_widths: vec![vec![16]],
            dropout: vec![0.1, 0.3],
            epochs: vec![200, 500],
            learning_rate: vec![1e-3, 1e-2],
            lambda: vec![0.1, 1.0, 10.0],
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Candidate {
    Noncompeting(DeepCentConfig),
    Competing(CrDeepCentConfig),
}

impl Candidate {
    fn with_seed(&self, seed: u64) -> Candidate {
        match self {
            Candidate::Noncompeting(c) => Candidate::Noncompeting(DeepCentConfig { seed, ..c.clone() }),
            Candidate::Competing(c) => Candidate::Competing(CrDeepCentConfig { seed, ..c.clone() }),
        }
    }
}

fn cartesian(lists: &[usize]) -> Vec<Vec<usize>> {
    lists.iter().fold(vec![vec![]], |acc, &len| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..len).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect()
    })
}

impl Grid {
    pub fn validate(&self, mode: Mode) -> Result<()> {
        let empty = self.hidden_widths.is_empty()
            || self.dropout.is_empty()
            || self.epochs.is_empty()
            || self.learning_rate.is_empty()
            || self.lambda.is_empty()
            || (mode == Mode::Competing && self.head_widths.is_empty());
        if empty {
            return Err(Error::Config("every grid list must be non-empty".into()));
        }
        if self.budget == Some(0) {
            return Err(Error::Config("grid budget must be positive".into()));
        }
        Ok(())
    }

    /// Size of the full Cartesian product.
    pub fn size(&self, mode: Mode) -> usize {
        let n_lambda = match mode {
            Mode::Noncompeting => 2,
            Mode::Competing => 5,
        };
        let heads = match mode {
            Mode::Noncompeting => 1,
            Mode::Competing => self.head_widths.len(),
        };
        self.hidden_widths.len()
            * heads
            * self.dropout.len()
            * self.epochs.len()
            * self.learning_rate.len()
            * self.lambda.len().pow(n_lambda)
    }

    /// Candidates in grid order, subsampled to the budget with `seed`.
    pub fn candidates(&self, mode: Mode, seed: u64) -> Result<Vec<Candidate>> {
        self.validate(mode)?;
        let heads = match mode {
            Mode::Noncompeting => 1,
            Mode::Competing => self.head_widths.len(),
        };
        let n_lambda = match mode {
            Mode::Noncompeting => 2,
            Mode::Competing => 5,
        };
        let mut dims = vec![
            self.hidden_widths.len(),
            heads,
            self.dropout.len(),
            self.epochs.len(),
            self.learning_rate.len(),
        ];
        dims.extend(std::iter::repeat_n(self.lambda.len(), n_lambda));
        let mut combos = cartesian(&dims);
        if let Some(budget) = self.budget {
            if combos.len() > budget {
                let mut keep = sample(&mut seeded(seed), combos.len(), budget).into_vec();
                keep.sort_unstable();
                combos = keep.into_iter().map(|i| combos[i].clone()).collect();
            }
        }
        Ok(combos
            .into_iter()
            .map(|c| {
                let l = |k: usize| self.lambda[c[5 + k]];
                match mode {
                    Mode::Noncompeting => Candidate::Noncompeting(DeepCentConfig {
                        hidden_widths: self.hidden_widths[c[0]].clone(),
                        dropout: self.dropout[c[2]],
                        epochs: self.epochs[c[3]],
                        learning_rate: self.learning_rate[c[4]],
                        loss: Objective::Deepcent(LossParams {
                            lambda1: l(0),
                            lambda2: l(1),
                        }),
                        ..DeepCentConfig::default()
                    }),
                    Mode::Competing => Candidate::Competing(CrDeepCentConfig {
                        shared_widths: self.hidden_widths[c[0]].clone(),
                        head_widths: self.head_widths[c[1]].clone(),
                        dropout: self.dropout[c[2]],
                        epochs: self.epochs[c[3]],
                        learning_rate: self.learning_rate[c[4]],
                        loss: CrLossParams {
                            lambda0: l(0),
                            lambda1: l(1),
                            lambda2: l(2),
                            lambda3: l(3),
                            lambda4: l(4),
                        },
                        ..CrDeepCentConfig::default()
                    }),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneEntry {
    pub index: usize,
    pub candidate: Candidate,
    /// Per-fold validation C-index; `None` when undefined on that fold.
    pub fold_c_index: Vec<Option<f64>>,
    pub fold_loss: Vec<Option<f64>>,
    pub mean_c_index: Option<f64>,
    pub sd_c_index: Option<f64>,
    pub mean_loss: Option<f64>,
    pub sd_loss: Option<f64>,
}

impl TuneEntry {
    pub fn disqualified(&self) -> bool {
        self.mean_c_index.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub mode: Mode,
    pub best_index: usize,
    pub entries: Vec<TuneEntry>,
    pub folds: Vec<Vec<usize>>,
}

impl TuneResult {
    pub fn best(&self) -> &Candidate {
        &self.entries[self.best_index].candidate
    }
}

pub(crate) fn mean_sd(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(sd))
}

fn score_cell(candidate: &Candidate, train: &Dataset, valid: &Dataset) -> Result<(Option<f64>, Option<f64>)> {
    let x = valid.covariates();
    let y = valid.times();
    let d = valid.events();
    let trained = match candidate {
        Candidate::Noncompeting(c) => train_single(train, c).map(|m| m.predict_all(x.view())),
        Candidate::Competing(c) => train_competing(train, c).map(|m| m.predict_all(x.view())),
    };
    let predictions = match trained {
        Ok(p) => p?,
        Err(Error::Training(_)) => return Ok((None, None)),
        Err(e) => return Err(e),
    };
    let mode = match candidate {
        Candidate::Noncompeting(_) => Mode::Noncompeting,
        Candidate::Competing(_) => Mode::Competing,
    };
    let report = evaluate(valid, &predictions, mode)?;
    let cs: Vec<f64> = report.causes.iter().filter_map(|c| c.c_index).collect();
    let c = if cs.is_empty() {
        None
    } else {
        Some(cs.iter().sum::<f64>() / cs.len() as f64)
    };
    let n = valid.len().max(1) as f64;
    let loss = match mode {
        Mode::Noncompeting => censored_mse(&y, &d, &predictions[0], 1.0)?,
        Mode::Competing => cr_censored_mse(
            &y,
            &d,
            &predictions[0],
            &predictions[1],
            &CrLossParams::default(),
        )?,
    } / n;
    Ok((c, Some(loss)))
}

/// Score every candidate by k-fold cross validation on `train`.
pub fn evaluate_candidates(
    train: &Dataset,
    candidates: &[Candidate],
    k: usize,
    seed: u64,
) -> Result<TuneResult> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to evaluate".into()));
    }
    let mode = train.mode();
    for c in candidates {
        let ok = matches!(
            (c, mode),
            (Candidate::Noncompeting(_), Mode::Noncompeting) | (Candidate::Competing(_), Mode::Competing)
        );
        if !ok {
            return Err(Error::Config(format!("candidate does not match {mode} data")));
        }
    }
    let folds = kfold_indices(train.len(), k, seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| {
            let rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            (train.subset(&rest), train.subset(&folds[f]))
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let scores = cells
        .par_iter()
        .map(|&(c, f)| {
            let cand = candidates[c].with_seed(derive_seed(seed, f as u64));
            score_cell(&cand, &splits[f].0, &splits[f].1)
        })
        .collect::<Result<Vec<_>>>()?;

    let entries: Vec<TuneEntry> = candidates
        .iter()
        .enumerate()
        .map(|(i, cand)| {
            let cell = &scores[i * k..(i + 1) * k];
            let fold_c: Vec<Option<f64>> = cell.iter().map(|s| s.0).collect();
            let fold_loss: Vec<Option<f64>> = cell.iter().map(|s| s.1).collect();
            let (mean_c, sd_c) = mean_sd(&fold_c);
            let (mean_l, sd_l) = mean_sd(&fold_loss);
            TuneEntry {
                index: i,
                candidate: cand.clone(),
                fold_c_index: fold_c,
                fold_loss,
                mean_c_index: mean_c,
                sd_c_index: sd_c,
                mean_loss: mean_l,
                sd_loss: sd_l,
            }
        })
        .collect();

    let best_index = select_best(&entries)
        .ok_or_else(|| Error::Training("every candidate was disqualified".into()))?;
    Ok(TuneResult {
        mode,
        best_index,
        entries,
        folds,
    })
}

/// Highest mean C-index, then lowest mean loss, then earliest index.
pub(crate) fn select_best(entries: &[TuneEntry]) -> Option<usize> {
    entries
        .iter()
        .filter(|e| !e.disqualified())
        .min_by(|a, b| {
            let ca = a.mean_c_index.unwrap();
            let cb = b.mean_c_index.unwrap();
            cb.total_cmp(&ca)
                .then_with(|| {
                    let la = a.mean_loss.unwrap_or(f64::INFINITY);
                    let lb = b.mean_loss.unwrap_or(f64::INFINITY);
                    la.total_cmp(&lb)
                })
                .then(a.index.cmp(&b.index))
        })
        .map(|e| e.index)
}

pub fn grid_search_cv(train: &Dataset, grid: &Grid, k: usize, seed: u64) -> Result<TuneResult> {
    let candidates = grid.candidates(train.mode(), seed)?;
    evaluate_candidates(train, &candidates, k, seed)
}

fn widths_str(w: &[usize]) -> String {
    if w.is_empty() {
        "none".into()
    } else {
        w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-")
    }
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

/// One row per candidate with its hyperparameters and CV summary.
pub fn write_report<W: Write>(result: &TuneResult, mut w: W) -> Result<()> {
    let lambda_cols = match result.mode {
        Mode::Noncompeting => "lambda1,lambda2",
        Mode::Competing => "lambda0,lambda1,lambda2,lambda3,lambda4",
    };
    writeln!(
        w,
        "index,hidden_widths,head_widths,dropout,epochs,learning_rate,{lambda_cols},mean_c_index,sd_c_index,mean_val_loss,sd_val_loss,defined_folds,selected"
    )?;
    for e in &result.entries {
        let (hidden, head, dropout, epochs, lr, lambdas) = match &e.candidate {
            Candidate::Noncompeting(c) => {
                let l = match c.loss {
                    Objective::Deepcent(p) => vec![p.lambda1, p.lambda2],
                    Objective::Rankdeepsurv { alpha, beta } => vec![alpha, beta],
                };
                (widths_str(&c.hidden_widths), "none".to_string(), c.dropout, c.epochs, c.learning_rate, l)
            }
            Candidate::Competing(c) => (
                widths_str(&c.shared_widths),
                widths_str(&c.head_widths),
                c.dropout,
                c.epochs,
                c.learning_rate,
                vec![c.loss.lambda0, c.loss.lambda1, c.loss.lambda2, c.loss.lambda3, c.loss.lambda4],
            ),
        };
        let lambdas = lambdas.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        writeln!(
            w,
            "{},{hidden},{head},{dropout},{epochs},{lr},{lambdas},{},{},{},{},{},{}",
            e.index,
            opt_str(e.mean_c_index),
            opt_str(e.sd_c_index),
            opt_str(e.mean_loss),
            opt_str(e.sd_loss),
            e.fold_c_index.iter().flatten().count(),
            u8::from(e.index == result.best_index),
        )?;
    }
    Ok(())
}
