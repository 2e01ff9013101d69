//! Evaluation statistics: Harrell's C-index and squared-error summaries.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::losses::comparable_pairs;

/// Fraction of comparable pairs `(i, j)` (with `y[i] < y[j]`, `delta[i] = k`)
/// for which `yhat[i] < yhat[j]`. Prediction ties count as discordant.
pub fn harrell_c(y: &[f64], delta: &[u8], yhat: &[f64], event_of_interest: u8) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} records",
            yhat.len(),
            y.len()
        )));
    }
    let pairs = comparable_pairs(y, delta, event_of_interest)?;
    if pairs.is_empty() {
        return Err(Error::Undefined("C-index has no comparable pairs".into()));
    }
    let concordant = pairs.iter().filter(|&(i, j)| yhat[i] < yhat[j]).count();
    Ok(concordant as f64 / pairs.len() as f64)
}

/// Mean squared error against known event times.
pub fn mse_true(true_times: &[f64], yhat: &[f64]) -> Result<f64> {
    if true_times.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} true times",
            yhat.len(),
            true_times.len()
        )));
    }
    if true_times.is_empty() {
        return Err(Error::Undefined("MSE over zero records".into()));
    }
    let sum: f64 = true_times
        .iter()
        .zip(yhat)
        .map(|(t, p)| (p - t) * (p - t))
        .sum();
    Ok(sum / true_times.len() as f64)
}

/// Mean squared error over records with an observed event of the given cause.
pub fn mse_events(y: &[f64], delta: &[u8], yhat: &[f64], event_of_interest: u8) -> Result<f64> {
    if y.len() != delta.len() || y.len() != yhat.len() {
        return Err(Error::Shape("time, event and prediction lengths differ".into()));
    }
    let (sum, count) = y
        .iter()
        .zip(delta)
        .zip(yhat)
        .filter(|((_, &d), _)| d == event_of_interest)
        .fold((0.0, 0usize), |(s, c), ((t, _), p)| (s + (p - t) * (p - t), c + 1));
    if count == 0 {
        return Err(Error::Undefined(format!("no events of cause {event_of_interest}")));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MseKind {
    /// Against simulated true event times, all records.
    True,
    /// Against observed times, event records only.
    Events,
}

/// Metrics for one cause. `None` marks an undefined statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseReport {
    pub cause: u8,
    pub c_index: Option<f64>,
    pub mse: Option<f64>,
    pub mse_kind: MseKind,
    pub n_comparable_pairs: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub n_records: usize,
    pub causes: Vec<CauseReport>,
}

impl EvalReport {
    pub fn cause(&self, k: u8) -> Option<&CauseReport> {
        self.causes.iter().find(|c| c.cause == k)
    }
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per-cause C-index and MSE. `predictions` holds one vector per cause of
/// `mode`. True-time MSE is used when the dataset carries latent times.
pub fn evaluate(dataset: &Dataset, predictions: &[Vec<f64>], mode: Mode) -> Result<EvalReport> {
    let causes = mode.causes();
    if predictions.len() != causes.len() {
        return Err(Error::Shape(format!(
            "{} prediction vectors for {mode} evaluation",
            predictions.len()
        )));
    }
    if mode == Mode::Noncompeting && dataset.mode() == Mode::Competing {
        return Err(Error::ModeMismatch {
            model: mode.to_string(),
            data: dataset.mode().to_string(),
        });
    }
    let y = dataset.times();
    let delta = dataset.events();
    let mut out = Vec::with_capacity(causes.len());
    for (&k, yhat) in causes.iter().zip(predictions) {
        let pairs = comparable_pairs(&y, &delta, k)?;
        let c_index = defined(harrell_c(&y, &delta, yhat, k))?;
        let (mse, mse_kind) = match dataset.true_event_times(k) {
            Some(t) => (defined(mse_true(&t, yhat))?, MseKind::True),
            None => (defined(mse_events(&y, &delta, yhat, k))?, MseKind::Events),
        };
        out.push(CauseReport {
            cause: k,
            c_index,
            mse,
            mse_kind,
            n_comparable_pairs: pairs.len(),
            n_events: dataset.event_count(k),
        });
    }
    Ok(EvalReport {
        mode,
        n_records: dataset.len(),
        causes: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;

    #[test]
    fn c_index_examples() {
        assert_eq!(harrell_c(&[1.0, 2.0], &[1, 1], &[1.5, 2.5], 1).unwrap(), 1.0);
        assert_eq!(harrell_c(&[1.0, 2.0], &[1, 1], &[2.5, 1.5], 1).unwrap(), 0.0);
        let c = harrell_c(&[1.0, 2.0, 3.0], &[1, 1, 1], &[3.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(c, 1.0 / 3.0);
        // tie in predictions scores 0
        assert_eq!(harrell_c(&[1.0, 2.0], &[1, 1], &[2.0, 2.0], 1).unwrap(), 0.0);
        assert!(matches!(
            harrell_c(&[1.0, 2.0], &[0, 0], &[1.0, 2.0], 1),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_true(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_true(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert_eq!(
            mse_events(&[1.0, 2.0, 3.0], &[1, 0, 1], &[2.0, 9.0, 3.0], 1).unwrap(),
            0.5
        );
        assert!(matches!(
            mse_events(&[1.0, 2.0], &[0, 0], &[1.0, 1.0], 1),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn competing_report_flags_missing_cause() {
        let records = vec![
            SurvivalRecord { x: vec![0.0], y: 1.0, delta: 1 },
            SurvivalRecord { x: vec![0.0], y: 2.0, delta: 0 },
            SurvivalRecord { x: vec![0.0], y: 3.0, delta: 1 },
        ];
        let ds = Dataset::new(records, vec!["a".into()], Mode::Competing).unwrap();
        let p = vec![vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]];
        let r = evaluate(&ds, &p, Mode::Competing).unwrap();
        let c1 = r.cause(1).unwrap();
        assert_eq!(c1.c_index, Some(1.0));
        assert_eq!(c1.n_comparable_pairs, 2);
        assert_eq!(c1.mse_kind, MseKind::Events);
        let c2 = r.cause(2).unwrap();
        assert_eq!(c2.c_index, None);
        assert_eq!(c2.mse, None);
        assert_eq!(c2.n_events, 0);
        assert!(evaluate(&ds, &p[..1], Mode::Competing).is_err());
    }
}
