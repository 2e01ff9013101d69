//! Survival datasets, CSV ingestion/emission and resampling splits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::fmt_f64;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Event indicator in {0, 1}.
    Noncompeting,
    /// Event indicator in {0, 1, 2}.
    Competing,
}

impl Mode {
    pub fn max_event(self) -> u8 {
        match self {
            Mode::Noncompeting => 1,
            Mode::Competing => 2,
        }
    }

    pub fn causes(self) -> &'static [u8] {
        match self {
            Mode::Noncompeting => &[1],
            Mode::Competing => &[1, 2],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Noncompeting => "noncompeting",
            Mode::Competing => "competing",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noncompeting" | "single" => Ok(Mode::Noncompeting),
            "competing" => Ok(Mode::Competing),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub x: Vec<f64>,
    /// Observed time, `min` of the latent event and censoring times.
    pub y: f64,
    /// 0 = censored, k = event of cause k.
    pub delta: u8,
}

/// Latent times behind one simulated record.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTimes {
    /// One entry per cause.
    pub event: Vec<f64>,
    pub censor: f64,
}

impl LatentTimes {
    pub fn observed(&self) -> f64 {
        self.event.iter().copied().fold(self.censor, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    covariate_names: Vec<String>,
    mode: Mode,
    true_times: Option<Vec<LatentTimes>>,
}

impl Dataset {
    pub fn new(
        records: Vec<SurvivalRecord>,
        covariate_names: Vec<String>,
        mode: Mode,
    ) -> Result<Self> {
        let p = covariate_names.len();
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != p {
                return Err(Error::Shape(format!(
                    "record {i} has {} covariates, expected {p}",
                    r.x.len()
                )));
            }
            if !(r.y > 0.0) || !r.y.is_finite() {
                return Err(Error::Input(format!("record {i}: time {} is not positive", r.y)));
            }
            if r.delta > mode.max_event() {
                return Err(Error::Input(format!(
                    "record {i}: event {} invalid for {mode} data",
                    r.delta
                )));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("record {i}: non-finite covariate")));
            }
        }
        Ok(Dataset {
            records,
            covariate_names,
            mode,
            true_times: None,
        })
    }

    /// Attach latent times; every record must satisfy `y = min(latent)` and
    /// carry one event time per cause.
    pub fn with_true_times(mut self, latent: Vec<LatentTimes>) -> Result<Self> {
        if latent.len() != self.records.len() {
            return Err(Error::Shape(format!(
                "{} latent rows for {} records",
                latent.len(),
                self.records.len()
            )));
        }
        let causes = self.mode.causes().len();
        for (i, (r, l)) in self.records.iter().zip(&latent).enumerate() {
            if l.event.len() != causes {
                return Err(Error::Shape(format!(
                    "record {i}: {} latent event times, expected {causes}",
                    l.event.len()
                )));
            }
            let m = l.observed();
            if (m - r.y).abs() > 1e-12 * r.y.abs().max(1.0) {
                return Err(Error::Input(format!(
                    "record {i}: observed time {} != min latent time {m}",
                    r.y
                )));
            }
        }
        self.true_times = Some(latent);
        Ok(self)
    }

    /// Reinterpret a noncompeting dataset as competing (the {0,1} alphabet is
    /// a subset of {0,1,2}). The reverse requires no cause-2 events.
    pub fn with_mode(mut self, mode: Mode) -> Result<Self> {
        if self.records.iter().any(|r| r.delta > mode.max_event()) {
            return Err(Error::ModeMismatch {
                model: mode.to_string(),
                data: self.mode.to_string(),
            });
        }
        if let Some(tt) = &self.true_times {
            if tt.first().is_some_and(|l| l.event.len() != mode.causes().len()) {
                return Err(Error::Shape("latent times do not fit the requested mode".into()));
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn true_times(&self) -> Option<&[LatentTimes]> {
        self.true_times.as_deref()
    }

    /// True event times of one cause, if latent times are attached.
    pub fn true_event_times(&self, cause: u8) -> Option<Vec<f64>> {
        let idx = usize::from(cause).checked_sub(1)?;
        self.true_times
            .as_ref()
            .map(|tt| tt.iter().map(|l| l.event[idx]).collect())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn events(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.delta).collect()
    }

    /// `[n × p]` covariate matrix.
    pub fn covariates(&self) -> Array2<f64> {
        let p = self.n_covariates();
        Array2::from_shape_fn((self.len(), p), |(i, j)| self.records[i].x[j])
    }

    pub fn event_count(&self, cause: u8) -> usize {
        self.records.iter().filter(|r| r.delta == cause).count()
    }

    pub fn censoring_proportion(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.event_count(0) as f64 / self.len() as f64
    }

    /// Records at `indices`, in that order; latent times follow along.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
            mode: self.mode,
            true_times: self
                .true_times
                .as_ref()
                .map(|tt| indices.iter().map(|&i| tt[i].clone()).collect()),
        }
    }
}

/// Seeded random split into `(train, test)` with `round(n · fraction)`
/// training records.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let n_train = (dataset.len() as f64 * fraction).round() as usize;
    let (train, test) = idx.split_at(n_train);
    Ok((dataset.subset(train), dataset.subset(test)))
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most 1.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need k >= 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds exceed {n} records")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// `k` disjoint folds of `dataset`.
pub fn kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Dataset>> {
    Ok(kfold_indices(dataset.len(), k, seed)?
        .iter()
        .map(|f| dataset.subset(f))
        .collect())
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_err(line, format!("row has {len} fields, expected {expected_len}")),
        other => parse_err(line, format!("{other:?}")),
    }
}

/// Read a dataset: header row with `time`, `event` and covariate columns.
/// Mode is competing when any event equals 2.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "missing header"));
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let time_col = find("time").ok_or_else(|| parse_err(1, "header lacks `time` column"))?;
    let event_col = find("event").ok_or_else(|| parse_err(1, "header lacks `event` column"))?;
    let cov_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != time_col && c != event_col)
        .collect();
    let names: Vec<String> = cov_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |c: usize| -> Result<f64> {
            let cell = &row[c];
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell `{cell}` in column `{}`", &header[c])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value in column `{}`", &header[c])));
            }
            Ok(v)
        };
        let y = num(time_col)?;
        if y <= 0.0 {
            return Err(parse_err(line, format!("time {y} is not positive")));
        }
        let event_cell = &row[event_col];
        let delta: u8 = match event_cell.parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            Ok(v) if v == 2.0 => 2,
            _ => {
                return Err(parse_err(
                    line,
                    format!("event `{event_cell}` not in {{0, 1, 2}}"),
                ))
            }
        };
        let x = cov_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord { x, y, delta });
    }
    let mode = if records.iter().any(|r| r.delta == 2) {
        Mode::Competing
    } else {
        Mode::Noncompeting
    };
    Dataset::new(records, names, mode)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    emit_csv(dataset, std::io::BufWriter::new(file))
}

pub fn emit_csv<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend(dataset.covariate_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in &dataset.records {
        let mut row = vec![fmt_f64(r.y), r.delta.to_string()];
        row.extend(r.x.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the latent-time sidecar: `id,true_time[1,true_time2],censor_time`.
pub fn write_truth_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let tt = dataset
        .true_times()
        .ok_or_else(|| Error::Input("dataset carries no true times".into()))?;
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    let header: &[&str] = match dataset.mode() {
        Mode::Noncompeting => &["id", "true_time", "censor_time"],
        Mode::Competing => &["id", "true_time1", "true_time2", "censor_time"],
    };
    w.write_record(header).map_err(csv_err)?;
    for (i, l) in tt.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(l.event.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(l.censor));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sidecar written by [`write_truth_csv`] and attach it.
pub fn attach_truth_csv(dataset: Dataset, path: impl AsRef<Path>) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    let causes = header.len().saturating_sub(2);
    if causes == 0 || header.get(0) != Some("id") {
        return Err(parse_err(1, "truth sidecar header must be `id,true_time...,censor_time`"));
    }
    let mut latent = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let vals = (1..row.len())
            .map(|c| {
                row[c]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("non-numeric cell `{}`", &row[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        latent.push(LatentTimes {
            event: vals[..causes].to_vec(),
            censor: vals[causes],
        });
    }
    let dataset = if causes == 2 && dataset.mode() == Mode::Noncompeting {
        dataset.with_mode(Mode::Competing)?
    } else {
        dataset
    };
    dataset.with_true_times(latent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| SurvivalRecord {
                x: vec![i as f64, (i as f64).sin()],
                y: 1.0 + i as f64 / 7.0,
                delta: (i % 2) as u8,
            })
            .collect();
        Dataset::new(records, vec!["a".into(), "b".into()], Mode::Noncompeting).unwrap()
    }

    #[test]
    fn header_with_two_rows() {
        let text = "time,event,x1,x2\n1.5,1,0.1,0.2\n2.5,0,-1,3\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_covariates(), 2);
        assert_eq!(ds.mode(), Mode::Noncompeting);
        assert_eq!(ds.records()[1].x, vec![-1.0, 3.0]);
    }

    #[test]
    fn covariate_columns_follow_header_order() {
        let text = "z,event,time,a\n5,2,1.0,6\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.covariate_names(), ["z", "a"]);
        assert_eq!(ds.records()[0].x, vec![5.0, 6.0]);
        assert_eq!(ds.mode(), Mode::Competing);
    }

    #[test]
    fn event_three_is_rejected_with_line() {
        let text = "time,event,x1\n1.0,1,0\n2.0,3,0\n";
        match read_csv(text.as_bytes()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains('3'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        let cases = [
            ("time,x1\n1.0,0\n", 1),
            ("time,event,x1\n1.0,1,abc\n", 2),
            ("time,event,x1\n0.0,1,1\n", 2),
            ("time,event,x1\n-2.0,1,1\n", 2),
            ("time,event,x1\n1.0,1,1\n2.0,0\n", 3),
            ("time,event,x1\n1.0,1,\n", 2),
        ];
        for (text, want) in cases {
            match read_csv(text.as_bytes()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let ds = toy(9);
        let mut buf = Vec::new();
        emit_csv(&ds, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn five_folds_partition_hundred() {
        let folds = kfold_indices(100, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 20));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(folds, kfold_indices(100, 5, 3).unwrap());
    }

    #[test]
    fn uneven_folds_differ_by_one() {
        let folds = kfold_indices(23, 5, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap(), 1);
        assert!(matches!(kfold_indices(3, 5, 0), Err(Error::Config(_))));
        assert!(matches!(kfold_indices(3, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn two_thirds_split() {
        let ds = toy(144);
        let (train, test) = split(&ds, 2.0 / 3.0, 5).unwrap();
        assert_eq!((train.len(), test.len()), (96, 48));
        let (t2, _) = split(&ds, 2.0 / 3.0, 5).unwrap();
        assert_eq!(train, t2);
        assert!(split(&ds, 1.0, 5).is_err());
    }

    #[test]
    fn mode_checks() {
        let rec = SurvivalRecord {
            x: vec![],
            y: 1.0,
            delta: 2,
        };
        assert!(Dataset::new(vec![rec.clone()], vec![], Mode::Noncompeting).is_err());
        let ds = Dataset::new(vec![rec], vec![], Mode::Competing).unwrap();
        assert!(matches!(
            ds.with_mode(Mode::Noncompeting),
            Err(Error::ModeMismatch { .. })
        ));
    }

    #[test]
    fn true_times_must_reconstruct_observed() {
        let ds = toy(2);
        let bad = vec![
            LatentTimes { event: vec![5.0], censor: 1.0 },
            LatentTimes { event: vec![5.0], censor: 9.0 },
        ];
        assert!(ds.clone().with_true_times(bad).is_err());
        let ok = vec![
            LatentTimes { event: vec![1.0], censor: 3.0 },
            LatentTimes { event: vec![5.0], censor: 1.0 + 1.0 / 7.0 },
        ];
        let ds = ds.with_true_times(ok).unwrap();
        assert_eq!(ds.true_event_times(1).unwrap(), vec![1.0, 5.0]);
    }
}
