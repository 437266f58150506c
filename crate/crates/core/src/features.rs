//! Supervised matrices from a cleansed hourly table.
//!
//! Every feature is a lagged copy of some source column. A source has an
//! availability delay (0 h for day-ahead and weather data, 12 h for the
//! real-time market and anything derived from it) and a feature may only
//! look at hours `t - k` with `k >= max(1, delay)`.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::dataset::{rtm_interval_column, Column, TimeSeriesTable, DAM_COLUMN, RTM_INTERVALS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const RTM_HOURLY_COLUMN: &str = "rtm_lmp";
pub const GAP_COLUMN: &str = "gap";
/// Hours before real-time prices become observable.
pub const RTM_DELAY: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagSpec {
    pub source_column: String,
    pub lags: Vec<usize>,
    #[serde(default)]
    pub availability_delay: usize,
}

impl LagSpec {
    pub fn new(source: impl Into<String>, lags: impl IntoIterator<Item = usize>, delay: usize) -> Self {
        Self { source_column: source.into(), lags: lags.into_iter().collect(), availability_delay: delay }
    }

    fn validate(&self) -> Result<()> {
        let floor = self.availability_delay.max(1);
        match self.lags.iter().find(|&&k| k < floor) {
            Some(&lag) => Err(Error::LagBelowAvailability {
                column: self.source_column.clone(),
                lag,
                delay: self.availability_delay,
            }),
            None => Ok(()),
        }
    }
}

pub fn lag_column_name(source: &str, lag: usize) -> String {
    format!("{source}_lag{lag}")
}

/// True for the real-time series and values derived from it.
pub fn is_rtm_derived(column: &str) -> bool {
    column == RTM_HOURLY_COLUMN || column == GAP_COLUMN || column.starts_with("rtm_lmp_")
}

pub fn default_delay(column: &str) -> usize {
    if is_rtm_derived(column) {
        RTM_DELAY
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Gap,
    Dam,
    Rtm,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Gap => "gap",
            TargetKind::Dam => "dam",
            TargetKind::Rtm => "rtm",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap" => Ok(TargetKind::Gap),
            "dam" => Ok(TargetKind::Dam),
            "rtm" => Ok(TargetKind::Rtm),
            other => Err(Error::BadConfig(format!("unknown target `{other}`"))),
        }
    }
}

/// Origin of one feature column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSource {
    pub source_column: String,
    pub lag: usize,
    pub availability_delay: usize,
}

/// Appends `<source>_lag<k>` columns. Cells whose source hour precedes the
/// table start are `NaN` and the row is dropped when a matrix is built.
pub fn add_lags(table: &TimeSeriesTable, specs: &[LagSpec]) -> Result<TimeSeriesTable> {
    table.ensure_hourly()?;
    let mut out = table.clone();
    for spec in specs {
        spec.validate()?;
        let source = table.values(&spec.source_column)?;
        for &k in &spec.lags {
            let values = (0..table.len())
                .map(|t| if t >= k { source[t - k] } else { f64::NAN })
                .collect();
            out.push_column(Column::new(lag_column_name(&spec.source_column, k), values, "lag"))?;
        }
    }
    Ok(out)
}

fn rtm_hourly_mean(table: &TimeSeriesTable) -> Result<Vec<f64>> {
    if let Some(c) = table.column(RTM_HOURLY_COLUMN) {
        return Ok(c.values.clone());
    }
    let intervals: Vec<&[f64]> = (1..=RTM_INTERVALS)
        .map(|k| table.values(&rtm_interval_column(k)))
        .collect::<Result<_>>()?;
    Ok((0..table.len())
        .map(|t| intervals.iter().map(|s| s[t]).sum::<f64>() / RTM_INTERVALS as f64)
        .collect())
}

/// The target series: `dam`, the hourly real-time mean, or their gap
/// `dam - rtm`.
pub fn build_target(table: &TimeSeriesTable, kind: TargetKind) -> Result<Vec<f64>> {
    match kind {
        TargetKind::Dam => Ok(table.values(DAM_COLUMN)?.to_vec()),
        TargetKind::Rtm => rtm_hourly_mean(table),
        TargetKind::Gap => {
            if let Some(c) = table.column(GAP_COLUMN) {
                return Ok(c.values.clone());
            }
            let dam = table.values(DAM_COLUMN)?;
            let rtm = rtm_hourly_mean(table)?;
            Ok(dam.iter().zip(&rtm).map(|(d, r)| d - r).collect())
        }
    }
}

/// Adds the hourly real-time mean and the gap when the table carries the
/// day-ahead price and all twelve interval columns. No-op otherwise.
pub fn add_derived_columns(table: &TimeSeriesTable) -> Result<TimeSeriesTable> {
    let mut out = table.clone();
    let has_intervals = (1..=RTM_INTERVALS).all(|k| table.column(&rtm_interval_column(k)).is_some());
    if out.column(RTM_HOURLY_COLUMN).is_none() && has_intervals {
        let rtm = rtm_hourly_mean(table)?;
        out.push_column(Column::new(RTM_HOURLY_COLUMN, rtm, "derived"))?;
    }
    if out.column(GAP_COLUMN).is_none()
        && out.column(DAM_COLUMN).is_some()
        && out.column(RTM_HOURLY_COLUMN).is_some()
    {
        let gap = build_target(&out, TargetKind::Gap)?;
        out.push_column(Column::new(GAP_COLUMN, gap, "derived"))?;
    }
    Ok(out)
}

/// Which lags to build and for which target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Explicit lag menu. Empty means [`FeatureConfig::default_lags`].
    pub lags: Vec<LagSpec>,
    /// Lags applied to every exogenous (non-price) column of the table.
    pub exogenous_lags: Vec<usize>,
    pub target: TargetKind,
    pub train_fraction: f64,
    pub lookback: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lags: Vec::new(),
            exogenous_lags: vec![1],
            target: TargetKind::Gap,
            train_fraction: 0.9,
            lookback: 24,
        }
    }
}

impl FeatureConfig {
    /// Day-ahead lags 1..=48; each real-time interval and the gap at 12..=48.
    pub fn default_lags() -> Vec<LagSpec> {
        let mut specs = vec![LagSpec::new(DAM_COLUMN, 1..=48, 0)];
        for k in 1..=RTM_INTERVALS {
            specs.push(LagSpec::new(rtm_interval_column(k), RTM_DELAY..=48, RTM_DELAY));
        }
        specs.push(LagSpec::new(GAP_COLUMN, RTM_DELAY..=48, RTM_DELAY));
        specs
    }

    /// Full lag menu for `table`: the price lags plus the exogenous columns.
    pub fn resolve(&self, table: &TimeSeriesTable) -> Vec<LagSpec> {
        let mut specs = if self.lags.is_empty() { Self::default_lags() } else { self.lags.clone() };
        if !self.exogenous_lags.is_empty() {
            for c in &table.columns {
                if c.name == DAM_COLUMN || is_rtm_derived(&c.name) {
                    continue;
                }
                if specs.iter().any(|s| s.source_column == c.name) {
                    continue;
                }
                specs.push(LagSpec::new(c.name.clone(), self.exogenous_lags.iter().copied(), 0));
            }
        }
        specs
    }
}

/// Dense feature matrix with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub features: Matrix,
    pub target: Vec<f64>,
    pub feature_names: Vec<String>,
    pub sources: Vec<FeatureSource>,
    pub target_name: TargetKind,
    pub timestamps: Vec<NaiveDateTime>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn select(&self, idx: &[usize]) -> SupervisedDataset {
        SupervisedDataset {
            features: self.features.select_rows(idx),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            feature_names: self.feature_names.clone(),
            sources: self.sources.clone(),
            target_name: self.target_name,
            timestamps: idx.iter().map(|&i| self.timestamps[i]).collect(),
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> SupervisedDataset {
        self.select(&(start..end).collect::<Vec<_>>())
    }
}

/// Lags every spec, builds the target, and keeps only rows whose lags all
/// fall inside the table.
pub fn build_supervised(
    table: &TimeSeriesTable,
    specs: &[LagSpec],
    target: TargetKind,
) -> Result<SupervisedDataset> {
    table.ensure_hourly()?;
    let table = add_derived_columns(table)?;
    let y = build_target(&table, target)?;

    let mut names = BTreeSet::new();
    let mut sources = Vec::new();
    let mut columns: Vec<(&[f64], usize)> = Vec::new();
    for spec in specs {
        spec.validate()?;
        let src = table.values(&spec.source_column)?;
        for &k in &spec.lags {
            let name = lag_column_name(&spec.source_column, k);
            if !names.insert(name.clone()) {
                return Err(Error::DuplicateColumn(name));
            }
            sources.push(FeatureSource {
                source_column: spec.source_column.clone(),
                lag: k,
                availability_delay: spec.availability_delay,
            });
            columns.push((src, k));
        }
    }
    if columns.is_empty() {
        return Err(Error::BadConfig("no feature columns requested".into()));
    }
    let max_lag = columns.iter().map(|(_, k)| *k).max().unwrap_or(0);
    if max_lag >= table.len() {
        return Err(Error::TooFewRows(format!(
            "largest lag {max_lag} needs more than {} rows",
            table.len()
        )));
    }
    let n = table.len() - max_lag;
    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    for t in max_lag..table.len() {
        data.extend(columns.iter().map(|(src, k)| src[t - k]));
    }
    let feature_names = sources
        .iter()
        .map(|s| lag_column_name(&s.source_column, s.lag))
        .collect();
    Ok(SupervisedDataset {
        features: Matrix::from_vec(n, d, data)?,
        target: y[max_lag..].to_vec(),
        feature_names,
        sources,
        target_name: target,
        timestamps: table.timestamps[max_lag..].to_vec(),
    })
}

/// Per-column min-max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &Matrix) -> Result<Self> {
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        let mut min = rows.row(0).to_vec();
        let mut max = min.clone();
        for r in rows.iter_rows().skip(1) {
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Single-column scaler for a target vector.
    pub fn fit_vector(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { min: vec![min], max: vec![max] })
    }

    pub fn n_columns(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (v - self.min[j]) / range
        } else {
            0.0
        }
    }

    #[inline]
    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            v * range + self.min[j]
        } else {
            self.min[j]
        }
    }

    /// Out-of-range rows map outside `[0, 1]`; nothing is clipped.
    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        rows.ensure_cols(self.n_columns())?;
        let mut out = rows.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.scale(j, *v);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, rows: &Matrix) -> Result<Matrix> {
        rows.ensure_cols(self.n_columns())?;
        let mut out = rows.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.unscale(j, *v);
            }
        }
        Ok(out)
    }

    pub fn transform_vector(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.scale(0, v)).collect()
    }

    pub fn inverse_vector(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.unscale(0, v)).collect()
    }
}

/// Number of training rows for a chronological split.
pub fn split_point(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::BadConfig(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::TooFewRows(format!(
            "{n} rows at fraction {train_fraction} leaves an empty side"
        )));
    }
    Ok(n_train)
}

/// Earliest `floor(n * fraction)` rows train, the rest test. No shuffling.
pub fn split_train_test(
    dataset: &SupervisedDataset,
    train_fraction: f64,
) -> Result<(SupervisedDataset, SupervisedDataset)> {
    let n_train = split_point(dataset.len(), train_fraction)?;
    Ok((dataset.slice(0, n_train), dataset.slice(n_train, dataset.len())))
}

/// Sliding windows for the recurrent learner. Sample `i` holds rows
/// `[r - lookback, r)` and the target of row `r = target_rows[i]`. Windows
/// are views into the shared row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub rows: Arc<Matrix>,
    pub targets: Vec<f64>,
    pub target_rows: Vec<usize>,
    pub lookback: usize,
    pub n_features: usize,
}

impl SequenceDataset {
    pub fn from_rows(features: &Matrix, targets: &[f64], lookback: usize) -> Result<Self> {
        if lookback == 0 {
            return Err(Error::BadConfig("lookback must be at least 1".into()));
        }
        if features.rows() != targets.len() {
            return Err(Error::LengthMismatch { left: features.rows(), right: targets.len() });
        }
        let n = features.rows();
        if lookback >= n {
            return Err(Error::LookbackTooLong { lookback, rows: n });
        }
        Ok(Self {
            rows: Arc::new(features.clone()),
            targets: targets[lookback..].to_vec(),
            target_rows: (lookback..n).collect(),
            lookback,
            n_features: features.cols(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// The `lookback x d` block of sample `i`, row-major.
    pub fn window(&self, i: usize) -> &[f64] {
        let r = self.target_rows[i];
        let d = self.n_features;
        &self.rows.as_slice()[(r - self.lookback) * d..r * d]
    }

    pub fn subset(&self, idx: &[usize]) -> SequenceDataset {
        SequenceDataset {
            rows: Arc::clone(&self.rows),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            target_rows: idx.iter().map(|&i| self.target_rows[i]).collect(),
            lookback: self.lookback,
            n_features: self.n_features,
        }
    }
}

pub fn to_sequences(dataset: &SupervisedDataset, lookback: usize) -> Result<SequenceDataset> {
    SequenceDataset::from_rows(&dataset.features, &dataset.target, lookback)
}

/// Causality audit. Returns the names of features whose lag is shorter than
/// `max(1, delay)`, where the delay is the larger of the declared one and the
/// default for that source.
pub fn causality_violations(dataset: &SupervisedDataset) -> Vec<String> {
    dataset
        .sources
        .iter()
        .zip(&dataset.feature_names)
        .filter(|(s, _)| {
            let delay = s.availability_delay.max(default_delay(&s.source_column));
            s.lag < delay.max(1)
        })
        .map(|(_, n)| n.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthConfig};
    use chrono::Duration;

    fn table(cols: &[(&str, Vec<f64>)]) -> TimeSeriesTable {
        let n = cols[0].1.len();
        let t0 = crate::dataset::parse_datetime("2017-01-01T00:00").unwrap();
        let stamps = (0..n).map(|h| t0 + Duration::hours(h as i64)).collect();
        let columns = cols.iter().map(|(n, v)| Column::new(*n, v.clone(), "t")).collect();
        TimeSeriesTable::new(stamps, columns).unwrap()
    }

    fn ramp(n: usize, base: f64) -> Vec<f64> {
        (0..n).map(|i| base + i as f64).collect()
    }

    #[test]
    fn dam_lags_make_48_columns() {
        let t = table(&[(DAM_COLUMN, ramp(100, 0.0))]);
        let out = add_lags(&t, &[LagSpec::new(DAM_COLUMN, 1..=48, 0)]).unwrap();
        assert_eq!(out.columns.len(), 49);
        // original columns are a prefix
        assert_eq!(out.columns[0], t.columns[0]);
        let lag7 = out.values("dam_lmp_lag7").unwrap();
        assert!(lag7[6].is_nan());
        assert_eq!(lag7[50], 43.0);
    }

    #[test]
    fn rtm_lag_24_allowed_lag_6_rejected() {
        let t = table(&[("rtm_lmp_1", ramp(60, 100.0))]);
        let out = add_lags(&t, &[LagSpec::new("rtm_lmp_1", [24], RTM_DELAY)]).unwrap();
        assert_eq!(out.values("rtm_lmp_1_lag24").unwrap()[30], 106.0);
        let err = add_lags(&t, &[LagSpec::new("rtm_lmp_1", [6], RTM_DELAY)]).unwrap_err();
        assert!(matches!(err, Error::LagBelowAvailability { lag: 6, delay: 12, .. }));
        let err = add_lags(&t, &[LagSpec::new("x", [0], 0)]);
        assert!(err.is_err());
    }

    #[test]
    fn gap_definition() {
        let mut cols = vec![(DAM_COLUMN, vec![40.0, 50.0])];
        let names: Vec<String> = (1..=RTM_INTERVALS).map(rtm_interval_column).collect();
        for n in &names {
            cols.push((n.as_str(), vec![36.0, 50.0]));
        }
        let t = table(&cols);
        assert_eq!(build_target(&t, TargetKind::Gap).unwrap(), vec![4.0, 0.0]);
        assert_eq!(build_target(&t, TargetKind::Rtm).unwrap(), vec![36.0, 50.0]);
        let bare = table(&[("x", vec![1.0])]);
        assert!(matches!(build_target(&bare, TargetKind::Gap), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn synthetic_gap_mean_is_linear() {
        let t = synthesize(&SynthConfig { hours: 2000, ..Default::default() }).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let gap = build_target(&t, TargetKind::Gap).unwrap();
        let dam = build_target(&t, TargetKind::Dam).unwrap();
        let rtm = build_target(&t, TargetKind::Rtm).unwrap();
        assert!((mean(&gap) - (mean(&dam) - mean(&rtm))).abs() < 1e-9);
    }

    #[test]
    fn scaler_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 7.0], vec![5.0, 7.0], vec![10.0, 7.0]]).unwrap();
        let s = MinMaxScaler::fit(&m).unwrap();
        let t = s.transform(&m).unwrap();
        assert_eq!(t.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.column(1), vec![0.0, 0.0, 0.0]);
        let test = Matrix::from_rows(&[vec![12.0, 7.0]]).unwrap();
        assert!((s.transform(&test).unwrap().get(0, 0) - 1.2).abs() < 1e-15);
        assert!(matches!(MinMaxScaler::fit(&Matrix::zeros(0, 2)), Err(Error::EmptyInput)));
    }

    #[test]
    fn split_examples() {
        let t = table(&[(DAM_COLUMN, ramp(101, 0.0))]);
        let ds = build_supervised(&t, &[LagSpec::new(DAM_COLUMN, [1], 0)], TargetKind::Dam).unwrap();
        assert_eq!(ds.len(), 100);
        let (tr, te) = split_train_test(&ds, 0.9).unwrap();
        assert_eq!((tr.len(), te.len()), (90, 10));
        assert!(tr.timestamps.last().unwrap() < te.timestamps.first().unwrap());
        let small = ds.slice(0, 10);
        let (a, b) = split_train_test(&small, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        assert!(matches!(split_train_test(&small, 0.05), Err(Error::TooFewRows(_))));
        assert!(split_train_test(&small, 1.0).is_err());
    }

    #[test]
    fn sequences_count_and_content() {
        let t = table(&[(DAM_COLUMN, ramp(31, 0.0))]);
        let ds = build_supervised(&t, &[LagSpec::new(DAM_COLUMN, [1], 0)], TargetKind::Dam).unwrap();
        assert_eq!(ds.len(), 30);
        let seq = to_sequences(&ds, 24).unwrap();
        assert_eq!(seq.len(), 6);
        assert_eq!(seq.window(0).len(), 24);
        let one = to_sequences(&ds, 1).unwrap();
        for i in 0..one.len() {
            assert_eq!(one.window(i), ds.features.row(i));
        }
        assert!(matches!(to_sequences(&ds, 30), Err(Error::LookbackTooLong { .. })));
    }

    #[test]
    fn flattened_windows_agree_with_lag_columns() {
        let t = table(&[(DAM_COLUMN, (0..80).map(|i| (i as f64 * 0.37).sin()).collect())]);
        let lookback = 5;
        let ds = build_supervised(&t, &[LagSpec::new(DAM_COLUMN, 1..=lookback + 1, 0)], TargetKind::Dam)
            .unwrap();
        let seq = to_sequences(&ds, lookback).unwrap();
        for i in 0..seq.len() {
            let row = seq.target_rows[i];
            let w = seq.window(i);
            // window step j holds dam_lag1 at row (row - lookback + j),
            // which is dam_lag(lookback - j + 1) at the target row
            for j in 0..lookback {
                let in_window = w[j * ds.n_features()];
                let lag = lookback - j + 1;
                assert_eq!(in_window, ds.features.get(row, lag - 1));
            }
        }
    }

    #[test]
    fn default_menu_is_causal() {
        let t = synthesize(&SynthConfig { hours: 200, ..Default::default() }).unwrap();
        let specs = FeatureConfig::default().resolve(&t);
        let ds = build_supervised(&t, &specs, TargetKind::Gap).unwrap();
        assert!(causality_violations(&ds).is_empty());
        assert_eq!(ds.len(), 200 - 48);
        assert_eq!(ds.feature_names.iter().filter(|n| n.starts_with("dam_lmp_lag")).count(), 48);
    }
}
