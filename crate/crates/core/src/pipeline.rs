//! End-to-end flow from a cleansed table to scaled features, trained
//! models, forecasts and distribution studies.

use chrono::NaiveDateTime;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{format_datetime, rtm_interval_column, TimeSeriesTable, DAM_COLUMN, RTM_INTERVALS};
use crate::error::{Error, Result};
use crate::eval::{self, ComparisonSummary, GapComparison, MetricReport};
use crate::features::{
    build_supervised, split_point, FeatureConfig, LagSpec, MinMaxScaler, SupervisedDataset, TargetKind, GAP_COLUMN,
    RTM_DELAY,
};
use crate::forest::{fit_forest, ForestModel, ForestParams};
use crate::learner::{fit_rows, predict_rows, LearnerKind, LearnerParams, TrainedModel};
use crate::matrix::Matrix;
use crate::tune::{grid_search, CvOptions, CvResult};

/// One lag per price source at its earliest availability. The recurrent
/// learner gets its history from the lookback window instead.
pub fn sequence_lags() -> Vec<LagSpec> {
    let mut specs = vec![LagSpec::new(DAM_COLUMN, [1], 0)];
    for k in 1..=RTM_INTERVALS {
        specs.push(LagSpec::new(rtm_interval_column(k), [RTM_DELAY], RTM_DELAY));
    }
    specs.push(LagSpec::new(GAP_COLUMN, [RTM_DELAY], RTM_DELAY));
    specs
}

/// Lag menu for a learner: the configured one, or the compact sequence menu
/// for the LSTM when none is configured.
pub fn lag_specs(config: &FeatureConfig, kind: LearnerKind, table: &TimeSeriesTable) -> Vec<LagSpec> {
    if kind == LearnerKind::Lstm && config.lags.is_empty() {
        FeatureConfig { lags: sequence_lags(), ..config.clone() }.resolve(table)
    } else {
        config.resolve(table)
    }
}

/// Features and target, plus their copies scaled with train-split scalers.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: SupervisedDataset,
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_scaler: MinMaxScaler,
    pub target_scaler: MinMaxScaler,
    pub n_train: usize,
}

impl Prepared {
    pub fn train_rows(&self, first_usable: usize) -> Vec<usize> {
        (first_usable.min(self.n_train)..self.n_train).collect()
    }

    pub fn test_rows(&self) -> Vec<usize> {
        (self.n_train..self.dataset.len()).collect()
    }
}

pub fn prepare(table: &TimeSeriesTable, config: &FeatureConfig, kind: LearnerKind) -> Result<Prepared> {
    let specs = lag_specs(config, kind, table);
    let dataset = build_supervised(table, &specs, config.target)?;
    let n_train = split_point(dataset.len(), config.train_fraction)?;
    let feature_scaler = MinMaxScaler::fit(&dataset.features.slice_rows(0, n_train))?;
    let target_scaler = MinMaxScaler::fit_vector(&dataset.target[..n_train])?;
    Ok(Prepared {
        x: feature_scaler.transform(&dataset.features)?,
        y: target_scaler.transform_vector(&dataset.target),
        dataset,
        feature_scaler,
        target_scaler,
        n_train,
    })
}

/// A trained model with everything needed to rebuild its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub learner: LearnerKind,
    pub params: LearnerParams,
    pub features: FeatureConfig,
    pub feature_names: Vec<String>,
    pub feature_scaler: MinMaxScaler,
    pub target_scaler: MinMaxScaler,
    pub model: TrainedModel,
}

pub fn train(table: &TimeSeriesTable, config: &FeatureConfig, params: &LearnerParams) -> Result<(ModelBundle, Prepared)> {
    let prepared = prepare(table, config, params.kind())?;
    let rows = prepared.train_rows(params.first_usable_row());
    let mut model = fit_rows(params, &prepared.x, &prepared.y, &rows)?;
    if let TrainedModel::Forest(f) = &mut model {
        f.feature_names = prepared.dataset.feature_names.clone();
    }
    let bundle = ModelBundle {
        learner: params.kind(),
        params: params.clone(),
        features: config.clone(),
        feature_names: prepared.dataset.feature_names.clone(),
        feature_scaler: prepared.feature_scaler.clone(),
        target_scaler: prepared.target_scaler.clone(),
        model,
    };
    Ok((bundle, prepared))
}

/// Grid search inside the training split.
pub fn tune(
    table: &TimeSeriesTable,
    config: &FeatureConfig,
    candidates: &[LearnerParams],
    options: &CvOptions,
) -> Result<CvResult> {
    let kind = candidates.first().map(LearnerParams::kind).ok_or_else(|| Error::BadConfig("empty grid".into()))?;
    let prepared = prepare(table, config, kind)?;
    let n = prepared.n_train;
    grid_search(&prepared.x.slice_rows(0, n), &prepared.y[..n], candidates, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rows {
    Train,
    Test,
    All,
}

impl std::str::FromStr for Rows {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Rows::Train),
            "test" => Ok(Rows::Test),
            "all" => Ok(Rows::All),
            other => Err(Error::Usage(format!("unknown row selection `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub model: String,
    pub timestamps: Vec<NaiveDateTime>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl Forecast {
    pub fn metrics(&self, target: TargetKind) -> Result<MetricReport> {
        MetricReport::compute(&self.actual, &self.predicted, target.name())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,actual,predicted,model\n");
        for i in 0..self.actual.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_datetime(self.timestamps[i]),
                self.actual[i],
                self.predicted[i],
                self.model
            ));
        }
        out
    }
}

impl ModelBundle {
    /// Rebuilds features from `table` with the stored configuration and
    /// scalers, then predicts in $/MWh.
    pub fn forecast(&self, table: &TimeSeriesTable, rows: Rows) -> Result<Forecast> {
        let specs = lag_specs(&self.features, self.learner, table);
        let ds = build_supervised(table, &specs, self.features.target)?;
        if ds.feature_names != self.feature_names {
            return Err(Error::DimensionMismatch { expected: self.feature_names.len(), got: ds.feature_names.len() });
        }
        let n_train = split_point(ds.len(), self.features.train_fraction)?;
        let first = self.model.first_usable_row();
        let idx: Vec<usize> = match rows {
            Rows::Train => (first.min(n_train)..n_train).collect(),
            Rows::Test => (n_train.max(first)..ds.len()).collect(),
            Rows::All => (first.min(ds.len())..ds.len()).collect(),
        };
        if idx.is_empty() {
            return Err(Error::TooFewRows("no rows to predict".into()));
        }
        let x = self.feature_scaler.transform(&ds.features)?;
        let raw = predict_rows(&self.model, &x, &idx)?;
        Ok(Forecast {
            model: self.learner.name().to_string(),
            timestamps: idx.iter().map(|&r| ds.timestamps[r]).collect(),
            actual: idx.iter().map(|&r| ds.target[r]).collect(),
            predicted: self.target_scaler.inverse_vector(&raw),
        })
    }
}

/// Predicting the training-split mean for every test row.
pub fn mean_baseline(prepared: &Prepared) -> Result<MetricReport> {
    let n = prepared.n_train;
    let mean = prepared.dataset.target[..n].iter().sum::<f64>() / n as f64;
    let actual = &prepared.dataset.target[n..];
    MetricReport::compute(actual, &vec![mean; actual.len()], prepared.dataset.target_name.name())
}

/// Joins forecasts on timestamp over the first `hours` rows of the first
/// forecast: `timestamp, actual, <model>...`.
pub fn forecast_window_csv(forecasts: &[Forecast], hours: usize) -> Result<String> {
    let first = forecasts.first().ok_or(Error::EmptyInput)?;
    let mut out = String::from("timestamp,actual");
    for f in forecasts {
        out.push(',');
        out.push_str(&f.model);
    }
    out.push('\n');
    for (i, ts) in first.timestamps.iter().take(hours).enumerate() {
        out.push_str(&format!("{},{}", format_datetime(*ts), first.actual[i]));
        for f in forecasts {
            let j = f.timestamps.binary_search(ts).map_err(|_| {
                Error::ShapeMismatch(format!("forecast `{}` lacks {}", f.model, format_datetime(*ts)))
            })?;
            out.push_str(&format!(",{}", f.predicted[j]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// DAM, RTM and gap forests sharing one feature matrix and seed.
#[derive(Debug, Clone)]
pub struct MarketForests {
    pub dam: ForestModel,
    pub rtm: ForestModel,
    pub gap: ForestModel,
    pub features: Matrix,
    pub actual_gap: Vec<f64>,
    pub timestamps: Vec<NaiveDateTime>,
    pub n_train: usize,
}

/// Fits the three forests on the training split in $/MWh.
pub fn fit_market_forests(table: &TimeSeriesTable, config: &FeatureConfig, params: &ForestParams) -> Result<MarketForests> {
    let specs = config.resolve(table);
    let gap = build_supervised(table, &specs, TargetKind::Gap)?;
    let dam = build_supervised(table, &specs, TargetKind::Dam)?;
    let rtm = build_supervised(table, &specs, TargetKind::Rtm)?;
    let n_train = split_point(gap.len(), config.train_fraction)?;
    let x = gap.features.slice_rows(0, n_train);
    let fit = |ds: &SupervisedDataset| -> Result<ForestModel> {
        fit_forest(&x, &ds.target[..n_train], params)?.with_feature_names(&ds.feature_names)
    };
    Ok(MarketForests {
        dam: fit(&dam)?,
        rtm: fit(&rtm)?,
        gap: fit(&gap)?,
        features: gap.features,
        actual_gap: gap.target,
        timestamps: gap.timestamps,
        n_train,
    })
}

impl MarketForests {
    pub fn compare_row(&self, row: usize, delta: f64, bins: usize) -> Result<GapComparison> {
        eval::compare_gap_methods(&self.dam, &self.rtm, &self.gap, self.features.row(row), self.actual_gap[row], delta, bins)
    }

    pub fn row_of(&self, ts: NaiveDateTime) -> Result<usize> {
        self.timestamps
            .binary_search(&ts)
            .map_err(|_| Error::BadConfig(format!("no feature row at {}", format_datetime(ts))))
    }

    /// `count` distinct test rows drawn with `seed`, in time order.
    pub fn sample_test_rows(&self, count: usize, seed: u64) -> Vec<usize> {
        let n_test = self.features.rows() - self.n_train;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = sample(&mut rng, n_test, count.min(n_test)).into_iter().map(|i| i + self.n_train).collect();
        idx.sort_unstable();
        idx
    }

    pub fn study(&self, rows: &[usize], delta: f64, bins: usize) -> Result<(Vec<GapComparison>, ComparisonSummary)> {
        let comps = rows.iter().map(|&r| self.compare_row(r, delta, bins)).collect::<Result<Vec<_>>>()?;
        let summary = eval::summarize(&comps)?;
        Ok((comps, summary))
    }
}

/// `bin_left, bin_right, probability` rows.
pub fn distribution_csv(dist: &crate::forest::PredictionDistribution) -> String {
    let mut out = String::from("bin_left,bin_right,probability\n");
    for (l, r, p) in dist.bins() {
        out.push_str(&format!("{l},{r},{p}\n"));
    }
    out
}
