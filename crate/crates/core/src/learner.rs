//! Uniform fit/predict over the four learners.
//!
//! Every learner sees the same chronological row matrix. Tabular learners
//! use row `r` directly; the LSTM uses the window of rows
//! `[r - lookback, r)` to predict the target of row `r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SequenceDataset;
use crate::forest::{self, ForestModel, ForestParams};
use crate::lasso::{self, LassoModel, LassoParams};
use crate::lstm::{self, LstmModel, TrainConfig};
use crate::matrix::Matrix;
use crate::svr::{self, SvrModel, SvrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lasso,
    Svr,
    #[serde(alias = "rf")]
    Forest,
    Lstm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [LearnerKind::Lasso, LearnerKind::Svr, LearnerKind::Forest, LearnerKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Lasso => "lasso",
            LearnerKind::Svr => "svr",
            LearnerKind::Forest => "forest",
            LearnerKind::Lstm => "lstm",
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(LearnerKind::Lasso),
            "svr" => Ok(LearnerKind::Svr),
            "forest" | "rf" => Ok(LearnerKind::Forest),
            "lstm" => Ok(LearnerKind::Lstm),
            other => Err(Error::Usage(format!("unknown learner `{other}` (expected lasso, svr, forest or lstm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum LearnerParams {
    Lasso(LassoParams),
    Svr(SvrParams),
    Forest(ForestParams),
    Lstm(TrainConfig),
}

impl LearnerParams {
    /// Settings that won the original tuning runs.
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Lasso => LearnerParams::Lasso(LassoParams::default()),
            LearnerKind::Svr => LearnerParams::Svr(SvrParams::default()),
            LearnerKind::Forest => LearnerParams::Forest(ForestParams::default()),
            LearnerKind::Lstm => LearnerParams::Lstm(TrainConfig::default()),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerParams::Lasso(_) => LearnerKind::Lasso,
            LearnerParams::Svr(_) => LearnerKind::Svr,
            LearnerParams::Forest(_) => LearnerKind::Forest,
            LearnerParams::Lstm(_) => LearnerKind::Lstm,
        }
    }

    /// Replaces the random seed of the stochastic learners.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            LearnerParams::Forest(f) => f.seed = seed,
            LearnerParams::Lstm(c) => c.seed = seed,
            _ => {}
        }
        p
    }

    /// Rows before this index have no complete input.
    pub fn first_usable_row(&self) -> usize {
        match self {
            LearnerParams::Lstm(c) => c.lookback,
            _ => 0,
        }
    }

    /// Tuned axes as `(name, value)` pairs.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        match self {
            LearnerParams::Lasso(p) => vec![("lambda", p.lambda.to_string())],
            LearnerParams::Svr(p) => vec![
                ("C", p.c.to_string()),
                ("epsilon", p.epsilon.to_string()),
                ("kernel", format!("{:?}", p.kernel.kind).to_lowercase()),
                ("gamma", p.kernel.gamma.to_string()),
            ],
            LearnerParams::Forest(p) => vec![("n_trees", p.n_trees.to_string())],
            LearnerParams::Lstm(c) => vec![
                ("units", c.units.to_string()),
                ("epochs", c.epochs.to_string()),
                ("lookback", c.lookback.to_string()),
                ("loss", format!("{:?}", c.loss).to_lowercase()),
                ("optimizer", format!("{:?}", c.optimizer).to_lowercase()),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Lasso(LassoModelJson),
    Svr(svr::SvrJson),
    Forest(ForestModel),
    Lstm(LstmModel),
}

/// Serialized LASSO model without feature names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModelJson {
    pub lambda: f64,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
}

impl From<&LassoModel> for LassoModelJson {
    fn from(m: &LassoModel) -> Self {
        Self { lambda: m.lambda, intercept: m.intercept, weights: m.weights.clone(), n_iter: m.n_iter, converged: m.converged }
    }
}

impl From<&LassoModelJson> for LassoModel {
    fn from(m: &LassoModelJson) -> Self {
        LassoModel { weights: m.weights.clone(), intercept: m.intercept, lambda: m.lambda, n_iter: m.n_iter, converged: m.converged }
    }
}

impl TrainedModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            TrainedModel::Lasso(_) => LearnerKind::Lasso,
            TrainedModel::Svr(_) => LearnerKind::Svr,
            TrainedModel::Forest(_) => LearnerKind::Forest,
            TrainedModel::Lstm(_) => LearnerKind::Lstm,
        }
    }

    pub fn first_usable_row(&self) -> usize {
        match self {
            TrainedModel::Lstm(m) => m.config.lookback,
            _ => 0,
        }
    }
}

fn check_rows(x: &Matrix, y: Option<&[f64]>, rows: &[usize]) -> Result<()> {
    if let Some(y) = y {
        if y.len() != x.rows() {
            return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
        }
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.rows()) {
        return Err(Error::ShapeMismatch(format!("row {r} outside a table of {} rows", x.rows())));
    }
    Ok(())
}

/// Windows ending just before each of `rows`.
fn sequences(x: &Matrix, y: &[f64], lookback: usize, rows: &[usize]) -> Result<SequenceDataset> {
    let all = SequenceDataset::from_rows(x, y, lookback)?;
    if let Some(&r) = rows.iter().find(|&&r| r < lookback) {
        return Err(Error::LookbackTooLong { lookback, rows: r });
    }
    let idx: Vec<usize> = rows.iter().map(|&r| r - lookback).collect();
    Ok(all.subset(&idx))
}

/// Fits on the given rows. For the LSTM, rows without a full window are
/// skipped.
pub fn fit_rows(params: &LearnerParams, x: &Matrix, y: &[f64], rows: &[usize]) -> Result<TrainedModel> {
    check_rows(x, Some(y), rows)?;
    match params {
        LearnerParams::Lstm(cfg) => {
            let usable: Vec<usize> = rows.iter().copied().filter(|&r| r >= cfg.lookback).collect();
            if usable.is_empty() {
                return Err(Error::LookbackTooLong { lookback: cfg.lookback, rows: rows.len() });
            }
            let seqs = sequences(x, y, cfg.lookback, &usable)?;
            Ok(TrainedModel::Lstm(lstm::fit(&seqs, cfg)?))
        }
        _ => {
            let xs = x.select_rows(rows);
            let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            Ok(match params {
                LearnerParams::Lasso(p) => TrainedModel::Lasso((&lasso::fit(&xs, &ys, p)?).into()),
                LearnerParams::Svr(p) => TrainedModel::Svr(svr::fit(&xs, &ys, p)?.to_json()),
                LearnerParams::Forest(p) => TrainedModel::Forest(forest::fit_forest(&xs, &ys, p)?),
                LearnerParams::Lstm(_) => unreachable!(),
            })
        }
    }
}

/// Raw model outputs for the given rows.
pub fn predict_rows(model: &TrainedModel, x: &Matrix, rows: &[usize]) -> Result<Vec<f64>> {
    check_rows(x, None, rows)?;
    match model {
        TrainedModel::Lstm(m) => {
            let seqs = sequences(x, &vec![0.0; x.rows()], m.config.lookback, rows)?;
            m.predict(&seqs)
        }
        TrainedModel::Lasso(m) => LassoModel::from(m).predict(&x.select_rows(rows)),
        TrainedModel::Svr(m) => SvrModel::from_json(m)?.predict(&x.select_rows(rows)),
        TrainedModel::Forest(m) => m.predict(&x.select_rows(rows)),
    }
}
