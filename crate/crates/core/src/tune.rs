//! Exhaustive grid search with k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{child_seed, ForestParams};
use crate::lasso::LassoParams;
use crate::learner::{fit_rows, predict_rows, LearnerKind, LearnerParams};
use crate::lstm::{LossKind, OptimizerKind, TrainConfig};
use crate::matrix::Matrix;
use crate::svr::{KernelKind, KernelSpec, SvrParams};

pub const DEFAULT_FOLDS: usize = 5;

/// Contiguous folds in time order; the earliest folds take the remainder.
pub fn kfold_indices(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::TooFewSamples { n, k });
    }
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        folds.push((start..start + size).collect());
        start += size;
    }
    Ok(folds)
}

/// Same fold sizes as [`kfold_indices`] over a seeded permutation; each
/// fold is sorted.
pub fn shuffled_kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let folds = kfold_indices(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(folds
        .into_iter()
        .map(|f| {
            let mut idx: Vec<usize> = f.into_iter().map(|i| perm[i]).collect();
            idx.sort_unstable();
            idx
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum ParamGrid {
    Lasso {
        lambda: Vec<f64>,
    },
    Svr {
        #[serde(rename = "C")]
        c: Vec<f64>,
        epsilon: Vec<f64>,
        kernel: Vec<KernelKind>,
        gamma: Vec<f64>,
    },
    Forest {
        n_trees: Vec<usize>,
    },
    Lstm {
        units: Vec<usize>,
        epochs: Vec<usize>,
        lookback: Vec<usize>,
        loss: Vec<LossKind>,
        optimizer: Vec<OptimizerKind>,
    },
}

impl ParamGrid {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Lasso => ParamGrid::Lasso {
                lambda: vec![0.0001, 0.0002, 0.0003, 0.0004, 0.0005, 0.001, 0.002, 0.003, 0.004, 0.005, 0.01],
            },
            LearnerKind::Svr => ParamGrid::Svr {
                c: vec![1.0, 10.0, 100.0, 1000.0],
                epsilon: vec![0.001, 0.01, 0.1],
                kernel: vec![KernelKind::Linear, KernelKind::Sigmoid, KernelKind::Rbf],
                gamma: vec![0.01, 0.1, 1.0],
            },
            LearnerKind::Forest => ParamGrid::Forest { n_trees: vec![50, 100] },
            LearnerKind::Lstm => ParamGrid::Lstm {
                units: vec![10, 20, 50, 100],
                epochs: vec![10, 20, 50, 100],
                lookback: vec![24, 168, 720],
                loss: vec![LossKind::Mse, LossKind::Mae],
                optimizer: vec![OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam],
            },
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            ParamGrid::Lasso { .. } => LearnerKind::Lasso,
            ParamGrid::Svr { .. } => LearnerKind::Svr,
            ParamGrid::Forest { .. } => LearnerKind::Forest,
            ParamGrid::Lstm { .. } => LearnerKind::Lstm,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ParamGrid::Lasso { lambda } => lambda.len(),
            ParamGrid::Svr { c, epsilon, kernel, gamma } => c.len() * epsilon.len() * kernel.len() * gamma.len(),
            ParamGrid::Forest { n_trees } => n_trees.len(),
            ParamGrid::Lstm { units, epochs, lookback, loss, optimizer } => {
                units.len() * epochs.len() * lookback.len() * loss.len() * optimizer.len()
            }
        }
    }

    /// Cartesian product in row-major axis order, filling the untuned
    /// settings from `base` when it is of the same learner.
    pub fn candidates(&self, base: Option<&LearnerParams>) -> Result<Vec<LearnerParams>> {
        if self.size() == 0 {
            return Err(Error::BadConfig("parameter grid is empty".into()));
        }
        let base = match base {
            Some(b) if b.kind() == self.kind() => b.clone(),
            _ => LearnerParams::default_for(self.kind()),
        };
        let mut out = Vec::with_capacity(self.size());
        match (self, &base) {
            (ParamGrid::Lasso { lambda }, LearnerParams::Lasso(b)) => {
                for &l in lambda {
                    out.push(LearnerParams::Lasso(LassoParams { lambda: l, ..*b }));
                }
            }
            (ParamGrid::Svr { c, epsilon, kernel, gamma }, LearnerParams::Svr(b)) => {
                for &c in c {
                    for &e in epsilon {
                        for &k in kernel {
                            for &g in gamma {
                                let spec = KernelSpec { kind: k, gamma: g, coef0: b.kernel.coef0 };
                                out.push(LearnerParams::Svr(SvrParams { c, epsilon: e, kernel: spec, ..*b }));
                            }
                        }
                    }
                }
            }
            (ParamGrid::Forest { n_trees }, LearnerParams::Forest(b)) => {
                for &m in n_trees {
                    out.push(LearnerParams::Forest(ForestParams { n_trees: m, ..*b }));
                }
            }
            (ParamGrid::Lstm { units, epochs, lookback, loss, optimizer }, LearnerParams::Lstm(b)) => {
                for &u in units {
                    for &e in epochs {
                        for &l in lookback {
                            for &lo in loss {
                                for &o in optimizer {
                                    out.push(LearnerParams::Lstm(TrainConfig {
                                        units: u,
                                        epochs: e,
                                        lookback: l,
                                        loss: lo,
                                        optimizer: o,
                                        ..*b
                                    }));
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub params: LearnerParams,
    pub fold_losses: Vec<f64>,
    pub mean_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub candidates: Vec<CandidateResult>,
    pub best_index: usize,
    pub best_params: LearnerParams,
    pub best_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { folds: DEFAULT_FOLDS, seed: 0, shuffle: false }
    }
}

fn evaluate(params: &LearnerParams, x: &Matrix, y: &[f64], folds: &[Vec<usize>]) -> Result<Vec<f64>> {
    let first = params.first_usable_row();
    let mut losses = Vec::with_capacity(folds.len());
    for (j, held_out) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let val: Vec<usize> = held_out.iter().copied().filter(|&r| r >= first).collect();
        if val.is_empty() {
            return Err(Error::TooFewRows(format!("fold {j} has no row with a full input window")));
        }
        let model = fit_rows(params, x, y, &train)?;
        let pred = predict_rows(&model, x, &val)?;
        let mse = val.iter().zip(&pred).map(|(&r, p)| (p - y[r]).powi(2)).sum::<f64>() / val.len() as f64;
        if !mse.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0 });
        }
        losses.push(mse);
    }
    Ok(losses)
}

/// Trains every candidate once per fold and keeps the lowest mean
/// validation MSE; ties go to the earlier candidate. Failed candidates are
/// recorded and skipped.
pub fn grid_search(x: &Matrix, y: &[f64], candidates: &[LearnerParams], options: &CvOptions) -> Result<CvResult> {
    if candidates.is_empty() {
        return Err(Error::BadConfig("no candidates to search".into()));
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    let folds = if options.shuffle {
        shuffled_kfold_indices(x.rows(), options.folds, options.seed)?
    } else {
        kfold_indices(x.rows(), options.folds)?
    };

    let results: Vec<CandidateResult> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let params = p.with_seed(child_seed(options.seed, index));
            match evaluate(&params, x, y, &folds) {
                Ok(fold_losses) => {
                    let mean = fold_losses.iter().sum::<f64>() / fold_losses.len() as f64;
                    CandidateResult { index, params, fold_losses, mean_loss: Some(mean), error: None }
                }
                Err(e) => {
                    let err = Error::LearnerFailure { candidate: index, source: Box::new(e) };
                    CandidateResult { index, params, fold_losses: vec![], mean_loss: None, error: Some(err.to_string()) }
                }
            }
        })
        .collect();

    let best = results
        .iter()
        .filter_map(|r| r.mean_loss.map(|l| (r.index, l)))
        .fold(None, |acc: Option<(usize, f64)>, (i, l)| match acc {
            Some((_, bl)) if bl <= l => acc,
            _ => Some((i, l)),
        });
    let Some((best_index, best_loss)) = best else {
        let first = results.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::LearnerFailure { candidate: 0, source: Box::new(Error::BadConfig(first)) });
    };
    Ok(CvResult {
        folds: folds.len(),
        best_params: results[best_index].params.clone(),
        candidates: results,
        best_index,
        best_loss,
    })
}

impl CvResult {
    /// One row per candidate and fold: `candidate, <params...>, fold, val_mse`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("candidate");
        if let Some(c) = self.candidates.first() {
            for (name, _) in c.params.describe() {
                out.push(',');
                out.push_str(name);
            }
        }
        out.push_str(",fold,val_mse\n");
        for c in &self.candidates {
            let values: Vec<String> = c.params.describe().into_iter().map(|(_, v)| v).collect();
            if c.fold_losses.is_empty() {
                out.push_str(&format!("{},{},,failed\n", c.index, values.join(",")));
            }
            for (f, l) in c.fold_losses.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", c.index, values.join(","), f, l));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_examples() {
        let f = kfold_indices(10, 5).unwrap();
        assert_eq!(f, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7], vec![8, 9]]);
        let sizes: Vec<usize> = kfold_indices(11, 5).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert!(matches!(kfold_indices(4, 5), Err(Error::TooFewSamples { n: 4, k: 5 })));
        assert!(kfold_indices(10, 1).is_err());
    }

    #[test]
    fn shuffled_folds_partition() {
        let f = shuffled_kfold_indices(23, 5, 7).unwrap();
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_ne!(f, kfold_indices(23, 5).unwrap());
    }

    #[test]
    fn default_grids() {
        assert_eq!(ParamGrid::default_for(LearnerKind::Lasso).size(), 11);
        assert_eq!(ParamGrid::default_for(LearnerKind::Svr).size(), 108);
        assert_eq!(ParamGrid::default_for(LearnerKind::Forest).size(), 2);
        let lstm = ParamGrid::default_for(LearnerKind::Lstm);
        assert_eq!(lstm.size(), 288);
        assert_eq!(lstm.candidates(None).unwrap().len(), 288);
        let grid = ParamGrid::Lasso { lambda: vec![] };
        assert!(grid.candidates(None).is_err());
    }

    #[test]
    fn single_candidate_and_failures() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64 / 20.0]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 / 20.0).collect();
        let one = vec![LearnerParams::Lasso(LassoParams::new(0.0003))];
        let r = grid_search(&x, &y, &one, &CvOptions::default()).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.candidates[0].fold_losses.len(), 5);

        let mixed = vec![LearnerParams::Lasso(LassoParams::new(-1.0)), LearnerParams::Lasso(LassoParams::new(0.01))];
        let r = grid_search(&x, &y, &mixed, &CvOptions::default()).unwrap();
        assert!(r.candidates[0].error.as_deref().unwrap().contains("candidate 0"));
        assert_eq!(r.best_index, 1);
        assert!(r.to_csv().contains("failed"));
        assert!(grid_search(&x, &y, &mixed[..1], &CvOptions::default()).is_err());
    }
}
