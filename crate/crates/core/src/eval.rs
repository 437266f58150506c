//! Error metrics, descriptive statistics and the direct-versus-difference
//! comparison of tree-output distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{ForestModel, PredictionDistribution};

pub const DEFAULT_DELTA: f64 = 2.0;

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok((y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt())
}

/// RMSE over the range of the actual values, in percent.
pub fn nrmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    let r = rmse(y, yhat)?;
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRange);
    }
    Ok(100.0 * r / (hi - lo))
}

pub fn max_error(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    pub nrmse_percent: f64,
    pub max_error: f64,
    pub n_samples: usize,
    pub target_name: String,
}

impl MetricReport {
    pub fn compute(y: &[f64], yhat: &[f64], target_name: impl Into<String>) -> Result<Self> {
        Ok(Self {
            mae: mae(y, yhat)?,
            rmse: rmse(y, yhat)?,
            nrmse_percent: nrmse(y, yhat)?,
            max_error: max_error(y, yhat)?,
            n_samples: y.len(),
            target_name: target_name.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean, sample standard deviation, extremes and quartiles.
pub fn describe(series: &[f64]) -> Result<DescriptiveStats> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let std = if series.len() > 1 {
        (series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DescriptiveStats {
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.5),
        p75: percentile_sorted(&sorted, 0.75),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub direct: PredictionDistribution,
    pub difference: PredictionDistribution,
    pub actual_gap: f64,
    pub delta: f64,
    pub prob_direct: f64,
    pub prob_difference: f64,
}

impl GapComparison {
    pub fn direct_wins(&self) -> bool {
        self.prob_direct >= self.prob_difference
    }
}

/// Gap distribution from `gap` alongside the per-tree differences
/// `dam_i - rtm_i`, scored by the mass within `delta` of the actual gap.
pub fn compare_gap_methods(
    dam: &ForestModel,
    rtm: &ForestModel,
    gap: &ForestModel,
    x: &[f64],
    actual_gap: f64,
    delta: f64,
    bins: usize,
) -> Result<GapComparison> {
    let counts = vec![dam.trees.len(), rtm.trees.len(), gap.trees.len()];
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::TreeCountMismatch(counts));
    }
    let dam_out = dam.tree_outputs(x)?;
    let rtm_out = rtm.tree_outputs(x)?;
    let diffs: Vec<f64> = dam_out.iter().zip(&rtm_out).map(|(a, b)| a - b).collect();
    let direct = gap.predict_distribution(x, bins)?;
    let difference = PredictionDistribution::from_outputs(diffs, bins)?;
    Ok(GapComparison {
        prob_direct: direct.prob_within(actual_gap, delta),
        prob_difference: difference.prob_within(actual_gap, delta),
        direct,
        difference,
        actual_gap,
        delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub n_rows: usize,
    pub delta: f64,
    pub direct_wins: usize,
    pub direct_win_share: f64,
    pub mean_prob_direct: f64,
    pub mean_prob_difference: f64,
}

pub fn summarize(comparisons: &[GapComparison]) -> Result<ComparisonSummary> {
    if comparisons.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = comparisons.len();
    let wins = comparisons.iter().filter(|c| c.direct_wins()).count();
    Ok(ComparisonSummary {
        n_rows: n,
        delta: comparisons[0].delta,
        direct_wins: wins,
        direct_win_share: wins as f64 / n as f64,
        mean_prob_direct: comparisons.iter().map(|c| c.prob_direct).sum::<f64>() / n as f64,
        mean_prob_difference: comparisons.iter().map(|c| c.prob_difference).sum::<f64>() / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams};
    use crate::matrix::Matrix;

    #[test]
    fn hand_example() {
        let (y, p) = ([0.0, 10.0], [1.0, 7.0]);
        assert_eq!(mae(&y, &p).unwrap(), 2.0);
        assert!((rmse(&y, &p).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!((nrmse(&y, &p).unwrap() - 10.0 * 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(max_error(&y, &p).unwrap(), 3.0);
        let r = MetricReport::compute(&y, &p, "gap").unwrap();
        assert!(r.mae <= r.rmse && r.rmse <= r.max_error);
    }

    #[test]
    fn perfect_prediction_and_errors() {
        let y = [3.0, -1.0, 8.0];
        let r = MetricReport::compute(&y, &y, "gap").unwrap();
        assert_eq!((r.mae, r.rmse, r.nrmse_percent, r.max_error), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(nrmse(&[4.0, 4.0], &[1.0, 2.0]), Err(Error::DegenerateRange)));
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn describe_examples() {
        let s = describe(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.p50, s.min, s.max), (3.0, 3.0, 1.0, 5.0));
        assert_eq!((s.p25, s.p75), (2.0, 4.0));
        let c = describe(&[7.0; 4]).unwrap();
        assert_eq!(c.std, 0.0);
        assert!(c.p25 == 7.0 && c.p50 == 7.0 && c.p75 == 7.0);
        assert!(describe(&[]).is_err());
    }

    #[test]
    fn identical_markets_give_point_mass_at_zero() {
        let x = Matrix::from_rows(&(0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let f = fit_forest(&x, &y, &ForestParams::new(10, 1)).unwrap();
        let c = compare_gap_methods(&f, &f, &f, x.row(4), 0.5, 1.0, 20).unwrap();
        assert_eq!(c.difference.probabilities, vec![1.0]);
        assert_eq!(c.difference.bin_edges, vec![0.0, 0.0]);
        assert_eq!(c.prob_difference, 1.0);
        assert!((c.direct.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let small = fit_forest(&x, &y, &ForestParams::new(3, 1)).unwrap();
        assert!(matches!(
            compare_gap_methods(&f, &small, &f, x.row(0), 0.0, 1.0, 5),
            Err(Error::TreeCountMismatch(_))
        ));
    }
}
