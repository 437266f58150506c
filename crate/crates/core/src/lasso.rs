//! L1-regularized least squares by cyclic coordinate descent.
//!
//! Minimizes `0.5 * sum_i (x_i . theta + b - y_i)^2 + lambda * |theta|_1`
//! with an unpenalized intercept `b`. The squared-loss sum is not divided by
//! the sample count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoParams {
    pub lambda: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for LassoParams {
    fn default() -> Self {
        Self::new(0.0003)
    }
}

impl LassoParams {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub n_iter: usize,
    pub converged: bool,
}

/// `sign(z) * max(|z| - t, 0)`, exactly zero inside the threshold.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn objective(x: &Matrix, y: &[f64], weights: &[f64], intercept: f64, lambda: f64) -> f64 {
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, yi)| {
            let e = dot(r, weights) + intercept - yi;
            e * e
        })
        .sum();
    0.5 * loss + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

pub fn fit(x: &Matrix, y: &[f64], params: &LassoParams) -> Result<LassoModel> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if !(params.lambda >= 0.0) {
        return Err(Error::BadConfig(format!("lambda must be >= 0, got {}", params.lambda)));
    }
    let lambda = params.lambda;

    // column-major copy for the coordinate sweeps
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let sq_norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    let mut weights = vec![0.0; d];
    let mut intercept = y.iter().sum::<f64>() / n as f64;
    // residual r = y - X theta - b
    let mut resid: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let mut obj = 0.5 * dot(&resid, &resid);
    let mut converged = false;
    let mut sweeps = 0;

    // sweeps alternate between the active set and full passes; only a full
    // pass can declare convergence
    let mut full_pass = true;
    while sweeps < params.max_iter {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if sq_norms[j] == 0.0 || (!full_pass && weights[j] == 0.0) {
                continue;
            }
            let col = &cols[j];
            let old = weights[j];
            let rho = dot(col, &resid) + sq_norms[j] * old;
            let new = soft_threshold(rho, lambda) / sq_norms[j];
            let delta = new - old;
            if delta != 0.0 {
                for (r, c) in resid.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                weights[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let shift = resid.iter().sum::<f64>() / n as f64;
        if shift != 0.0 {
            intercept += shift;
            for r in resid.iter_mut() {
                *r -= shift;
            }
            max_delta = max_delta.max(shift.abs());
        }

        let new_obj = 0.5 * dot(&resid, &resid) + lambda * weights.iter().map(|w| w.abs()).sum::<f64>();
        if new_obj > obj + 1e-10_f64.max(1e-12 * obj.abs()) {
            return Err(Error::Diverged { sweep: sweeps, before: obj, after: new_obj });
        }
        obj = new_obj;
        if max_delta < params.tol {
            if full_pass {
                converged = true;
                break;
            }
            full_pass = true;
        } else {
            full_pass = false;
        }
    }

    Ok(LassoModel { weights, intercept, lambda, n_iter: sweeps, converged })
}

impl LassoModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.ensure_cols(self.weights.len())?;
        Ok(x.iter_rows().map(|r| dot(r, &self.weights) + self.intercept).collect())
    }

    /// Nonzero coefficients as `(index, weight)`, largest magnitude first.
    pub fn active_set(&self) -> Vec<(usize, f64)> {
        let mut active: Vec<(usize, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i, *w))
            .collect();
        active.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        active
    }

    pub fn active_features(&self, names: &[String]) -> Vec<(String, f64)> {
        self.active_set()
            .into_iter()
            .map(|(i, w)| (names.get(i).cloned().unwrap_or_else(|| format!("x{i}")), w))
            .collect()
    }

    pub fn to_json(&self, names: &[String]) -> LassoJson {
        LassoJson {
            lambda: self.lambda,
            intercept: self.intercept,
            weights: self
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| NamedWeight {
                    name: names.get(i).cloned().unwrap_or_else(|| format!("x{i}")),
                    value: *w,
                })
                .collect(),
            n_iter: self.n_iter,
            converged: self.converged,
        }
    }

    pub fn from_json(json: &LassoJson) -> Self {
        Self {
            weights: json.weights.iter().map(|w| w.value).collect(),
            intercept: json.intercept,
            lambda: json.lambda,
            n_iter: json.n_iter,
            converged: json.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedWeight {
    pub name: String,
    pub value: f64,
}

/// Serialized form: `{lambda, intercept, weights: [{name, value}], n_iter}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoJson {
    pub lambda: f64,
    pub intercept: f64,
    pub weights: Vec<NamedWeight>,
    pub n_iter: usize,
    #[serde(default)]
    pub converged: bool,
}
