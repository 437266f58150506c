//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved over `2m` box-constrained variables: slot `t < m`
//! holds `alpha*_t` (sign `+1`), slot `m + t` holds `alpha_t` (sign `-1`).
//! With `beta = alpha* - alpha` the problem reads
//!
//! ```text
//! min 0.5 * beta' K beta + eps * sum(alpha + alpha*) - y' beta
//! s.t. sum(beta) = 0,  0 <= alpha, alpha* <= C
//! ```
//!
//! and the predictor is `g(x) = sum_i beta_i K(x_i, x) + b`. Each step moves
//! the maximal violating pair analytically, which keeps the equality
//! constraint satisfied.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, squared_distance, Matrix};

/// Row count up to which the full Gram matrix is materialized.
pub const FULL_GRAM_LIMIT: usize = 4000;
const CACHE_FLOATS: usize = 64 * 1024 * 1024;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Sigmoid,
    Rbf,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::BadConfig(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    /// Offset of the sigmoid kernel.
    pub coef0: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::rbf(0.1)
    }
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        Self { kind: KernelKind::Rbf, gamma, coef0: 0.0 }
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, gamma: 0.0, coef0: 0.0 }
    }

    pub fn sigmoid(gamma: f64, coef0: f64) -> Self {
        Self { kind: KernelKind::Sigmoid, gamma, coef0 }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: z.len() });
        }
        Ok(self.apply(x, z))
    }

    #[inline]
    fn apply(&self, x: &[f64], z: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(x, z),
            KernelKind::Sigmoid => (self.gamma * dot(x, z) + self.coef0).tanh(),
            KernelKind::Rbf => (-self.gamma * squared_distance(x, z)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    /// Stop once the maximal KKT violation falls below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Iteration budget, in units of `2m` pair updates.
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_max_passes() -> usize {
    1000
}

impl Default for SvrParams {
    fn default() -> Self {
        Self::new(1000.0, 0.001, KernelSpec::rbf(0.1))
    }
}

impl SvrParams {
    pub fn new(c: f64, epsilon: f64, kernel: KernelSpec) -> Self {
        Self { c, epsilon, kernel, tol: default_tol(), max_passes: default_max_passes() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub support_vectors: Matrix,
    /// `alpha*_i - alpha_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
}

/// Full dual solution over every training row.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub violation: f64,
}

impl DualSolution {
    pub fn beta(&self) -> Vec<f64> {
        self.alpha_star.iter().zip(&self.alpha).map(|(s, a)| s - a).collect()
    }
}

/// Kernel rows on demand: the whole Gram matrix for small problems, a
/// bounded FIFO cache otherwise.
struct KernelRows<'a> {
    x: &'a Matrix,
    kernel: KernelSpec,
    full: Option<Vec<Arc<[f64]>>>,
    cache: HashMap<usize, Arc<[f64]>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, kernel: KernelSpec) -> Self {
        let n = x.rows();
        let full = (n <= FULL_GRAM_LIMIT).then(|| {
            (0..n)
                .into_par_iter()
                .map(|i| Self::compute(x, kernel, i))
                .collect::<Vec<_>>()
        });
        Self {
            x,
            kernel,
            full,
            cache: HashMap::new(),
            order: VecDeque::new(),
            capacity: (CACHE_FLOATS / n.max(1)).max(2),
        }
    }

    fn compute(x: &Matrix, kernel: KernelSpec, i: usize) -> Arc<[f64]> {
        let xi = x.row(i);
        x.iter_rows().map(|xj| kernel.apply(xi, xj)).collect::<Vec<_>>().into()
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(full) = &self.full {
            return full[i].clone();
        }
        if let Some(r) = self.cache.get(&i) {
            return r.clone();
        }
        let r = Self::compute(self.x, self.kernel, i);
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(i);
        self.cache.insert(i, r.clone());
        r
    }
}

/// Solves the dual. Exposed for verification; [`fit`] wraps it.
pub fn solve(x: &Matrix, y: &[f64], params: &SvrParams) -> Result<DualSolution> {
    let m = x.rows();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != m {
        return Err(Error::LengthMismatch { left: m, right: y.len() });
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) {
        return Err(Error::BadConfig(format!(
            "need C > 0 and epsilon >= 0, got C={} epsilon={}",
            params.c, params.epsilon
        )));
    }
    let c = params.c;
    let l = 2 * m;
    let sign = |t: usize| if t < m { 1.0 } else { -1.0 };
    let base = |t: usize| if t < m { t } else { t - m };

    let diag: Vec<f64> = x.iter_rows().map(|r| params.kernel.apply(r, r)).collect();
    let mut rows = KernelRows::new(x, params.kernel);

    let mut a = vec![0.0; l];
    // gradient of the dual objective in the doubled variables
    let mut grad: Vec<f64> = (0..l).map(|t| params.epsilon - sign(t) * y[base(t)]).collect();
    let is_up = |t: usize, a: &[f64]| if t < m { a[t] < c } else { a[t] > 0.0 };
    let is_low = |t: usize, a: &[f64]| if t < m { a[t] > 0.0 } else { a[t] < c };

    let max_iter = params.max_passes.saturating_mul(l).max(l);
    let mut iterations = 0;
    let violation;
    loop {
        // maximal violating pair, lowest index on ties
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..l {
            let v = -sign(t) * grad[t];
            if is_up(t, &a) && v > gmax {
                gmax = v;
                i = t;
            }
            if is_low(t, &a) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = if i == usize::MAX || j == usize::MAX { 0.0 } else { gmax - gmin };
        if gap < params.tol {
            violation = gap.max(0.0);
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NoProgress { worst_violation: gap });
        }
        iterations += 1;

        let (bi, bj) = (base(i), base(j));
        let (si, sj) = (sign(i), sign(j));
        let ki = rows.row(bi);
        let kj = rows.row(bj);
        let q_ij = si * sj * ki[bj];
        let (old_i, old_j) = (a[i], a[j]);

        // analytic two-variable update with box clipping
        if si != sj {
            let mut quad = diag[bi] + diag[bj] + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = diag[bi] + diag[bj] - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }

        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        if di == 0.0 && dj == 0.0 {
            return Err(Error::NoProgress { worst_violation: gap });
        }
        for t in 0..l {
            let bt = base(t);
            grad[t] += sign(t) * (si * ki[bt] * di + sj * kj[bt] * dj);
        }
    }

    // bias from free variables, or the midpoint of the feasible interval
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if a[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    // at an optimum at most one side of each pair is active
    let beta: Vec<f64> = (0..m).map(|i| a[i] - a[m + i]).collect();
    let alpha_star = beta.iter().map(|b| b.max(0.0)).collect();
    let alpha = beta.iter().map(|b| (-b).max(0.0)).collect();
    Ok(DualSolution { alpha, alpha_star, bias: -rho, iterations, violation })
}

pub fn fit(x: &Matrix, y: &[f64], params: &SvrParams) -> Result<SvrModel> {
    let sol = solve(x, y, params)?;
    let beta = sol.beta();
    let idx: Vec<usize> = (0..beta.len()).filter(|&i| beta[i] != 0.0).collect();
    Ok(SvrModel {
        support_vectors: x.select_rows(&idx),
        dual_coefficients: idx.iter().map(|&i| beta[i]).collect(),
        bias: sol.bias,
        c: params.c,
        epsilon: params.epsilon,
        kernel: params.kernel,
    })
}

impl SvrModel {
    pub fn n_features(&self) -> Option<usize> {
        (self.support_vectors.rows() > 0).then(|| self.support_vectors.cols())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.n_features() {
            if d != x.len() {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        Ok(self
            .support_vectors
            .iter_rows()
            .zip(&self.dual_coefficients)
            .map(|(sv, coef)| coef * self.kernel.apply(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if let Some(d) = self.n_features() {
            x.ensure_cols(d)?;
        }
        (0..x.rows()).into_par_iter().map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn to_json(&self) -> SvrJson {
        SvrJson {
            c: self.c,
            epsilon: self.epsilon,
            kernel: self.kernel,
            bias: self.bias,
            support: self
                .support_vectors
                .iter_rows()
                .zip(&self.dual_coefficients)
                .map(|(x, coef)| SupportVector { x: x.to_vec(), coef: *coef })
                .collect(),
        }
    }

    pub fn from_json(json: &SvrJson) -> Result<Self> {
        let rows: Vec<Vec<f64>> = json.support.iter().map(|s| s.x.clone()).collect();
        Ok(Self {
            support_vectors: Matrix::from_rows(&rows)?,
            dual_coefficients: json.support.iter().map(|s| s.coef).collect(),
            bias: json.bias,
            c: json.c,
            epsilon: json.epsilon,
            kernel: json.kernel,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: Vec<f64>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrJson {
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub bias: f64,
    pub support: Vec<SupportVector>,
}
