//! Independent reference computations shared by the oracle and acceptance
//! suites. Each check returns a short summary or the first disagreement.

#![allow(dead_code)]

use gapcast::forest::{best_split, Split};
use gapcast::lasso::{self, LassoParams};
use gapcast::lstm::{backward, forward_sequence, LstmParams};
use gapcast::svr::{self, KernelSpec, SvrParams};
use gapcast::Matrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data = (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

// ---------------------------------------------------------------------------
// LASSO

pub fn lasso_normal_equations() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (n, d) = (50, 5);
        let x = gaussian_matrix(&mut rng, n, d);
        let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter_rows()
            .map(|r| 1.5 + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();

        let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
        let rhs = a.transpose() * DVector::from_vec(y.clone());
        let sol = (a.transpose() * &a).cholesky().ok_or("singular normal equations")?.solve(&rhs);

        let m = lasso::fit(&x, &y, &LassoParams::new(0.0)).map_err(|e| e.to_string())?;
        worst = worst.max((m.intercept - sol[0]).abs());
        for j in 0..d {
            worst = worst.max((m.weights[j] - sol[j + 1]).abs());
        }
        ensure!(worst < 1e-5, "case {case}: max |theta diff| {worst:e}");
    }
    Ok(format!("20 instances, max |theta diff| {worst:.2e}"))
}

pub fn lasso_orthonormal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for &lambda in &[0.0, 0.05, 0.4, 1.0, 5.0] {
        let (n, d) = (40, 6);
        // columns orthonormal and orthogonal to the intercept
        let raw = DMatrix::from_fn(n, d + 1, |_, j| if j == 0 { 1.0 } else { rng.sample::<f64, _>(StandardNormal) });
        let q = raw.qr().q();
        let data = (0..n).flat_map(|i| (1..=d).map(move |j| (i, j))).map(|(i, j)| q[(i, j)]).collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| 2.0 + rng.sample::<f64, _>(StandardNormal)).collect();

        let m = lasso::fit(&x, &y, &LassoParams::new(lambda)).map_err(|e| e.to_string())?;
        let mean = y.iter().sum::<f64>() / n as f64;
        worst = worst.max((m.intercept - mean).abs());
        for j in 0..d {
            let z: f64 = (0..n).map(|i| q[(i, j + 1)] * y[i]).sum();
            let expected = z.signum() * (z.abs() - lambda).max(0.0);
            worst = worst.max((m.weights[j] - expected).abs());
        }
        ensure!(worst < 1e-8, "lambda {lambda}: deviation {worst:e}");
    }
    Ok(format!("5 lambdas, max deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// SVR

fn dual_objective(k: &[[f64; 3]; 3], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let mut quad = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    0.5 * quad + eps * beta.iter().map(|b| b.abs()).sum::<f64>() - beta.iter().zip(y).map(|(b, v)| b * v).sum::<f64>()
}

pub fn svr_lattice() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for case in 0..5 {
        let x = Matrix::from_vec(3, 2, (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = [0.5, 1.0, 2.0][case % 3];
        let params = SvrParams::new(c, 0.1, KernelSpec::rbf(1.0));
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = params.kernel.eval(x.row(i), x.row(j)).unwrap();
            }
        }

        // beta_3 = -beta_1 - beta_2 keeps the equality constraint
        let steps = 2000;
        let h = 2.0 * c / steps as f64;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            let b1 = -c + a as f64 * h;
            for b in 0..=steps {
                let b2 = -c + b as f64 * h;
                let b3 = -b1 - b2;
                if b3.abs() > c + 1e-12 {
                    continue;
                }
                best = best.min(dual_objective(&k, &y, params.epsilon, &[b1, b2, b3]));
            }
        }

        let sol = svr::solve(&x, &y, &params).map_err(|e| e.to_string())?;
        let got = dual_objective(&k, &y, params.epsilon, &sol.beta());
        worst = worst.max((got - best).abs());
        ensure!((got - best).abs() < 1e-3, "case {case}: solver {got}, lattice {best}");
    }
    Ok(format!("5 instances, max objective gap {worst:.2e}"))
}

pub fn svr_kkt() -> Check {
    let tol = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..20 {
        let x = Matrix::from_vec(40, 3, (0..120).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = x
            .iter_rows()
            .map(|r| (3.0 * r[0]).sin() + r[1] * r[2] + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let c = [1.0, 10.0][case % 2];
        let kernel = [KernelSpec::rbf(1.0), KernelSpec::linear()][case % 4 / 2];
        let params = SvrParams { tol, ..SvrParams::new(c, 0.05, kernel) };
        let sol = svr::solve(&x, &y, &params).map_err(|e| e.to_string())?;
        let beta = sol.beta();

        ensure!(beta.iter().sum::<f64>().abs() < 1e-8, "case {case}: equality constraint");
        for (a, s) in sol.alpha.iter().zip(&sol.alpha_star) {
            ensure!((0.0..=c).contains(a) && (0.0..=c).contains(s), "case {case}: box constraint");
            ensure!(a * s == 0.0, "case {case}: both sides active");
        }
        let eps = params.epsilon;
        for i in 0..40 {
            let g: f64 = (0..40).map(|j| beta[j] * kernel.eval(x.row(j), x.row(i)).unwrap()).sum::<f64>() + sol.bias;
            let r = y[i] - g;
            let b = beta[i];
            let ok = if b == 0.0 {
                r.abs() <= eps + tol
            } else if b == c {
                r >= eps - tol
            } else if b == -c {
                r <= -eps + tol
            } else if b > 0.0 {
                (r - eps).abs() <= tol
            } else {
                (r + eps).abs() <= tol
            };
            ensure!(ok, "case {case}, point {i}: beta {b}, residual {r}");
        }
    }
    Ok("20 instances of 40x3".into())
}

// ---------------------------------------------------------------------------
// split search

fn sse(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

fn brute_force_split(x: &Matrix, y: &[f64], features: &[usize]) -> Option<Split> {
    let parent = sse(y);
    let eps = 1e-12 * parent.max(1e-300);
    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    let mut best: Option<Split> = None;
    for &f in &feats {
        let mut values = x.column(f);
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = w[0] + (w[1] - w[0]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| x.get(i, f) <= threshold);
            let yl: Vec<f64> = left.iter().map(|&i| y[i]).collect();
            let yr: Vec<f64> = right.iter().map(|&i| y[i]).collect();
            let decrease = parent - sse(&yl) - sse(&yr);
            if decrease > eps && best.map_or(true, |b| decrease > b.decrease + eps) {
                best = Some(Split { feature: f, threshold, decrease });
            }
        }
    }
    best
}

pub fn split_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let n = rng.gen_range(2..=25);
        let d = rng.gen_range(1..=4);
        let discrete = case % 2 == 0;
        let data = (0..n * d)
            .map(|_| if discrete { f64::from(rng.gen_range(0..5u8)) } else { rng.gen_range(-2.0..2.0) })
            .collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut features: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.7)).collect();
        if features.is_empty() {
            features.push(rng.gen_range(0..d));
        }

        match (best_split(&x, &y, &features), brute_force_split(&x, &y, &features)) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                ensure!((g.feature, g.threshold) == (w.feature, w.threshold), "case {case}: {g:?} vs {w:?}");
                ensure!((g.decrease - w.decrease).abs() <= 1e-9 * w.decrease.max(1.0), "case {case}: decrease");
            }
            other => return Err(format!("case {case}: {other:?}")),
        }
    }
    Ok("50 instances identical".into())
}

// ---------------------------------------------------------------------------
// LSTM gradients

fn squared_loss(params: &LstmParams, window: &[f64], target: f64) -> f64 {
    let (y, _) = forward_sequence(params, window).unwrap();
    0.5 * (y - target) * (y - target)
}

pub fn lstm_finite_differences() -> Check {
    let (units, d, lookback) = (3, 2, 4);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut params = LstmParams::init(units, d, &mut rng);
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        let window: Vec<f64> = (0..lookback * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = rng.gen_range(-1.0..1.0);

        let (y, cache) = forward_sequence(&params, &window).map_err(|e| e.to_string())?;
        let analytic = backward(&params, &cache, y - target);

        for (ti, grad) in analytic.tensors().iter().enumerate() {
            let mut numeric = Vec::with_capacity(grad.len());
            for k in 0..grad.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[ti][k] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[ti][k] -= h;
                numeric.push((squared_loss(&plus, &window, target) - squared_loss(&minus, &window, target)) / (2.0 * h));
            }
            let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            let scale = norm(grad).max(norm(&numeric));
            ensure!(scale > 0.0, "seed {seed}, tensor {ti}: zero gradient");
            let rel = norm(&diff) / scale;
            worst = worst.max(rel);
            ensure!(rel < 1e-4, "seed {seed}, tensor {ti}: relative error {rel:e}");
        }
    }
    Ok(format!("5 seeds x 10 tensors, worst relative error {worst:.2e}"))
}
