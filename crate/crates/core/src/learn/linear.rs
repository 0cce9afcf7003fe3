//! Linear classifiers on standardized features.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClassWeights;
use crate::analysis::sigmoid;
use crate::error::{Error, Result};

/// Per-column centring and scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance columns keep scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; k];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for r in rows {
            for j in 0..k {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Linear score with a logistic link: `p = σ(a · (w·z + b) + c)`, `z` standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Platt scaling `(a, c)` for margin-based fits; identity for logistic.
    pub calibration: (f64, f64),
    /// Objective per iteration (logistic) or per epoch (SVM), for diagnostics.
    pub history: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        let (a, c) = self.calibration;
        sigmoid(a * self.score(x) + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub l2: f64,
    pub epochs: usize,
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            epochs: 50,
            eta0: 0.5,
            seed: 0,
        }
    }
}

/// Sample weights normalised to sum to one.
fn normalised_weights(labels: &[bool], weights: &ClassWeights) -> Vec<f64> {
    let raw: Vec<f64> = labels.iter().map(|&y| weights.of(y)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn check_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<usize> {
    if rows.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("ragged feature rows".into()));
    }
    Ok(k)
}

/// Weighted mean log-loss plus `l2/2 ‖w‖²` at `theta = [w…, b]`.
pub fn logistic_objective(
    rows: &[Vec<f64>],
    labels: &[bool],
    v: &[f64],
    l2: f64,
    theta: &[f64],
) -> f64 {
    let k = theta.len() - 1;
    let mut f = 0.0;
    for ((x, &y), &vi) in rows.iter().zip(labels).zip(v) {
        let eta = dot(x, &theta[..k]) + theta[k];
        f += vi * (softplus(eta) - if y { eta } else { 0.0 });
    }
    f + 0.5 * l2 * theta[..k].iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_objective`] with respect to `theta`.
pub fn logistic_gradient(
    rows: &[Vec<f64>],
    labels: &[bool],
    v: &[f64],
    l2: f64,
    theta: &[f64],
) -> Vec<f64> {
    let k = theta.len() - 1;
    let mut g = vec![0.0; k + 1];
    for ((x, &y), &vi) in rows.iter().zip(labels).zip(v) {
        let eta = dot(x, &theta[..k]) + theta[k];
        let r = vi * (sigmoid(eta) - f64::from(u8::from(y)));
        for j in 0..k {
            g[j] += r * x[j];
        }
        g[k] += r;
    }
    for j in 0..k {
        g[j] += l2 * theta[j];
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton on a smooth convex objective in `theta`.
fn newton(
    theta0: Vec<f64>,
    max_iter: usize,
    tol: f64,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    hessian: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut theta = theta0;
    let mut f = objective(&theta);
    let mut history = vec![f];
    let mut g = gradient(&theta);
    let mut iterations = 0;
    for _ in 0..max_iter {
        if norm(&g) < tol {
            return Ok((theta, history));
        }
        let h = hessian(&theta);
        let rhs = DVector::from_column_slice(&g);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => h.lu().solve(&rhs).unwrap_or_else(|| rhs.clone()),
        };
        let slope = dot(&g, step.as_slice());
        if slope <= 1e-13 * f.abs().max(1.0) {
            // The predicted decrease is below what the objective can resolve:
            // take the full step and judge by the gradient alone.
            theta = theta.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
            f = objective(&theta);
            iterations += 1;
            history.push(f);
            g = gradient(&theta);
            continue;
        }
        let mut t = 1.0;
        let mut next = theta.clone();
        let mut f_next = f;
        for _ in 0..60 {
            next = theta
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a - t * d)
                .collect();
            f_next = objective(&next);
            if f_next <= f - 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
        }
        if !(f_next <= f) {
            // No further decrease is representable.
            break;
        }
        theta = next;
        f = f_next;
        iterations += 1;
        history.push(f);
        g = gradient(&theta);
    }
    let grad_norm = norm(&g);
    if grad_norm < tol {
        return Ok((theta, history));
    }
    Err(Error::Convergence {
        iterations,
        grad_norm,
    })
}

pub fn fit_logistic(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    params: &LogisticParams,
) -> Result<LinearModel> {
    let k = check_rows(rows, labels)?;
    let standardizer = Standardizer::fit(rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
    let v = normalised_weights(labels, weights);
    let l2 = params.l2;
    let hessian = |theta: &[f64]| {
        let mut h = DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut aug = vec![1.0; k + 1];
        for (x, &vi) in z.iter().zip(&v) {
            let mu = sigmoid(dot(x, &theta[..k]) + theta[k]);
            let w = vi * mu * (1.0 - mu);
            aug[..k].copy_from_slice(x);
            for a in 0..=k {
                for b in 0..=a {
                    h[(a, b)] += w * aug[a] * aug[b];
                }
            }
        }
        for a in 0..=k {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for j in 0..k {
            h[(j, j)] += l2;
        }
        h
    };
    let (theta, history) = newton(
        vec![0.0; k + 1],
        params.max_iter,
        params.tol,
        |t| logistic_objective(&z, labels, &v, l2, t),
        |t| logistic_gradient(&z, labels, &v, l2, t),
        hessian,
    )?;
    Ok(LinearModel {
        standardizer,
        weights: theta[..k].to_vec(),
        bias: theta[k],
        calibration: (1.0, 0.0),
        history,
    })
}

/// Weighted mean hinge loss plus `l2/2 ‖w‖²`.
pub fn hinge_objective(
    z: &[Vec<f64>],
    labels: &[bool],
    v: &[f64],
    l2: f64,
    w: &[f64],
    b: f64,
) -> f64 {
    let loss: f64 = z
        .iter()
        .zip(labels)
        .zip(v)
        .map(|((x, &y), &vi)| {
            let s = if y { 1.0 } else { -1.0 };
            vi * (1.0 - s * (dot(x, w) + b)).max(0.0)
        })
        .sum();
    loss + 0.5 * l2 * dot(w, w)
}

/// Averaged stochastic subgradient descent on the hinge objective, then Platt scaling.
/// `history` holds the best objective seen after each epoch.
pub fn fit_linear_svm(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &ClassWeights,
    params: &SvmParams,
) -> Result<LinearModel> {
    let k = check_rows(rows, labels)?;
    if params.epochs == 0 {
        return Err(Error::Parameter("SVM needs at least one epoch".into()));
    }
    let standardizer = Standardizer::fit(rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();
    let v = normalised_weights(labels, weights);
    let n = z.len();
    let lambda = params.l2;
    let (mut w, mut b) = (vec![0.0; k], 0.0);
    let (mut wa, mut ba) = (vec![0.0; k], 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    let mut history: Vec<f64> = Vec::with_capacity(params.epochs);
    let (mut best_w, mut best_b) = (vec![0.0; k], 0.0);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = params.eta0 / (1.0 + lambda * params.eta0 * t as f64).powf(0.75);
            let s = if labels[i] { 1.0 } else { -1.0 };
            let margin = s * (dot(&z[i], &w) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|wj| *wj *= shrink);
            if margin < 1.0 {
                let c = eta * v[i] * n as f64 * s;
                for (wj, xj) in w.iter_mut().zip(&z[i]) {
                    *wj += c * xj;
                }
                b += c;
            }
            t += 1;
            let mix = 1.0 / t as f64;
            for (a, wj) in wa.iter_mut().zip(&w) {
                *a += (wj - *a) * mix;
            }
            ba += (b - ba) * mix;
        }
        // Subgradient steps are not descent steps; keep the best averaged iterate.
        let obj = hinge_objective(&z, labels, &v, lambda, &wa, ba);
        if history.last().is_none_or(|&best| obj < best) {
            best_w.clone_from(&wa);
            best_b = ba;
            history.push(obj);
        } else {
            history.push(history[history.len() - 1]);
        }
    }
    let scores: Vec<f64> = z.iter().map(|x| dot(x, &best_w) + best_b).collect();
    let calibration = platt(&scores, labels, weights)?;
    Ok(LinearModel {
        standardizer,
        weights: best_w,
        bias: best_b,
        calibration,
        history,
    })
}

/// Weighted Platt scaling with smoothed targets.
pub fn platt(scores: &[f64], labels: &[bool], weights: &ClassWeights) -> Result<(f64, f64)> {
    let w: Vec<f64> = labels.iter().map(|&y| weights.of(y)).collect();
    let wp: f64 = w
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y)
        .map(|(w, _)| w)
        .sum();
    let wn: f64 = w
        .iter()
        .zip(labels)
        .filter(|(_, &y)| !y)
        .map(|(w, _)| w)
        .sum();
    let hi = (wp + 1.0) / (wp + 2.0);
    let lo = 1.0 / (wn + 2.0);
    let total = wp + wn;
    let target: Vec<f64> = labels.iter().map(|&y| if y { hi } else { lo }).collect();
    let ridge = 1e-10;
    let objective = |th: &[f64]| {
        let mut f = 0.0;
        for i in 0..scores.len() {
            let eta = th[0] * scores[i] + th[1];
            f += w[i] * (softplus(eta) - target[i] * eta);
        }
        f / total + 0.5 * ridge * th[0] * th[0]
    };
    let gradient = |th: &[f64]| {
        let mut g = vec![0.0; 2];
        for i in 0..scores.len() {
            let r = w[i] * (sigmoid(th[0] * scores[i] + th[1]) - target[i]) / total;
            g[0] += r * scores[i];
            g[1] += r;
        }
        g[0] += ridge * th[0];
        g
    };
    let hessian = |th: &[f64]| {
        let mut h = DMatrix::<f64>::zeros(2, 2);
        for i in 0..scores.len() {
            let mu = sigmoid(th[0] * scores[i] + th[1]);
            let q = w[i] * mu * (1.0 - mu) / total;
            h[(0, 0)] += q * scores[i] * scores[i];
            h[(0, 1)] += q * scores[i];
            h[(1, 1)] += q;
        }
        h[(1, 0)] = h[(0, 1)];
        h[(0, 0)] += ridge;
        h
    };
    let (th, _) = newton(vec![1.0, 0.0], 200, 1e-10, objective, gradient, hessian)?;
    Ok((th[0], th[1]))
}
