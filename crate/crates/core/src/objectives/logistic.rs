//! Distributed l2-regularized logistic regression.
//!
//! Worker `i` holds `M` pairs `(z_ij, b_ij)`. The objective is
//!
//! ```text
//! f(x) = 1/N sum_i 1/M sum_j log(1 + exp(-b_ij z_ij^T x)) + reg/2 |x|^2
//! ```
//!
//! and a stochastic gradient for worker `i` is the gradient of one uniformly
//! drawn term of its own shard (plus the regularizer).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{NoiseModel, Objective, StochasticOracle};
use crate::error::{Error, Result};
use crate::point::{dot, norm_sq};
use crate::rng::RngStream;

/// Mean vector of the generated features (covariance is always `4 I`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMean {
    #[default]
    Ones,
    Zero,
}

impl FeatureMean {
    fn value(self) -> f64 {
        match self {
            FeatureMean::Ones => 1.0,
            FeatureMean::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LogisticOptions {
    pub feature_mean: FeatureMean,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LogisticRepr", into = "LogisticRepr")]
pub struct LogisticProblem {
    dim: usize,
    workers: usize,
    samples_per_worker: usize,
    reg: f64,
    seed: u64,
    feature_mean: FeatureMean,
    /// `workers * samples_per_worker` rows of length `dim`, worker-major.
    features: Vec<f64>,
    labels: Vec<i8>,
    true_weights: Vec<f64>,
    smoothness: f64,
    variance_bound: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogisticRepr {
    dim: usize,
    workers: usize,
    samples_per_worker: usize,
    reg: f64,
    seed: u64,
    feature_mean: FeatureMean,
    smoothness: f64,
    true_weights: Vec<f64>,
    labels: Vec<i8>,
    features: Vec<f64>,
}

impl TryFrom<LogisticRepr> for LogisticProblem {
    type Error = Error;

    fn try_from(r: LogisticRepr) -> Result<Self> {
        let n = r.workers * r.samples_per_worker;
        if r.dim == 0 || n == 0 {
            return Err(Error::config(
                "logistic problem needs dim, workers, samples >= 1",
            ));
        }
        if r.features.len() != n * r.dim || r.labels.len() != n || r.true_weights.len() != r.dim {
            return Err(Error::config(
                "logistic problem arrays do not match the stated sizes",
            ));
        }
        if r.labels.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::config("labels must be -1 or +1"));
        }
        if !(r.reg >= 0.0) || !(r.smoothness > 0.0) || r.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("logistic problem has invalid numeric fields"));
        }
        let mut p = LogisticProblem {
            dim: r.dim,
            workers: r.workers,
            samples_per_worker: r.samples_per_worker,
            reg: r.reg,
            seed: r.seed,
            feature_mean: r.feature_mean,
            features: r.features,
            labels: r.labels,
            true_weights: r.true_weights,
            smoothness: r.smoothness,
            variance_bound: 0.0,
        };
        p.variance_bound = p.max_feature_norm_sq();
        Ok(p)
    }
}

impl From<LogisticProblem> for LogisticRepr {
    fn from(p: LogisticProblem) -> Self {
        LogisticRepr {
            dim: p.dim,
            workers: p.workers,
            samples_per_worker: p.samples_per_worker,
            reg: p.reg,
            seed: p.seed,
            feature_mean: p.feature_mean,
            smoothness: p.smoothness,
            true_weights: p.true_weights,
            labels: p.labels,
            features: p.features,
        }
    }
}

/// Draws a synthetic instance: `x_true ~ N(0, I)`, `z_ij ~ N(mean, 4 I)`,
/// `b_ij = sign(z_ij^T x_true + xi_ij)` with `xi_ij ~ N(0, 1)` and
/// `sign(0) = +1`. Bit-identical for equal arguments.
pub fn generate_logistic_instance(
    dim: usize,
    workers: usize,
    samples_per_worker: usize,
    reg: f64,
    seed: u64,
    options: LogisticOptions,
) -> Result<LogisticProblem> {
    if dim == 0 || workers == 0 || samples_per_worker == 0 {
        return Err(Error::config("d, N and M must all be >= 1"));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::config(format!(
            "regularization must be >= 0, got {reg}"
        )));
    }
    let n = workers * samples_per_worker;
    let mean = options.feature_mean.value();

    let mut truth_rng = RngStream::labeled(seed, "logistic-truth");
    let true_weights: Vec<f64> = (0..dim).map(|_| truth_rng.sample(StandardNormal)).collect();

    let mut feat_rng = RngStream::labeled(seed, "logistic-features");
    let features: Vec<f64> = (0..n * dim)
        .map(|_| mean + 2.0 * feat_rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut noise_rng = RngStream::labeled(seed, "logistic-label-noise");
    let labels: Vec<i8> = features
        .chunks_exact(dim)
        .map(|z| {
            let xi: f64 = noise_rng.sample(StandardNormal);
            if dot(z, &true_weights) + xi >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut p = LogisticProblem {
        dim,
        workers,
        samples_per_worker,
        reg,
        seed,
        feature_mean: options.feature_mean,
        features,
        labels,
        true_weights,
        smoothness: 0.0,
        variance_bound: 0.0,
    };
    p.smoothness = 0.25 * p.second_moment_top_eigenvalue() + reg;
    p.variance_bound = p.max_feature_norm_sq();
    Ok(p)
}

fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn samples_per_worker(&self) -> usize {
        self.samples_per_worker
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_mean(&self) -> FeatureMean {
        self.feature_mean
    }

    pub fn true_weights(&self) -> &[f64] {
        &self.true_weights
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn features(&self, worker: usize, sample: usize) -> &[f64] {
        let row = worker * self.samples_per_worker + sample;
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    pub fn label(&self, worker: usize, sample: usize) -> f64 {
        f64::from(self.labels[worker * self.samples_per_worker + sample])
    }

    /// Loss of one data term, without the regularizer.
    pub fn sample_loss(&self, worker: usize, sample: usize, x: &[f64]) -> f64 {
        softplus(-self.label(worker, sample) * dot(self.features(worker, sample), x))
    }

    /// Gradient of one data term plus the regularizer.
    pub fn sample_gradient_of(&self, worker: usize, sample: usize, x: &[f64], out: &mut [f64]) {
        let z = self.features(worker, sample);
        let b = self.label(worker, sample);
        let c = -b * sigmoid(-b * dot(z, x));
        for ((o, zk), xk) in out.iter_mut().zip(z).zip(x) {
            *o = c * zk + self.reg * xk;
        }
    }

    fn max_feature_norm_sq(&self) -> f64 {
        self.features
            .chunks_exact(self.dim)
            .map(norm_sq)
            .fold(0.0, f64::max)
    }

    // Power iteration on (1/n) Z^T Z, applied implicitly. The Rayleigh
    // quotient never exceeds the true top eigenvalue.
    fn second_moment_top_eigenvalue(&self) -> f64 {
        let n = self.labels.len() as f64;
        let mut v = vec![1.0 / (self.dim as f64).sqrt(); self.dim];
        let mut w = vec![0.0; self.dim];
        let mut lambda = 0.0;
        for _ in 0..500 {
            w.fill(0.0);
            for z in self.features.chunks_exact(self.dim) {
                let s = dot(z, &v);
                for (wk, zk) in w.iter_mut().zip(z) {
                    *wk += s * zk;
                }
            }
            w.iter_mut().for_each(|x| *x /= n);
            let next = dot(&v, &w);
            let norm = norm_sq(&w).sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for (vk, wk) in v.iter_mut().zip(&w) {
                *vk = wk / norm;
            }
            let done = (next - lambda).abs() <= 1e-12 * next;
            lambda = next;
            if done {
                break;
            }
        }
        lambda
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.labels.len() as f64;
        let data: f64 = self
            .features
            .chunks_exact(self.dim)
            .zip(&self.labels)
            .map(|(z, &b)| softplus(-f64::from(b) * dot(z, x)))
            .sum();
        data / n + 0.5 * self.reg * norm_sq(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.value_and_gradient(x, out);
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let n = self.labels.len() as f64;
        out.fill(0.0);
        let mut loss = 0.0;
        for (z, &b) in self.features.chunks_exact(self.dim).zip(&self.labels) {
            let b = f64::from(b);
            let u = -b * dot(z, x);
            loss += softplus(u);
            let c = -b * sigmoid(u);
            for (o, zk) in out.iter_mut().zip(z) {
                *o += c * zk;
            }
        }
        for (o, xk) in out.iter_mut().zip(x) {
            *o = *o / n + self.reg * xk;
        }
        loss / n + 0.5 * self.reg * norm_sq(x)
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn strong_convexity(&self) -> Option<f64> {
        (self.reg > 0.0).then_some(self.reg)
    }

    fn pl_modulus(&self) -> Option<f64> {
        self.strong_convexity()
    }
}

impl StochasticOracle for LogisticProblem {
    /// `max_j |z_j|^2`, which bounds the variance of every data term's
    /// gradient around its worker mean.
    fn variance_bound(&self) -> f64 {
        self.variance_bound
    }

    fn noise_model(&self) -> NoiseModel {
        NoiseModel::PerSampleData
    }

    fn sample_gradient(&self, x: &[f64], worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        let j = rng.random_range(0..self.samples_per_worker);
        self.sample_gradient_of(worker % self.workers, j, x, out);
    }
}
