//! Objective functions, stochastic first-order oracles, and problem
//! generators.
//!
//! [`Objective`] is the deterministic function `f` with its smoothness
//! metadata. [`StochasticOracle`] adds the sampling side: unbiased i.i.d.
//! gradient samples with variance bounded by `sigma2`, each drawn from an
//! explicitly keyed [`RngStream`]. Both traits are object safe so that the
//! CLI can dispatch over problem families at runtime.

mod fstar;
mod gaussian;
mod logistic;
mod nonconvex;
mod problem;
mod proximal;
mod quadratic;

pub use fstar::estimate_fstar;
pub use gaussian::AdditiveGaussian;
pub use logistic::{generate_logistic_instance, FeatureMean, LogisticOptions, LogisticProblem};
pub use nonconvex::CosineRidge;
pub(crate) use problem::write_atomic;
pub use problem::Problem;
pub use proximal::{make_proximal, Proximal};
pub use quadratic::{compute_pl_modulus, Matrix, Quadratic};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::point::Point;
use crate::rng::{RngStream, StreamKey};

/// A smooth function `f: R^m -> R` with known smoothness modulus.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `grad f(x)` into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.gradient(x, out);
        self.value(x)
    }

    /// Lipschitz constant `L` of the gradient.
    fn smoothness(&self) -> f64;

    /// Modulus `mu` of the Polyak-Lojasiewicz inequality
    /// `0.5 |grad f(x)|^2 >= mu (f(x) - f*)`, when known.
    fn pl_modulus(&self) -> Option<f64> {
        None
    }

    /// Strong-convexity modulus, when the function is strongly convex.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// Global minimum value, when known in closed form.
    fn f_star(&self) -> Option<f64> {
        None
    }

    /// A global minimizer, when known in closed form.
    fn minimizer(&self) -> Option<Point> {
        None
    }
}

/// How an oracle produces its randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// A uniformly drawn data point of the worker's shard.
    PerSampleData,
    /// `grad f(x)` plus isotropic gaussian noise.
    AdditiveGaussian,
}

/// Source of unbiased stochastic gradients of an [`Objective`].
///
/// `worker` selects the worker's local data where that matters; averaged
/// over all workers, samples are unbiased for `grad f(x)`. Their variance
/// around the worker mean is at most [`variance_bound`](Self::variance_bound).
pub trait StochasticOracle: Objective {
    fn variance_bound(&self) -> f64;

    fn noise_model(&self) -> NoiseModel;

    fn sample_gradient(&self, x: &[f64], worker: usize, rng: &mut RngStream, out: &mut [f64]);

    /// Mean of `count` samples whose streams are `first` with the sample
    /// index replaced by `0..count`.
    ///
    /// The running mean `m_k = m_{k-1} + (s_k - m_{k-1}) / k` is used so
    /// that identical samples average to themselves exactly. Overrides must
    /// return bit-identical results.
    fn batch_mean(&self, x: &[f64], worker: usize, first: StreamKey, count: u64, out: &mut [f64]) {
        let mut sample = vec![0.0; out.len()];
        out.fill(0.0);
        for j in 0..count {
            let mut rng = RngStream::new(StreamKey { sample: j, ..first });
            self.sample_gradient(x, worker, &mut rng, &mut sample);
            accumulate_mean(out, &sample, j + 1);
        }
    }
}

#[inline]
pub(crate) fn accumulate_mean(mean: &mut [f64], sample: &[f64], k: u64) {
    let k = k as f64;
    for (m, s) in mean.iter_mut().zip(sample) {
        *m += (s - *m) / k;
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        (**self).value_and_gradient(x, out)
    }
    fn smoothness(&self) -> f64 {
        (**self).smoothness()
    }
    fn pl_modulus(&self) -> Option<f64> {
        (**self).pl_modulus()
    }
    fn strong_convexity(&self) -> Option<f64> {
        (**self).strong_convexity()
    }
    fn f_star(&self) -> Option<f64> {
        (**self).f_star()
    }
    fn minimizer(&self) -> Option<Point> {
        (**self).minimizer()
    }
}

impl<T: StochasticOracle + ?Sized> StochasticOracle for &T {
    fn variance_bound(&self) -> f64 {
        (**self).variance_bound()
    }
    fn noise_model(&self) -> NoiseModel {
        (**self).noise_model()
    }
    fn sample_gradient(&self, x: &[f64], worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        (**self).sample_gradient(x, worker, rng, out)
    }
    fn batch_mean(&self, x: &[f64], worker: usize, first: StreamKey, count: u64, out: &mut [f64]) {
        (**self).batch_mean(x, worker, first, count, out)
    }
}

/// `f(x)`, with the dimension checked.
pub fn eval<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<f64> {
    check_dim(obj.dim(), x.dim())?;
    Ok(obj.value(x))
}

/// `grad f(x)`, with the dimension checked.
pub fn full_gradient<O: Objective + ?Sized>(obj: &O, x: &Point) -> Result<Point> {
    check_dim(obj.dim(), x.dim())?;
    let mut g = Point::zeros(obj.dim());
    obj.gradient(x, &mut g);
    Ok(g)
}

/// One stochastic gradient drawn from the stream `key`.
pub fn sample_stochastic_gradient<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &Point,
    worker: usize,
    key: StreamKey,
) -> Result<Point> {
    check_dim(oracle.dim(), x.dim())?;
    let mut g = Point::zeros(oracle.dim());
    oracle.sample_gradient(x, worker, &mut RngStream::new(key), &mut g);
    Ok(g)
}
