use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{accumulate_mean, NoiseModel, Objective, StochasticOracle};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::{RngStream, StreamKey};

/// Oracle returning `grad f(x) + e` with `e ~ N(0, (sigma2 / m) I)`, so
/// `E|e|^2 = sigma2` exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdditiveGaussian<O> {
    base: O,
    sigma2: f64,
}

impl<O: Objective> AdditiveGaussian<O> {
    pub fn new(base: O, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::config(format!(
                "sigma2 must be finite and >= 0, got {sigma2}"
            )));
        }
        Ok(Self { base, sigma2 })
    }

    pub fn base(&self) -> &O {
        &self.base
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn coord_std(&self) -> f64 {
        (self.sigma2 / self.base.dim() as f64).sqrt()
    }

    fn add_noise(&self, rng: &mut RngStream, out: &mut [f64]) {
        if self.sigma2 == 0.0 {
            return;
        }
        let s = self.coord_std();
        for o in out.iter_mut() {
            *o += s * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

impl<O: Objective> Objective for AdditiveGaussian<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.base.gradient(x, out)
    }
    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.base.value_and_gradient(x, out)
    }
    fn smoothness(&self) -> f64 {
        self.base.smoothness()
    }
    fn pl_modulus(&self) -> Option<f64> {
        self.base.pl_modulus()
    }
    fn strong_convexity(&self) -> Option<f64> {
        self.base.strong_convexity()
    }
    fn f_star(&self) -> Option<f64> {
        self.base.f_star()
    }
    fn minimizer(&self) -> Option<Point> {
        self.base.minimizer()
    }
}

impl<O: Objective> StochasticOracle for AdditiveGaussian<O> {
    fn variance_bound(&self) -> f64 {
        self.sigma2
    }

    fn noise_model(&self) -> NoiseModel {
        NoiseModel::AdditiveGaussian
    }

    fn sample_gradient(&self, x: &[f64], _worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.base.gradient(x, out);
        self.add_noise(rng, out);
    }

    // Same arithmetic as the default, with grad f(x) computed once.
    fn batch_mean(&self, x: &[f64], _worker: usize, first: StreamKey, count: u64, out: &mut [f64]) {
        let mut grad = vec![0.0; out.len()];
        self.base.gradient(x, &mut grad);
        let mut sample = grad.clone();
        out.fill(0.0);
        for j in 0..count {
            sample.copy_from_slice(&grad);
            self.add_noise(
                &mut RngStream::new(StreamKey { sample: j, ..first }),
                &mut sample,
            );
            accumulate_mean(out, &sample, j + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{full_gradient, sample_stochastic_gradient, CosineRidge, Quadratic};

    #[test]
    fn zero_noise_returns_exact_gradient() {
        let o = AdditiveGaussian::new(Quadratic::isotropic(3, 1.0), 0.0).unwrap();
        let x = Point::from(vec![1.0, 2.0, -3.0]);
        let g = sample_stochastic_gradient(&o, &x, 0, StreamKey::new(1, 0, 0, 0)).unwrap();
        assert_eq!(g, full_gradient(&o, &x).unwrap());
    }

    #[test]
    fn rejects_negative_variance() {
        assert!(AdditiveGaussian::new(Quadratic::isotropic(1, 1.0), -1.0).is_err());
    }

    #[test]
    fn batch_mean_override_matches_default_path() {
        // The default trait body, reproduced through a wrapper that does not
        // override `batch_mean`.
        struct Plain<'a>(&'a AdditiveGaussian<CosineRidge>);
        impl Objective for Plain<'_> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn value(&self, x: &[f64]) -> f64 {
                self.0.value(x)
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                self.0.gradient(x, out)
            }
            fn smoothness(&self) -> f64 {
                self.0.smoothness()
            }
        }
        impl StochasticOracle for Plain<'_> {
            fn variance_bound(&self) -> f64 {
                self.0.variance_bound()
            }
            fn noise_model(&self) -> NoiseModel {
                self.0.noise_model()
            }
            fn sample_gradient(&self, x: &[f64], w: usize, rng: &mut RngStream, out: &mut [f64]) {
                self.0.sample_gradient(x, w, rng, out)
            }
        }
        let o = AdditiveGaussian::new(CosineRidge::new(4, 1.0, 2.0).unwrap(), 2.5).unwrap();
        let x = [0.3, -1.2, 2.0, 0.7];
        let key = StreamKey::new(5, 2, 9, 0);
        let mut fast = [0.0; 4];
        let mut slow = [0.0; 4];
        o.batch_mean(&x, 2, key, 37, &mut fast);
        Plain(&o).batch_mean(&x, 2, key, 37, &mut slow);
        assert_eq!(fast, slow);
    }

    #[test]
    fn unbiased_with_exact_variance() {
        // 10^5 samples at 10 points: mean within 4 sigma / sqrt(n) of the
        // gradient per coordinate; E|e|^2 within 5% of sigma2.
        let m = 4;
        let sigma2 = 2.0;
        let o = AdditiveGaussian::new(CosineRidge::new(m, 1.0, 2.0).unwrap(), sigma2).unwrap();
        let n = 100_000u64;
        let mut pts = RngStream::labeled(11, "points");
        for p in 0..10u64 {
            let x: Vec<f64> = (0..m).map(|_| pts.random_range(-2.0..2.0)).collect();
            let mut grad = vec![0.0; m];
            o.gradient(&x, &mut grad);
            let mut mean = vec![0.0; m];
            let mut sq = 0.0;
            let mut s = vec![0.0; m];
            for j in 0..n {
                o.sample_gradient(
                    &x,
                    0,
                    &mut RngStream::new(StreamKey::new(3, 0, p, j)),
                    &mut s,
                );
                for k in 0..m {
                    mean[k] += s[k] / n as f64;
                    sq += (s[k] - grad[k]).powi(2) / n as f64;
                }
            }
            let coord_sd = (sigma2 / m as f64).sqrt();
            for k in 0..m {
                assert!((mean[k] - grad[k]).abs() <= 4.0 * coord_sd / (n as f64).sqrt());
            }
            assert!(sq <= sigma2 * 1.05, "variance {sq}");
            assert!(sq >= sigma2 * 0.95, "variance {sq}");
        }
    }
}
