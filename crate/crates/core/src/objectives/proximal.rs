use super::{NoiseModel, Objective, StochasticOracle};
use crate::error::{check_dim, Error, Result};
use crate::point::{dist_sq, Point};
use crate::rng::RngStream;

/// `h(x; y) = f(x) + (theta / 2) |x - y|^2` for a fixed center `y`.
///
/// With `theta > L`, `h` is `(theta + L)`-smooth and `(theta - L)`-strongly
/// convex. Stochastic gradients are the base samples shifted by the
/// deterministic term `theta (x - y)`, so their variance is unchanged.
#[derive(Clone, Debug)]
pub struct Proximal<O> {
    base: O,
    center: Point,
    theta: f64,
}

/// Wraps `base` into its proximal objective around `center`.
///
/// Fails unless `theta > L(base)`.
pub fn make_proximal<O: Objective>(base: O, center: Point, theta: f64) -> Result<Proximal<O>> {
    check_dim(base.dim(), center.dim())?;
    let l = base.smoothness();
    if !(theta > l) || !theta.is_finite() {
        return Err(Error::config(format!(
            "proximal parameter theta = {theta} must exceed the smoothness modulus L = {l}"
        )));
    }
    Ok(Proximal {
        base,
        center,
        theta,
    })
}

impl<O: Objective> Proximal<O> {
    pub fn base(&self) -> &O {
        &self.base
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn add_shift(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), yi) in out.iter_mut().zip(x).zip(self.center.iter()) {
            *o += self.theta * (xi - yi);
        }
    }
}

impl<O: Objective> Objective for Proximal<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + 0.5 * self.theta * dist_sq(x, &self.center)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.base.gradient(x, out);
        self.add_shift(x, out);
    }

    fn value_and_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let v = self.base.value_and_gradient(x, out);
        self.add_shift(x, out);
        v + 0.5 * self.theta * dist_sq(x, &self.center)
    }

    fn smoothness(&self) -> f64 {
        self.theta + self.base.smoothness()
    }

    fn pl_modulus(&self) -> Option<f64> {
        self.strong_convexity()
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.theta - self.base.smoothness())
    }
}

// Uses the default per-sample `batch_mean`, so every sample is exactly
// `base sample + theta (x - y)`.
impl<O: StochasticOracle> StochasticOracle for Proximal<O> {
    fn variance_bound(&self) -> f64 {
        self.base.variance_bound()
    }

    fn noise_model(&self) -> NoiseModel {
        self.base.noise_model()
    }

    fn sample_gradient(&self, x: &[f64], worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.base.sample_gradient(x, worker, rng, out);
        self.add_shift(x, out);
    }
}
