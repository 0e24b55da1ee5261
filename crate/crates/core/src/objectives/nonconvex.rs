use serde::{Deserialize, Serialize};

use super::Objective;
use crate::error::{Error, Result};
use crate::point::{norm_sq, Point};

/// `f(x) = 0.5 |x|^2 + a * sum_j cos(omega x_j)`.
///
/// Each coordinate has `f'' = 1 - a omega^2 cos(omega x_j)`, so
/// `L = 1 + a omega^2`, and `f` is nonconvex whenever `a omega^2 > 1`.
/// Bounded below by `-a * dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineRidge {
    dim: usize,
    a: f64,
    omega: f64,
}

impl CosineRidge {
    pub fn new(dim: usize, a: f64, omega: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("dimension must be >= 1"));
        }
        if !(a >= 0.0 && a.is_finite() && omega.is_finite()) {
            return Err(Error::config(format!(
                "need finite a >= 0 and omega, got a={a}, omega={omega}"
            )));
        }
        Ok(Self { dim, a, omega })
    }

    pub fn amplitude(&self) -> f64 {
        self.a
    }

    pub fn frequency(&self) -> f64 {
        self.omega
    }

    /// Second derivative along coordinate `j`, which is also the `j`-th
    /// eigenvalue of the (diagonal) Hessian.
    pub fn curvature_at(&self, xj: f64) -> f64 {
        1.0 - self.a * self.omega * self.omega * (self.omega * xj).cos()
    }

    fn is_quadratic(&self) -> bool {
        self.a == 0.0 || self.omega == 0.0
    }
}

impl Objective for CosineRidge {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * norm_sq(x) + self.a * x.iter().map(|v| (self.omega * v).cos()).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let aw = self.a * self.omega;
        for (o, v) in out.iter_mut().zip(x) {
            *o = v - aw * (self.omega * v).sin();
        }
    }

    fn smoothness(&self) -> f64 {
        1.0 + self.a * self.omega * self.omega
    }

    fn pl_modulus(&self) -> Option<f64> {
        self.is_quadratic().then_some(1.0)
    }

    fn strong_convexity(&self) -> Option<f64> {
        self.pl_modulus()
    }

    fn f_star(&self) -> Option<f64> {
        self.is_quadratic()
            .then(|| self.value(&vec![0.0; self.dim]))
    }

    fn minimizer(&self) -> Option<Point> {
        self.is_quadratic().then(|| Point::zeros(self.dim))
    }
}
