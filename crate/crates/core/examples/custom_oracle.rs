//! Plugging in a user-defined objective. Any type implementing
//! `Objective` and `StochasticOracle` runs under every algorithm; samples
//! are drawn from the keyed stream handed to `sample_gradient`, which keeps
//! runs reproducible at any thread count.
//!
//! ```text
//! cargo run --example custom_oracle
//! ```

use crpsgd::algorithms::{cr_psgd, CrPsgdConfig};
use crpsgd::executor::WorkerPool;
use crpsgd::objectives::{NoiseModel, Objective, StochasticOracle};
use crpsgd::{Point, RngStream};
use rand_distr::{Distribution, Uniform};

/// `f(x) = 1/2 sum_j w_j x_j^2` with gradients perturbed by uniform noise
/// on `[-s, s]` in every coordinate.
struct WeightedBowl {
    weights: Vec<f64>,
    spread: f64,
}

impl Objective for WeightedBowl {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, x), w) in out.iter_mut().zip(x).zip(&self.weights) {
            *o = w * x;
        }
    }

    fn smoothness(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    fn pl_modulus(&self) -> Option<f64> {
        Some(self.weights.iter().copied().fold(f64::INFINITY, f64::min))
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }
}

impl StochasticOracle for WeightedBowl {
    fn variance_bound(&self) -> f64 {
        self.dim() as f64 * self.spread * self.spread / 3.0
    }

    fn noise_model(&self) -> NoiseModel {
        NoiseModel::AdditiveGaussian
    }

    fn sample_gradient(&self, x: &[f64], _worker: usize, rng: &mut RngStream, out: &mut [f64]) {
        self.gradient(x, out);
        let noise = Uniform::new_inclusive(-self.spread, self.spread).expect("finite spread");
        for o in out.iter_mut() {
            *o += noise.sample(rng);
        }
    }
}

fn main() -> crpsgd::Result<()> {
    let bowl = WeightedBowl {
        weights: vec![1.0, 0.5, 0.25],
        spread: 0.5,
    };
    let cfg = CrPsgdConfig::new(3, 5000, Point::filled(3, 2.0), 2, 1.05, 0.5).with_run_id(11);
    for threads in [1, 3] {
        let (x, trace) = cr_psgd(&bowl, &cfg, &WorkerPool::new(3, threads)?)?;
        println!(
            "{threads} thread(s): f = {:.6e} after {} rounds, x = {:?}",
            bowl.value(&x),
            trace.comm_rounds,
            x.as_slice()
        );
    }
    Ok(())
}
