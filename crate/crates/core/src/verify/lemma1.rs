//! One-step contraction check on `f(x) = 1/2 |x|^2` (`L = mu = 1`,
//! `f* = 0`) with additive gaussian noise of total variance `sigma2`.
//!
//! One round from `x_t` gives `x_{t+1} = (1 - gamma) x_t - gamma xi`, where
//! `xi` averages `N B` noise vectors, so
//! `E f(x_{t+1}) = 1/2 ((1 - gamma)^2 |x_t|^2 + gamma^2 sigma2 / (N B))`
//! exactly. The bound under test is
//! `(1 - nu) f(x_t) + gamma (2 - gamma) sigma2 / (2 N B)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::{aggregate, parallel_batch_averages, sgd_step, RunContext, WorkerPool};
use crate::objectives::{AdditiveGaussian, Objective, Quadratic};
use crate::point::Point;

/// Dimension of the test problem; the start point is the all-ones vector,
/// so `f(x_t) = 1`.
const DIM: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Cell {
    pub gamma: f64,
    pub workers: usize,
    pub batch: u64,
    pub sigma2: f64,
    /// `f(x_t) - f*` at the start point.
    pub start_gap: f64,
    /// Exact `E[f(x_{t+1}) - f*]`.
    pub closed_form: f64,
    pub bound: f64,
    pub closed_form_holds: bool,
    pub trials: usize,
    pub empirical_mean: f64,
    pub empirical_std_error: f64,
    /// The empirical mean is below `bound + 4 se`.
    pub empirical_holds: bool,
    /// The empirical mean is within `4 se` of the closed form.
    pub empirical_matches_closed_form: bool,
}

impl Lemma1Cell {
    pub fn pass(&self) -> bool {
        self.closed_form_holds && self.empirical_holds && self.empirical_matches_closed_form
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub cells: Vec<Lemma1Cell>,
}

impl Lemma1Report {
    pub fn pass(&self) -> bool {
        self.cells.iter().all(Lemma1Cell::pass)
    }
}

/// `(closed-form left side, bound)` for a start gap of `start_gap`.
pub fn lemma1_closed_form(
    gamma: f64,
    workers: usize,
    batch: u64,
    sigma2: f64,
    start_gap: f64,
) -> (f64, f64) {
    let nb = workers as f64 * batch as f64;
    let lhs = 0.5 * ((1.0 - gamma).powi(2) * 2.0 * start_gap + gamma * gamma * sigma2 / nb);
    let nu = 0.5 * gamma * (1.0 - gamma);
    let bound = (1.0 - nu) * start_gap + gamma * (2.0 - gamma) * sigma2 / (2.0 * nb);
    (lhs, bound)
}

/// Checks one cell both in closed form and by simulating `trials`
/// independent rounds through the executor.
pub fn monte_carlo_lemma1(
    gamma: f64,
    workers: usize,
    batch: u64,
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> Result<Lemma1Cell> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(format!(
            "gamma = {gamma} must lie in (0, 1/L) with L = 1"
        )));
    }
    if trials < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: trials,
        });
    }
    let f = AdditiveGaussian::new(Quadratic::isotropic(DIM, 1.0), sigma2)?;
    let x = Point::filled(DIM, 1.0);
    let start_gap = f.value(&x);
    let (closed_form, bound) = lemma1_closed_form(gamma, workers, batch, sigma2, start_gap);

    let pool = WorkerPool::new(workers, 1)?;
    let mut ctx = RunContext::new(seed);
    let mut values = Vec::with_capacity(trials);
    for trial in 0..trials {
        let gs = parallel_batch_averages(&f, &x, batch, &pool, trial as u64, &mut ctx)?;
        let g = aggregate(&gs, &mut ctx.counters)?;
        values.push(f.value(&sgd_step(&x, &g, gamma)?));
    }
    let n = trials as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    Ok(Lemma1Cell {
        gamma,
        workers,
        batch,
        sigma2,
        start_gap,
        closed_form,
        bound,
        closed_form_holds: closed_form <= bound,
        trials,
        empirical_mean: mean,
        empirical_std_error: se,
        empirical_holds: mean <= bound + 4.0 * se,
        empirical_matches_closed_form: (mean - closed_form).abs() <= 4.0 * se,
    })
}

/// The grid `gamma in {0.01, 0.1, 0.5}`, `N in {1, 4}`, `B in {1, 8}` at
/// `sigma2 = 1`.
pub fn lemma1_grid(trials: usize, seed: u64) -> Result<Lemma1Report> {
    let mut cells = Vec::new();
    for gamma in [0.01, 0.1, 0.5] {
        for workers in [1, 4] {
            for batch in [1, 8] {
                let cell_seed = seed ^ ((cells.len() as u64 + 1) << 32);
                cells.push(monte_carlo_lemma1(
                    gamma, workers, batch, 1.0, trials, cell_seed,
                )?);
            }
        }
    }
    Ok(Lemma1Report { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_example() {
        let (lhs, bound) = lemma1_closed_form(0.1, 1, 1, 1.0, 1.0);
        assert!((lhs - 0.815).abs() < 1e-15);
        assert!((bound - 1.05).abs() < 1e-15);
    }

    #[test]
    fn noiseless_contraction() {
        for gamma in [0.01, 0.3, 0.5, 0.9, 0.99] {
            let (lhs, bound) = lemma1_closed_form(gamma, 3, 2, 0.0, 2.0);
            assert_eq!(lhs, (1.0 - gamma) * (1.0 - gamma) * 2.0);
            assert!(lhs <= bound);
        }
    }

    #[test]
    fn rejects_large_step() {
        assert!(monte_carlo_lemma1(1.0, 1, 1, 1.0, 10, 0)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn small_grid_passes() {
        let r = lemma1_grid(2000, 3).unwrap();
        assert_eq!(r.cells.len(), 12);
        assert!(r.cells.iter().all(|c| c.closed_form_holds));
        assert!(r.pass(), "{r:#?}");
    }
}
