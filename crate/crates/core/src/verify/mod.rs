//! Numerical checks of the convergence theory.
//!
//! - [`lemma1`]: the one-round contraction inequality, in closed form and by
//!   simulation.
//! - [`facts`]: smoothness and strong-convexity inequalities at random
//!   points.
//! - [`fit`]: power-law fits for the `1/(NT)` and `1/sqrt(NT)` rates.
//! - [`sweep`]: the multi-seed sweeps feeding those fits, the local SGD
//!   period sweep and the thread-count determinism check.
//!
//! Rates are checked as fitted exponents inside tolerance windows rather
//! than against the theoretical constants, which are loose by design.

pub mod facts;
pub mod fit;
pub mod lemma1;
pub mod sweep;

pub use facts::{check_facts_suite, FactCheck, FactsReport};
pub use fit::{
    fit_catalyst_rate, fit_pl_rate, fit_power_law, quadrupling_ratios, CatalystRateReport,
    FitReport, PlRateReport, RatePoint,
};
pub use lemma1::{lemma1_closed_form, lemma1_grid, monte_carlo_lemma1, Lemma1Cell, Lemma1Report};
pub use sweep::{
    catalyst_rate_sweep, determinism_check, pl_rate_sweep, sweep_local_h, CatalystSweepConfig,
    CatalystSweepReport, DeterminismConfig, DeterminismReport, LocalHSweep, PlSweepConfig,
    PlSweepReport,
};

pub use crate::schedule::{rate_constants, RateConstants};

use crate::error::Result;
use crate::objectives::{AdditiveGaussian, CosineRidge};

/// `1/2 |x|^2 + a sum_j cos(omega x_j)` with additive gaussian noise of
/// total variance `sigma2`. Smooth with `L = 1 + a omega^2`, and nonconvex
/// when `a omega^2 > 1`.
pub fn nonconvex_test_objective(
    dim: usize,
    a: f64,
    omega: f64,
    sigma2: f64,
) -> Result<AdditiveGaussian<CosineRidge>> {
    AdditiveGaussian::new(CosineRidge::new(dim, a, omega)?, sigma2)
}
