//! Inequalities relating `f - f*`, `|x - x*|` and `|grad f|` for an
//! `L`-smooth function with known minimizer:
//!
//! - `smoothness-gap`: `f(x) - f* <= L/2 |x - x*|^2`
//! - `gradient-gap`: `|grad f(x)|^2 / (2L) <= f(x) - f*` (convex `f`)
//! - `strong-convexity-gap`: `f(x) - f* >= mu/2 |x - x*|^2`
//! - `strong-convexity-gradient`: `|grad f(x)| >= mu |x - x*|`
//!
//! The last two run only when the objective declares strong convexity.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::objectives::Objective;
use crate::point::{dist_sq, norm_sq};
use crate::rng::RngStream;

pub const FACTS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactCheck {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen for the `lhs <= rhs` form.
    pub max_ratio: f64,
    /// Every point satisfied the inequality with equality (to tolerance).
    pub equality: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactsReport {
    pub checks: Vec<FactCheck>,
    pub skipped: Vec<String>,
}

impl FactsReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn check(&self, name: &str) -> Option<&FactCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    check: FactCheck,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self {
            check: FactCheck {
                name: name.into(),
                checked: 0,
                violations: 0,
                max_ratio: 0.0,
                equality: true,
            },
        }
    }

    /// Records `lhs <= rhs` with relative tolerance.
    fn le(&mut self, lhs: f64, rhs: f64) {
        let scale = lhs.abs().max(rhs.abs());
        let c = &mut self.check;
        c.checked += 1;
        if lhs > rhs + FACTS_TOLERANCE * scale {
            c.violations += 1;
        }
        if (lhs - rhs).abs() > FACTS_TOLERANCE * scale {
            c.equality = false;
        }
        if rhs > 0.0 {
            c.max_ratio = c.max_ratio.max(lhs / rhs);
        }
    }
}

/// Evaluates the inequalities at `points` random points around `x*`, at
/// distances spread over two orders of magnitude.
pub fn check_facts_suite<O: Objective + ?Sized>(
    obj: &O,
    points: usize,
    seed: u64,
) -> Result<FactsReport> {
    let mut skipped = Vec::new();
    let (Some(x_star), Some(f_star)) = (obj.minimizer(), obj.f_star()) else {
        skipped.push("all: objective does not declare its minimizer and optimal value".to_string());
        return Ok(FactsReport {
            checks: Vec::new(),
            skipped,
        });
    };
    let l = obj.smoothness();
    let mu = obj.strong_convexity();
    if mu.is_none() {
        skipped.push(
            "strong-convexity-gap, strong-convexity-gradient: no strong convexity declared"
                .to_string(),
        );
    }

    let mut smooth = Tally::new("smoothness-gap");
    let mut grad = Tally::new("gradient-gap");
    let mut sc_gap = Tally::new("strong-convexity-gap");
    let mut sc_grad = Tally::new("strong-convexity-gradient");
    let mut rng = RngStream::labeled(seed, "facts-points");
    let dim = obj.dim();
    let mut x = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for _ in 0..points {
        let radius = 10f64.powf(rng.random_range(-1.0..1.0));
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm_sq(&dir).sqrt().max(f64::MIN_POSITIVE);
        for j in 0..dim {
            x[j] = x_star[j] + radius * dir[j] / norm;
        }
        let gap = obj.value_and_gradient(&x, &mut g) - f_star;
        let d2 = dist_sq(&x, &x_star);
        let g2 = norm_sq(&g);
        smooth.le(gap, 0.5 * l * d2);
        grad.le(g2 / (2.0 * l), gap);
        if let Some(mu) = mu {
            sc_gap.le(0.5 * mu * d2, gap);
            sc_grad.le(mu * d2.sqrt(), g2.sqrt());
        }
    }
    let mut checks = vec![smooth.check, grad.check];
    if mu.is_some() {
        checks.extend([sc_gap.check, sc_grad.check]);
    }
    Ok(FactsReport { checks, skipped })
}
