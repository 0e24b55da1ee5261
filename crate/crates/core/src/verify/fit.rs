//! Log-log least-squares fits of error against budget.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 4;

/// Slope of `log y` against `log x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exponent: f64,
    /// 95% confidence interval of the exponent.
    pub ci: (f64, f64),
    /// Root-mean-square residual in natural-log units.
    pub residual: f64,
    pub target: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub pass: bool,
}

/// Fits `y = c x^p` by ordinary least squares on logs and checks `p`
/// against `window`.
pub fn fit_power_law(xs: &[f64], ys: &[f64], target: f64, window: (f64, f64)) -> Result<FitReport> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: xs.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Argument(
            "power-law fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument(
            "power-law fit needs at least two distinct x values".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Argument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(FitReport {
        exponent: slope,
        ci: (slope - t * se, slope + t * se),
        residual: (sse / n).sqrt(),
        target,
        window,
        points: xs.len(),
        pass: window.0 <= slope && slope <= window.1,
    })
}

/// One cell of a budget sweep: the seed-averaged error at `(N, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub workers: usize,
    pub budget: u64,
    pub value: f64,
}

/// Exponent window for the `1/(NT)` rate fits.
pub const PL_RATE_WINDOW: (f64, f64) = (-1.3, -0.8);
/// Window for the error ratio when `N` doubles at fixed `T`.
pub const SPEEDUP_RATIO_WINDOW: (f64, f64) = (1.6, 2.5);
/// Window for the error ratio when `N T` is quadrupled in the nonconvex
/// rate check.
pub const CATALYST_RATIO_WINDOW: (f64, f64) = (1.4, 2.8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlRateReport {
    /// Exponent of the gap against `T` at fixed `N`.
    pub vs_budget: FitReport,
    pub fixed_workers: usize,
    /// Exponent against `N` at fixed `T`, when at least four `N` values were
    /// swept.
    pub vs_workers: Option<FitReport>,
    pub fixed_budget: u64,
    /// `(N, gap(N) / gap(2N))` for every swept doubling at fixed `T`.
    pub doubling_ratios: Vec<(usize, f64)>,
}

impl PlRateReport {
    pub fn pass(&self) -> bool {
        self.vs_budget.pass
            && self.vs_workers.as_ref().is_none_or(|f| f.pass)
            && self.doubling_ratios_pass()
    }

    pub fn doubling_ratios_pass(&self) -> bool {
        let (lo, hi) = SPEEDUP_RATIO_WINDOW;
        self.doubling_ratios
            .iter()
            .all(|(_, r)| lo <= *r && *r <= hi)
    }
}

fn most_common<K: Copy + Ord>(keys: impl Iterator<Item = K>) -> Option<K> {
    let mut counts = std::collections::BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    counts.into_iter().max_by_key(|(_, c)| *c).map(|(k, _)| k)
}

/// Fits the gap against `T` at the most-swept `N` (target `-1`) and against
/// `N` at the most-swept `T` (target `-1`).
pub fn fit_pl_rate(sweep: &[RatePoint]) -> Result<PlRateReport> {
    let fixed_workers =
        most_common(sweep.iter().map(|p| p.workers)).ok_or(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: 0,
        })?;
    let mut at_n: Vec<&RatePoint> = sweep
        .iter()
        .filter(|p| p.workers == fixed_workers)
        .collect();
    at_n.sort_by_key(|p| p.budget);
    let vs_budget = fit_power_law(
        &at_n.iter().map(|p| p.budget as f64).collect::<Vec<_>>(),
        &at_n.iter().map(|p| p.value).collect::<Vec<_>>(),
        -1.0,
        PL_RATE_WINDOW,
    )?;

    let fixed_budget = most_common(
        sweep
            .iter()
            .filter(|p| p.workers != fixed_workers)
            .map(|p| p.budget),
    )
    .unwrap_or_else(|| at_n.last().map(|p| p.budget).unwrap_or(0));
    let mut at_t: Vec<&RatePoint> = sweep.iter().filter(|p| p.budget == fixed_budget).collect();
    at_t.sort_by_key(|p| p.workers);
    let vs_workers = if at_t.len() >= MIN_FIT_POINTS {
        Some(fit_power_law(
            &at_t.iter().map(|p| p.workers as f64).collect::<Vec<_>>(),
            &at_t.iter().map(|p| p.value).collect::<Vec<_>>(),
            -1.0,
            PL_RATE_WINDOW,
        )?)
    } else {
        None
    };
    let doubling_ratios = at_t
        .iter()
        .filter_map(|p| {
            at_t.iter()
                .find(|q| q.workers == 2 * p.workers)
                .map(|q| (p.workers, p.value / q.value))
        })
        .collect();
    Ok(PlRateReport {
        vs_budget,
        fixed_workers,
        vs_workers,
        fixed_budget,
        doubling_ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystRateReport {
    /// Exponent of the mean squared gradient norm against `N T`
    /// (target `-1/2`).
    pub fit: FitReport,
    /// `(N T, value(N T) / value(4 N T))` for every swept quadrupling.
    pub quadrupling_ratios: Vec<(u64, f64)>,
}

impl CatalystRateReport {
    pub fn ratios_pass(&self) -> bool {
        let (lo, hi) = CATALYST_RATIO_WINDOW;
        !self.quadrupling_ratios.is_empty()
            && self
                .quadrupling_ratios
                .iter()
                .all(|(_, r)| lo <= *r && *r <= hi)
    }

    pub fn pass(&self) -> bool {
        self.fit.pass && self.ratios_pass()
    }
}

/// `(N T, value(N T) / value(4 N T))` for consecutive quadruplings.
pub fn quadrupling_ratios(sweep: &[RatePoint]) -> Vec<(u64, f64)> {
    let total = |p: &RatePoint| p.workers as u64 * p.budget;
    sweep
        .iter()
        .filter_map(|p| {
            sweep
                .iter()
                .find(|q| total(q) == 4 * total(p))
                .map(|q| (total(p), p.value / q.value))
        })
        .collect()
}

/// Fits the mean squared gradient norm against `N T`.
pub fn fit_catalyst_rate(sweep: &[RatePoint]) -> Result<CatalystRateReport> {
    let mut pts = sweep.to_vec();
    pts.sort_by_key(|p| p.workers as u64 * p.budget);
    // Slopes p give ratio 4^(-p) per quadrupling; the ratio window maps to
    // this exponent window.
    let window = (
        -CATALYST_RATIO_WINDOW.1.ln() / 4f64.ln(),
        -CATALYST_RATIO_WINDOW.0.ln() / 4f64.ln(),
    );
    let fit = fit_power_law(
        &pts.iter()
            .map(|p| (p.workers as u64 * p.budget) as f64)
            .collect::<Vec<_>>(),
        &pts.iter().map(|p| p.value).collect::<Vec<_>>(),
        -0.5,
        window,
    )?;
    Ok(CatalystRateReport {
        fit,
        quadrupling_ratios: quadrupling_ratios(&pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 2.0, 8.0, 100.0, 1e4];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        let f = fit_power_law(&xs, &ys, -1.0, PL_RATE_WINDOW).unwrap();
        assert!((f.exponent + 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12 && f.pass);
    }

    #[test]
    fn too_few_points() {
        let e =
            fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.5, 0.3], -1.0, PL_RATE_WINDOW).unwrap_err();
        assert!(matches!(e, Error::InsufficientData { needed: 4, got: 3 }));
        assert!(fit_power_law(
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, 0.0, 1.0, 1.0],
            -1.0,
            PL_RATE_WINDOW
        )
        .is_err());
    }

    #[test]
    fn ci_contains_true_slope_for_noisy_data() {
        let xs: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
        let wiggle = [1.02, 0.97, 1.01, 0.99, 1.03, 0.98, 1.0, 1.01];
        let ys: Vec<f64> = xs.iter().zip(wiggle).map(|(x, w)| w / x).collect();
        let f = fit_power_law(&xs, &ys, -1.0, PL_RATE_WINDOW).unwrap();
        assert!(f.ci.0 < -1.0 && -1.0 < f.ci.1);
    }

    fn grid(value: impl Fn(f64, f64) -> f64) -> Vec<RatePoint> {
        let mut v = Vec::new();
        for k in 12..=16 {
            let t = 1u64 << k;
            v.push(RatePoint {
                workers: 4,
                budget: t,
                value: value(4.0, t as f64),
            });
        }
        for n in [1, 2, 8] {
            let t = 1u64 << 16;
            v.push(RatePoint {
                workers: n,
                budget: t,
                value: value(n as f64, t as f64),
            });
        }
        v
    }

    #[test]
    fn pl_rate_on_exact_inverse_nt() {
        let r = fit_pl_rate(&grid(|n, t| 5.0 / (n * t))).unwrap();
        assert_eq!((r.fixed_workers, r.fixed_budget), (4, 1 << 16));
        assert!((r.vs_budget.exponent + 1.0).abs() < 1e-12);
        let w = r.vs_workers.as_ref().unwrap();
        assert!((w.exponent + 1.0).abs() < 1e-12);
        assert_eq!(r.doubling_ratios.len(), 3);
        for (_, ratio) in &r.doubling_ratios {
            assert!((ratio - 2.0).abs() < 1e-12);
        }
        assert!(r.pass());
    }

    #[test]
    fn transient_dominated_sweep_is_steeper() {
        let r = fit_pl_rate(&grid(|n, t| 1e6 / (t * t) + 1.0 / (n * t))).unwrap();
        assert!(r.vs_budget.exponent < -1.3);
        assert!(!r.pass());
    }

    #[test]
    fn catalyst_rate_on_exact_inverse_sqrt() {
        let pts: Vec<RatePoint> = (0..4)
            .map(|k| {
                let t = 10_000u64 * 4u64.pow(k);
                RatePoint {
                    workers: 4,
                    budget: t,
                    value: 7.0 / ((4 * t) as f64).sqrt(),
                }
            })
            .collect();
        let r = fit_catalyst_rate(&pts).unwrap();
        assert!((r.fit.exponent + 0.5).abs() < 1e-12);
        assert_eq!(r.quadrupling_ratios.len(), 3);
        for (_, ratio) in &r.quadrupling_ratios {
            assert!((ratio - 2.0).abs() < 1e-12);
        }
        assert!(r.pass());
    }
}
