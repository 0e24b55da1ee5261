//! Multi-seed experiment sweeps. Cells are independent deterministic runs
//! and execute in parallel on the global rayon pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{
    fit_catalyst_rate, fit_pl_rate, quadrupling_ratios, CatalystRateReport, PlRateReport, RatePoint,
};
use super::nonconvex_test_objective;
use crate::algorithms::{
    cr_psgd, cr_psgd_catalyst, local_sgd_baseline, psgd_baseline, Algo, CatalystConfig,
    CrPsgdConfig, PsgdConfig, RunTrace,
};
use crate::cli::trace_csv::{write_trace_csv, TraceRun};
use crate::error::{Error, Result};
use crate::executor::WorkerPool;
use crate::objectives::{AdditiveGaussian, Objective, Quadratic, StochasticOracle};
use crate::point::Point;
use crate::schedule::{rate_constants, BatchSchedule, RateConstants, Schedule};

/// Run identifier of seed index `s` in a sweep.
pub fn sweep_run_id(base_seed: u64, s: u64) -> u64 {
    (base_seed << 32) ^ s
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// CR-PSGD on `f(x) = 1/2 |x|^2` in `dim` dimensions (`L = mu = 1`) with
/// additive gaussian noise, swept over `T` at fixed `N` and over `N` at
/// fixed `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlSweepConfig {
    pub dim: usize,
    pub sigma2: f64,
    pub gamma: f64,
    pub rho: f64,
    pub b1: u64,
    pub seeds: u64,
    pub base_seed: u64,
    pub fixed_workers: usize,
    pub budgets: Vec<u64>,
    pub fixed_budget: u64,
    pub workers: Vec<usize>,
}

impl Default for PlSweepConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            sigma2: 1.0,
            gamma: 0.5,
            rho: 1.1,
            b1: 2,
            seeds: 40,
            base_seed: 1,
            fixed_workers: 4,
            budgets: (12..=16).map(|k| 1u64 << k).collect(),
            fixed_budget: 1 << 16,
            workers: vec![1, 2, 4, 8],
        }
    }
}

impl PlSweepConfig {
    pub fn cells(&self) -> Vec<(usize, u64)> {
        let mut cells: Vec<(usize, u64)> = self
            .budgets
            .iter()
            .map(|&t| (self.fixed_workers, t))
            .collect();
        for &n in &self.workers {
            if !cells.contains(&(n, self.fixed_budget)) {
                cells.push((n, self.fixed_budget));
            }
        }
        cells
    }

    pub fn start(&self) -> Point {
        Point::filled(self.dim, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlCell {
    pub workers: usize,
    pub budget: u64,
    pub mean_gap: f64,
    pub std_error: f64,
    pub comm_rounds: u64,
    /// Rounds predicted by enumerating the schedule.
    pub scheduled_rounds: u64,
    /// `log_rho(T (rho - 1) / B_1 + 1)`.
    pub log_bound: f64,
}

impl PlCell {
    /// Round count equals the schedule enumeration and lies within one of
    /// the logarithmic bound on either side.
    pub fn comm_identity_holds(&self) -> bool {
        let r = self.comm_rounds as f64;
        self.comm_rounds == self.scheduled_rounds
            && r + 1.0 >= self.log_bound
            && r <= self.log_bound + 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlSweepReport {
    pub config: PlSweepConfig,
    pub rate_constants: RateConstants,
    pub cells: Vec<PlCell>,
    pub fit: PlRateReport,
}

impl PlSweepReport {
    pub fn pass(&self) -> bool {
        self.fit.pass() && self.cells.iter().all(PlCell::comm_identity_holds)
    }
}

pub fn pl_rate_sweep(cfg: &PlSweepConfig) -> Result<PlSweepReport> {
    let oracle = AdditiveGaussian::new(Quadratic::isotropic(cfg.dim, 1.0), cfg.sigma2)?;
    let rc = rate_constants(cfg.gamma, 1.0, 1.0, cfg.rho, cfg.b1, cfg.sigma2)?;
    let schedule = BatchSchedule::new(cfg.b1, cfg.rho)?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.seeds).map(move |s| (c, s)))
        .collect();
    let runs: Vec<(usize, f64, u64)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let (n, t) = cells[c];
            let pool = WorkerPool::new(n, 1)?;
            let run = CrPsgdConfig::new(n, t, cfg.start(), cfg.b1, cfg.rho, cfg.gamma)
                .with_run_id(sweep_run_id(cfg.base_seed, s));
            let (x, trace) = cr_psgd(&oracle, &run, &pool)?;
            Ok((c, oracle.value(&x), trace.comm_rounds))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(cells.len());
    for (c, &(n, t)) in cells.iter().enumerate() {
        let gaps: Vec<f64> = runs.iter().filter(|r| r.0 == c).map(|r| r.1).collect();
        let rounds = runs.iter().find(|r| r.0 == c).map_or(0, |r| r.2);
        let (mean_gap, std_error) = mean_and_se(&gaps);
        out.push(PlCell {
            workers: n,
            budget: t,
            mean_gap,
            std_error,
            comm_rounds: rounds,
            scheduled_rounds: Schedule::from(schedule).num_rounds(t),
            log_bound: schedule.log_round_bound(t),
        });
    }
    let points: Vec<RatePoint> = out
        .iter()
        .map(|c| RatePoint {
            workers: c.workers,
            budget: c.budget,
            value: c.mean_gap,
        })
        .collect();
    Ok(PlSweepReport {
        config: cfg.clone(),
        rate_constants: rc,
        cells: out,
        fit: fit_pl_rate(&points)?,
    })
}

/// The proximal outer loop on `1/2 |x|^2 + a sum cos(omega x_j)` with
/// `theta = theta_factor * L`, swept over `T` at fixed `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystSweepConfig {
    pub dim: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub sigma2: f64,
    pub theta_factor: f64,
    pub gamma: f64,
    pub rho: f64,
    pub b1: u64,
    pub workers: usize,
    pub budgets: Vec<u64>,
    pub seeds: u64,
    pub base_seed: u64,
    /// Every coordinate of the start point.
    pub start: f64,
}

impl Default for CatalystSweepConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            amplitude: 1.0,
            frequency: 2.0,
            sigma2: 1.0,
            theta_factor: 2.0,
            gamma: 1.0 / 30.0,
            rho: 1.04,
            b1: 2,
            workers: 4,
            budgets: vec![10_000, 40_000, 160_000, 640_000],
            seeds: 20,
            base_seed: 1,
            start: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystCell {
    pub workers: usize,
    pub budget: u64,
    pub outer_iterations: u64,
    pub inner_budget: u64,
    pub comm_rounds: u64,
    /// Seed average of the mean over `k` of `|grad f(y^(k))|^2`.
    pub mean_grad_norm_sq: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystSweepReport {
    pub config: CatalystSweepConfig,
    pub smoothness: f64,
    pub theta: f64,
    pub cells: Vec<CatalystCell>,
    /// Ratios across consecutive quadruplings of `N T`.
    pub quadrupling_ratios: Vec<(u64, f64)>,
    /// Power-law fit; present when at least four budgets were swept.
    pub fit: Option<CatalystRateReport>,
}

impl CatalystSweepReport {
    pub fn ratios_pass(&self) -> bool {
        let (lo, hi) = super::fit::CATALYST_RATIO_WINDOW;
        !self.quadrupling_ratios.is_empty()
            && self
                .quadrupling_ratios
                .iter()
                .all(|(_, r)| lo <= *r && *r <= hi)
    }

    pub fn pass(&self) -> bool {
        self.ratios_pass() && self.fit.as_ref().is_none_or(|f| f.fit.pass)
    }
}

pub fn catalyst_rate_sweep(cfg: &CatalystSweepConfig) -> Result<CatalystSweepReport> {
    let oracle = nonconvex_test_objective(cfg.dim, cfg.amplitude, cfg.frequency, cfg.sigma2)?;
    let l = oracle.smoothness();
    let theta = cfg.theta_factor * l;
    let jobs: Vec<(usize, u64)> = (0..cfg.budgets.len())
        .flat_map(|c| (0..cfg.seeds).map(move |s| (c, s)))
        .collect();
    let make = |t: u64, s: u64| {
        CatalystConfig::new(
            cfg.workers,
            t,
            theta,
            Point::filled(cfg.dim, cfg.start),
            cfg.b1,
            cfg.rho,
            cfg.gamma,
        )
        .with_run_id(sweep_run_id(cfg.base_seed, s))
    };
    let runs: Vec<(usize, f64, u64)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let pool = WorkerPool::new(cfg.workers, 1)?;
            let (_, trace) = cr_psgd_catalyst(&oracle, &make(cfg.budgets[c], s), &pool)?;
            let m = trace
                .mean_grad_norm_sq()
                .ok_or_else(|| Error::Degenerate("empty outer loop".into()))?;
            Ok((c, m, trace.comm_rounds))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (c, &t) in cfg.budgets.iter().enumerate() {
        let vals: Vec<f64> = runs.iter().filter(|r| r.0 == c).map(|r| r.1).collect();
        let (mean, se) = mean_and_se(&vals);
        let probe = make(t, 0);
        cells.push(CatalystCell {
            workers: cfg.workers,
            budget: t,
            outer_iterations: probe.outer_iterations(),
            inner_budget: probe.inner_budget(),
            comm_rounds: runs.iter().find(|r| r.0 == c).map_or(0, |r| r.2),
            mean_grad_norm_sq: mean,
            std_error: se,
        });
    }
    let points: Vec<RatePoint> = cells
        .iter()
        .map(|c| RatePoint {
            workers: c.workers,
            budget: c.budget,
            value: c.mean_grad_norm_sq,
        })
        .collect();
    let fit = if points.len() >= super::fit::MIN_FIT_POINTS {
        Some(fit_catalyst_rate(&points)?)
    } else {
        None
    };
    Ok(CatalystSweepReport {
        config: cfg.clone(),
        smoothness: l,
        theta,
        cells,
        quadrupling_ratios: quadrupling_ratios(&points),
        fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalHRow {
    pub period: u64,
    /// Seed-averaged final loss; `None` when the budget is below one period.
    pub mean_final_loss: Option<f64>,
    pub comm_rounds: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalHSweep {
    pub rows: Vec<LocalHRow>,
    /// Seed-averaged final loss with `H = 1`.
    pub reference_loss: f64,
    pub factor: f64,
    pub selected_period: u64,
    pub selected_loss_ratio: f64,
}

fn seed_mean_final_loss<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &PsgdConfig,
    period: u64,
    seeds: &[u64],
) -> Result<(Option<f64>, u64)> {
    let runs: Vec<RunTrace> = seeds
        .par_iter()
        .map(|&s| {
            let pool = WorkerPool::new(cfg.workers, 1)?;
            local_sgd_baseline(oracle, &cfg.clone().with_run_id(s), period, &pool).map(|r| r.1)
        })
        .collect::<Result<_>>()?;
    let comm = runs.first().map_or(0, |r| r.comm_rounds);
    let losses: Option<Vec<f64>> = runs.iter().map(RunTrace::final_loss).collect();
    Ok((losses.map(|l| l.iter().sum::<f64>() / l.len() as f64), comm))
}

/// Runs local SGD for every period in `periods` and selects the largest
/// whose seed-averaged final loss is within `factor` of the `H = 1` loss.
pub fn sweep_local_h<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &PsgdConfig,
    periods: &[u64],
    seeds: &[u64],
    factor: f64,
) -> Result<LocalHSweep> {
    if periods.is_empty() {
        return Err(Error::config("the list of averaging periods is empty"));
    }
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    if !(factor >= 1.0) {
        return Err(Error::config(format!(
            "loss factor must be >= 1, got {factor}"
        )));
    }
    let (reference, _) = seed_mean_final_loss(oracle, cfg, 1, seeds)?;
    let reference =
        reference.ok_or_else(|| Error::Degenerate("budget is below one batch".into()))?;
    let limit = reference + (factor - 1.0) * reference.abs();
    let mut rows = Vec::new();
    for &h in periods {
        let (mean_final_loss, comm_rounds) = seed_mean_final_loss(oracle, cfg, h, seeds)?;
        rows.push(LocalHRow {
            period: h,
            mean_final_loss,
            comm_rounds,
        });
    }
    let best = rows
        .iter()
        .filter(|r| r.mean_final_loss.is_some_and(|l| l <= limit))
        .max_by_key(|r| r.period);
    let (selected_period, selected_loss) = match best {
        Some(r) => (r.period, r.mean_final_loss.unwrap()),
        None => (1, reference),
    };
    Ok(LocalHSweep {
        rows,
        reference_loss: reference,
        factor,
        selected_period,
        selected_loss_ratio: selected_loss / reference,
    })
}

/// Parameters of the determinism check; every algorithm is run with them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminismConfig {
    pub workers: usize,
    pub budget: u64,
    pub gamma: f64,
    pub b1: u64,
    pub rho: f64,
    pub batch: u64,
    pub period: u64,
    /// `theta = theta_factor * L` for the proximal outer loop.
    pub theta_factor: f64,
    pub seed: u64,
    pub parallelism: Vec<usize>,
}

impl DeterminismConfig {
    pub fn new(workers: usize) -> Self {
        Self {
            workers,
            budget: 2000,
            gamma: 0.1,
            b1: 2,
            rho: 1.1,
            batch: 2,
            period: 4,
            theta_factor: 2.0,
            seed: 7,
            parallelism: vec![1, 2, workers],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterminismReport {
    pub parallelism: Vec<usize>,
    /// Per algorithm: whether every parallelism degree produced the same
    /// CSV bytes as the first.
    pub identical: Vec<(Algo, bool)>,
}

impl DeterminismReport {
    pub fn pass(&self) -> bool {
        self.identical.iter().all(|(_, ok)| *ok)
    }
}

/// Runs `algo` once and renders its trace CSV.
pub fn run_to_csv<O: StochasticOracle + ?Sized>(
    oracle: &O,
    algo: Algo,
    cfg: &DeterminismConfig,
    threads: usize,
) -> Result<Vec<u8>> {
    let pool = WorkerPool::new(cfg.workers, threads)?;
    let x1 = Point::zeros(oracle.dim());
    let trace = match algo {
        Algo::CrPsgd => {
            let c = CrPsgdConfig::new(cfg.workers, cfg.budget, x1, cfg.b1, cfg.rho, cfg.gamma)
                .with_run_id(cfg.seed);
            cr_psgd(oracle, &c, &pool)?.1
        }
        Algo::CrPsgdCatalyst => {
            let theta = cfg.theta_factor * oracle.smoothness();
            let c = CatalystConfig::new(
                cfg.workers,
                cfg.budget,
                theta,
                x1,
                cfg.b1,
                cfg.rho,
                cfg.gamma,
            )
            .with_run_id(cfg.seed);
            cr_psgd_catalyst(oracle, &c, &pool)?.1
        }
        Algo::Psgd => {
            let c = PsgdConfig::new(cfg.workers, cfg.budget, x1, cfg.batch, cfg.gamma)
                .with_run_id(cfg.seed);
            psgd_baseline(oracle, &c, &pool)?.1
        }
        Algo::LocalSgd => {
            let c = PsgdConfig::new(cfg.workers, cfg.budget, x1, cfg.batch, cfg.gamma)
                .with_run_id(cfg.seed);
            local_sgd_baseline(oracle, &c, cfg.period, &pool)?.1
        }
    };
    let mut out = Vec::new();
    write_trace_csv(
        &mut out,
        &[TraceRun {
            run_id: "determinism",
            seed: cfg.seed,
            trace: &trace,
        }],
    )?;
    Ok(out)
}

/// Repeats every algorithm at each parallelism degree and compares the
/// trace CSV bytes.
pub fn determinism_check<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &DeterminismConfig,
) -> Result<DeterminismReport> {
    let mut identical = Vec::new();
    for algo in Algo::ALL {
        let mut first: Option<Vec<u8>> = None;
        let mut same = true;
        for &threads in &cfg.parallelism {
            let bytes = run_to_csv(oracle, algo, cfg, threads)?;
            match &first {
                None => first = Some(bytes),
                Some(f) => same &= *f == bytes,
            }
        }
        identical.push((algo, same));
    }
    Ok(DeterminismReport {
        parallelism: cfg.parallelism.clone(),
        identical,
    })
}
