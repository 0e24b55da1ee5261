use log::warn;
use serde::{Deserialize, Serialize};

use super::cr_psgd::{check_common, run_synchronous};
use super::trace::{Algo, Measure, RunTrace, TraceOptions, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::executor::{RunContext, WorkerPool};
use crate::objectives::{make_proximal, Objective, Proximal, StochasticOracle};
use crate::point::Point;
use crate::schedule::{rate_constants, BatchSchedule, RateConstants, Schedule};

/// Inputs of the proximal outer loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystConfig {
    pub workers: usize,
    /// Per-worker sample budget `T`, split across the outer iterations.
    pub budget: u64,
    pub theta: f64,
    pub y0: Point,
    pub b1: u64,
    pub rho: f64,
    pub gamma: f64,
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub run_id: u64,
    /// Only `keep_iterates` applies; one record is written per outer step.
    #[serde(default)]
    pub trace: TraceOptions,
}

impl CatalystConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        workers: usize,
        budget: u64,
        theta: f64,
        y0: Point,
        b1: u64,
        rho: f64,
        gamma: f64,
    ) -> Self {
        Self {
            workers,
            budget,
            theta,
            y0,
            b1,
            rho,
            gamma,
            cap: None,
            run_id: 0,
            trace: TraceOptions::default(),
        }
    }

    pub fn with_run_id(mut self, run_id: u64) -> Self {
        self.run_id = run_id;
        self
    }

    /// `K = floor(sqrt(N T))`.
    pub fn outer_iterations(&self) -> u64 {
        (self.workers as u64).saturating_mul(self.budget).isqrt()
    }

    /// `floor(sqrt(T / N))`, the per-worker budget of each inner call.
    pub fn inner_budget(&self) -> u64 {
        (self.budget / self.workers.max(1) as u64).isqrt()
    }

    pub fn schedule(&self) -> Result<BatchSchedule> {
        BatchSchedule::with_cap(self.b1, self.rho, self.cap)
    }
}

/// Rate constants of the proximal subproblem and the budget threshold above
/// which the stationarity guarantee is stated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalystDiagnostics {
    pub inner: RateConstants,
    pub budget_threshold: f64,
    pub budget_meets_threshold: bool,
}

/// `None` when `gamma >= 1 / (theta + L)`, where the inner rate bound does
/// not apply at all.
pub fn catalyst_diagnostics(
    cfg: &CatalystConfig,
    l: f64,
    sigma2: f64,
) -> Option<CatalystDiagnostics> {
    let inner = rate_constants(
        cfg.gamma,
        cfg.theta - l,
        cfg.theta + l,
        cfg.rho,
        cfg.b1,
        sigma2,
    )
    .ok()?;
    let threshold = inner.catalyst_budget_threshold(cfg.workers as u64, cfg.theta, l);
    Some(CatalystDiagnostics {
        inner,
        budget_threshold: threshold,
        budget_meets_threshold: cfg.budget as f64 >= threshold,
    })
}

/// The proximal outer loop over an arbitrary subproblem factory.
///
/// For `k = 1..=K` the inner CR-PSGD runs on `factory(y^(k-1))` with budget
/// `floor(sqrt(T/N))`, warm-started at `y^(k-1)`. One trace record per
/// outer step reports `f(y^(k))` and `|grad f(y^(k))|^2` for the base
/// objective `base`. Stream round keys continue across inner calls.
pub fn cr_psgd_catalyst_with<B, O, F>(
    base: &B,
    factory: F,
    cfg: &CatalystConfig,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)>
where
    B: Objective + ?Sized,
    O: StochasticOracle,
    F: Fn(&Point) -> Result<O>,
{
    check_common(cfg.workers, pool, cfg.gamma, base.dim(), &cfg.y0)?;
    let l = base.smoothness();
    if !(cfg.theta > l) {
        return Err(Error::config(format!(
            "theta = {} must exceed L = {l}",
            cfg.theta
        )));
    }
    if cfg.budget < cfg.workers as u64 {
        return Err(Error::config(format!(
            "budget T = {} must be at least N = {} for a nonempty inner budget",
            cfg.budget, cfg.workers
        )));
    }
    let schedule = Schedule::from(cfg.schedule()?);
    let outer = cfg.outer_iterations();
    let inner_budget = cfg.inner_budget();
    let mut trace = RunTrace::new(Algo::CrPsgdCatalyst, &cfg.y0);
    if schedule.is_degenerate(inner_budget) {
        warn!(
            "inner budget {inner_budget} is below the first batch {}; the outer loop cannot move",
            cfg.b1
        );
        trace.degenerate = true;
    }
    if cfg.gamma * (cfg.theta + l) >= 1.0 {
        warn!(
            "step size {} is not below 1/(theta + L); the inner rate bound does not apply",
            cfg.gamma
        );
    }

    let mut ctx = RunContext::new(cfg.run_id);
    let mut measure = Measure::new(base);
    let mut y = cfg.y0.clone();
    let mut round_base = 0;
    for k in 1..=outer {
        let sub = factory(&y)?;
        check_dim(y.dim(), sub.dim())?;
        let mut last_batch = 0;
        let rounds = run_synchronous(
            &sub,
            &schedule,
            &mut y,
            inner_budget,
            cfg.gamma,
            pool,
            &mut ctx,
            round_base,
            |_, b, _, _, _| {
                last_batch = b;
            },
        )?;
        round_base += rounds;
        let (loss, grad_norm_sq) = measure.at(&y);
        trace.records.push(TraceRecord {
            algo: Algo::CrPsgdCatalyst,
            outer_k: k,
            round_t: rounds,
            batch_size: last_batch,
            cum_sfo_per_worker: ctx.counters.sfo_per_worker,
            cum_comm_rounds: ctx.counters.comm_rounds,
            loss,
            grad_norm_sq,
            iterate: cfg.trace.keep_iterates.then(|| y.clone()),
        });
    }
    trace.sfo_per_worker = ctx.counters.sfo_per_worker;
    trace.comm_rounds = ctx.counters.comm_rounds;
    trace.final_iterate = y.clone();
    Ok((y, trace))
}

/// CR-PSGD inside a proximal-point outer loop for smooth nonconvex `f`:
/// each inner problem is `f(x) + theta/2 |x - y^(k-1)|^2`.
pub fn cr_psgd_catalyst<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &CatalystConfig,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)> {
    let factory =
        |y: &Point| -> Result<Proximal<&O>> { make_proximal(oracle, y.clone(), cfg.theta) };
    cr_psgd_catalyst_with(oracle, factory, cfg, pool)
}
