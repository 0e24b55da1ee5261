use log::warn;
use serde::{Deserialize, Serialize};

use super::trace::{Algo, Measure, RunTrace, TraceOptions, TraceRecord};
use crate::error::{check_dim, Error, Result};
use crate::executor::{
    aggregate, parallel_batch_averages, sgd_step_in_place, RunContext, WorkerPool,
};
use crate::objectives::StochasticOracle;
use crate::point::Point;
use crate::schedule::{rate_constants, BatchSchedule, Schedule};

/// Inputs of a CR-PSGD run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrPsgdConfig {
    pub workers: usize,
    /// Per-worker sample budget `T`.
    pub budget: u64,
    pub x1: Point,
    pub b1: u64,
    pub rho: f64,
    pub gamma: f64,
    #[serde(default)]
    pub cap: Option<u64>,
    /// Selects the random streams; runs with equal ids are identical.
    #[serde(default)]
    pub run_id: u64,
    #[serde(default)]
    pub trace: TraceOptions,
}

impl CrPsgdConfig {
    pub fn new(workers: usize, budget: u64, x1: Point, b1: u64, rho: f64, gamma: f64) -> Self {
        Self {
            workers,
            budget,
            x1,
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

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn with_trace(mut self, trace: TraceOptions) -> Self {
        self.trace = trace;
        self
    }

    pub fn schedule(&self) -> Result<BatchSchedule> {
        BatchSchedule::with_cap(self.b1, self.rho, self.cap)
    }
}

pub(crate) fn check_common(
    workers: usize,
    pool: &WorkerPool,
    gamma: f64,
    oracle_dim: usize,
    x1: &Point,
) -> Result<()> {
    if workers == 0 {
        return Err(Error::config("number of workers must be >= 1"));
    }
    if workers != pool.workers() {
        return Err(Error::config(format!(
            "config has {workers} workers but the pool has {}",
            pool.workers()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("step size must be > 0, got {gamma}")));
    }
    check_dim(oracle_dim, x1.dim())
}

/// Warns when the rate guarantee's conditions do not hold. Never blocks:
/// practical settings often run with `rho` beyond the proven range.
pub(crate) fn advise<O: StochasticOracle + ?Sized>(oracle: &O, gamma: f64, rho: f64, b1: u64) {
    let l = oracle.smoothness();
    if gamma * l >= 1.0 {
        warn!(
            "step size {gamma} is not below 1/L = {}; the rate bound does not apply",
            1.0 / l
        );
        return;
    }
    if let Some(mu) = oracle.pl_modulus() {
        if let Ok(rc) = rate_constants(gamma, mu, l, rho, b1, oracle.variance_bound()) {
            if !rc.valid {
                warn!(
                    "rho = {rho} is not below 1/(1 - nu) = {}; the rate bound does not apply",
                    1.0 / (1.0 - rc.nu)
                );
            }
        }
    }
}

/// Runs the synchronous rounds of `schedule` under `budget`, starting from
/// `x`. Round `t` draws its samples with round key `round_base + t`.
/// `on_round(t, batch, last, x, ctx)` is called after every update.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_synchronous<O, F>(
    oracle: &O,
    schedule: &Schedule,
    x: &mut Point,
    budget: u64,
    gamma: f64,
    pool: &WorkerPool,
    ctx: &mut RunContext,
    round_base: u64,
    mut on_round: F,
) -> Result<u64>
where
    O: StochasticOracle + ?Sized,
    F: FnMut(u64, u64, bool, &Point, &RunContext),
{
    let rounds = schedule.num_rounds(budget);
    for t in 1..=rounds {
        let b = schedule.batch_size(t)?;
        let gs = parallel_batch_averages(oracle, x, b, pool, round_base + t, ctx)?;
        let g = aggregate(&gs, &mut ctx.counters)?;
        sgd_step_in_place(x, &g, gamma);
        on_round(t, b, t == rounds, x, ctx);
    }
    Ok(rounds)
}

/// A single-level round-synchronous run recording the full objective.
#[allow(clippy::too_many_arguments)]
pub(crate) fn single_level<O: StochasticOracle + ?Sized>(
    algo: Algo,
    oracle: &O,
    schedule: &Schedule,
    x1: &Point,
    budget: u64,
    gamma: f64,
    run_id: u64,
    opts: TraceOptions,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)> {
    let mut trace = RunTrace::new(algo, x1);
    if schedule.is_degenerate(budget) {
        warn!(
            "budget {budget} is below the first batch {}; no rounds executed",
            schedule.first_batch()
        );
        trace.degenerate = true;
        return Ok((x1.clone(), trace));
    }
    let mut ctx = RunContext::new(run_id);
    let mut x = x1.clone();
    let mut measure = Measure::new(oracle);
    run_synchronous(
        oracle,
        schedule,
        &mut x,
        budget,
        gamma,
        pool,
        &mut ctx,
        0,
        |t, b, last, x, ctx| {
            if !opts.wants(t, last) {
                return;
            }
            let (loss, grad_norm_sq) = measure.at(x);
            trace.records.push(TraceRecord {
                algo,
                outer_k: 0,
                round_t: t,
                batch_size: b,
                cum_sfo_per_worker: ctx.counters.sfo_per_worker,
                cum_comm_rounds: ctx.counters.comm_rounds,
                loss,
                grad_norm_sq,
                iterate: opts.keep_iterates.then(|| x.clone()),
            });
        },
    )?;
    trace.sfo_per_worker = ctx.counters.sfo_per_worker;
    trace.comm_rounds = ctx.counters.comm_rounds;
    trace.final_iterate = x.clone();
    Ok((x, trace))
}

/// Parallel SGD with geometrically growing batches.
///
/// Each round, every worker averages `B_t` fresh samples at the shared
/// iterate, the averages are aggregated once, and the iterate takes one
/// step; then `B_{t+1} = floor(rho^t B_1)`. Rounds run while the cumulative
/// batch total stays within the budget.
pub fn cr_psgd<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &CrPsgdConfig,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)> {
    check_common(cfg.workers, pool, cfg.gamma, oracle.dim(), &cfg.x1)?;
    let schedule = Schedule::from(cfg.schedule()?);
    advise(oracle, cfg.gamma, cfg.rho, cfg.b1);
    single_level(
        Algo::CrPsgd,
        oracle,
        &schedule,
        &cfg.x1,
        cfg.budget,
        cfg.gamma,
        cfg.run_id,
        cfg.trace,
        pool,
    )
}
