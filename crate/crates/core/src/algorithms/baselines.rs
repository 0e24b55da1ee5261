use serde::{Deserialize, Serialize};

use super::cr_psgd::{check_common, single_level};
use super::trace::{Algo, Measure, RunTrace, TraceOptions, TraceRecord};
use crate::error::{Error, Result};
use crate::executor::{aggregate, sgd_step_in_place, RunContext, WorkerPool};
use crate::objectives::StochasticOracle;
use crate::point::Point;
use crate::rng::StreamKey;
use crate::schedule::Schedule;

/// Inputs shared by the fixed-batch baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsgdConfig {
    pub workers: usize,
    pub budget: u64,
    pub x1: Point,
    pub batch: u64,
    pub gamma: f64,
    #[serde(default)]
    pub run_id: u64,
    #[serde(default)]
    pub trace: TraceOptions,
}

impl PsgdConfig {
    pub fn new(workers: usize, budget: u64, x1: Point, batch: u64, gamma: f64) -> Self {
        Self {
            workers,
            budget,
            x1,
            batch,
            gamma,
            run_id: 0,
            trace: TraceOptions::default(),
        }
    }

    pub fn with_run_id(mut self, run_id: u64) -> Self {
        self.run_id = run_id;
        self
    }

    pub fn with_trace(mut self, trace: TraceOptions) -> Self {
        self.trace = trace;
        self
    }
}

/// Classical parallel SGD: every round each worker averages `batch` samples
/// and the averages are aggregated. Uses `floor(T / batch)` rounds.
pub fn psgd_baseline<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &PsgdConfig,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)> {
    check_common(cfg.workers, pool, cfg.gamma, oracle.dim(), &cfg.x1)?;
    let schedule = Schedule::constant(cfg.batch)?;
    single_level(
        Algo::Psgd,
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

/// Local SGD with periodic averaging: between averagings each worker takes
/// `period` independent steps from the shared model, each on a batch of
/// `cfg.batch` fresh samples.
///
/// Worker `i`'s step `s` (counted globally from 1) draws keys
/// `(run, i, s, 0..batch)`. The averaging communicates each worker's
/// summed gradients `G_i` and sets `x <- x - gamma mean_i G_i`, which is the
/// average of the local models; with `period = 1` this is exactly
/// [`psgd_baseline`]. Uses `floor(T / (batch period))` averagings.
pub fn local_sgd_baseline<O: StochasticOracle + ?Sized>(
    oracle: &O,
    cfg: &PsgdConfig,
    period: u64,
    pool: &WorkerPool,
) -> Result<(Point, RunTrace)> {
    check_common(cfg.workers, pool, cfg.gamma, oracle.dim(), &cfg.x1)?;
    if period == 0 {
        return Err(Error::config("averaging period H must be >= 1"));
    }
    if cfg.batch == 0 {
        return Err(Error::config("fixed batch size must be >= 1"));
    }
    let mut trace = RunTrace::new(Algo::LocalSgd, &cfg.x1);
    let per_round = cfg.batch.saturating_mul(period);
    let rounds = cfg.budget / per_round;
    if rounds == 0 {
        log::warn!(
            "budget {} is below one averaging period of {per_round} samples",
            cfg.budget
        );
        trace.degenerate = true;
        return Ok((cfg.x1.clone(), trace));
    }

    let mut ctx = RunContext::new(cfg.run_id);
    let mut x = cfg.x1.clone();
    let mut measure = Measure::new(oracle);
    let dim = x.dim();
    for p in 1..=rounds {
        let first_step = (p - 1) * period + 1;
        for i in 0..pool.workers() {
            for s in first_step..first_step + period {
                ctx.claim(i as u64, s);
            }
        }
        let run = ctx.run_id();
        let sums = pool.map_workers(|i| {
            let mut local = x.clone();
            let mut g = vec![0.0; dim];
            let mut sum: Option<Point> = None;
            for s in first_step..first_step + period {
                oracle.batch_mean(
                    &local,
                    i,
                    StreamKey::new(run, i as u64, s, 0),
                    cfg.batch,
                    &mut g,
                );
                match sum.as_mut() {
                    // Starting from the first batch keeps H = 1 bit-identical to PSGD.
                    None => sum = Some(Point::from(g.clone())),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
                sgd_step_in_place(&mut local, &g, cfg.gamma);
            }
            sum.expect("period >= 1")
        });
        ctx.counters.sfo_per_worker += per_round;
        let mean = aggregate(&sums, &mut ctx.counters)?;
        sgd_step_in_place(&mut x, &mean, cfg.gamma);

        if cfg.trace.wants(p, p == rounds) {
            let (loss, grad_norm_sq) = measure.at(&x);
            trace.records.push(TraceRecord {
                algo: Algo::LocalSgd,
                outer_k: 0,
                round_t: p,
                batch_size: cfg.batch,
                cum_sfo_per_worker: ctx.counters.sfo_per_worker,
                cum_comm_rounds: ctx.counters.comm_rounds,
                loss,
                grad_norm_sq,
                iterate: cfg.trace.keep_iterates.then(|| x.clone()),
            });
        }
    }
    trace.sfo_per_worker = ctx.counters.sfo_per_worker;
    trace.comm_rounds = ctx.counters.comm_rounds;
    trace.final_iterate = x.clone();
    Ok((x, trace))
}
