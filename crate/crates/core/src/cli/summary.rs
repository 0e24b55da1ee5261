//! Executing a resolved [`RunConfig`] and summarizing its trace.
//!
//! The summary's per-seed figures are computed from the trace rows alone,
//! so re-reading the CSV and calling [`summarize_rows`] reproduces them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::trace_csv::{trace_rows, TraceRow, TraceRun};
use crate::algorithms::{
    catalyst_diagnostics, cr_psgd, cr_psgd_catalyst, local_sgd_baseline, psgd_baseline, Algo,
    CatalystConfig, CatalystDiagnostics, CrPsgdConfig, PsgdConfig, RunTrace, TraceOptions,
};
use crate::error::Result;
use crate::executor::WorkerPool;
use crate::objectives::{Objective, Problem, StochasticOracle};
use crate::point::Point;
use crate::schedule::{rate_constants, RateConstants, Schedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub family: String,
    pub dim: usize,
    pub smoothness: f64,
    pub pl_modulus: Option<f64>,
    pub sigma2: f64,
    pub f_star: Option<f64>,
}

impl ProblemInfo {
    pub fn of(p: &Problem) -> Self {
        Self {
            family: p.family().into(),
            dim: p.dim(),
            smoothness: p.smoothness(),
            pl_modulus: p.pl_modulus(),
            sigma2: p.variance_bound(),
            f_star: p.f_star(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// `None` when the budget paid for no round.
    pub final_loss: Option<f64>,
    pub final_grad_norm_sq: Option<f64>,
    pub comm_rounds: u64,
    pub sfo_per_worker: u64,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub problem: ProblemInfo,
    /// Rounds the schedule admits within the budget (single-level runs).
    pub scheduled_rounds: Option<u64>,
    /// Constants of the growing schedule, when the problem has a known
    /// P-L modulus (or, for the proximal loop, for the inner problems).
    pub rate_constants: Option<RateConstants>,
    pub catalyst: Option<CatalystDiagnostics>,
    pub seeds: Vec<SeedSummary>,
}

impl RunSummary {
    pub fn mean_final_loss(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.seeds.iter().map(|s| s.final_loss).collect();
        v.filter(|v| !v.is_empty())
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn comm_rounds(&self) -> u64 {
        self.seeds.first().map_or(0, |s| s.comm_rounds)
    }

    pub fn sfo_per_worker(&self) -> u64 {
        self.seeds.first().map_or(0, |s| s.sfo_per_worker)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Per-seed figures from trace rows, in the order of `seeds`.
pub fn summarize_rows(rows: &[TraceRow], seeds: &[u64]) -> Vec<SeedSummary> {
    seeds
        .iter()
        .map(|&seed| {
            let mine: Vec<&TraceRow> = rows.iter().filter(|r| r.seed == seed).collect();
            let last = mine.last();
            SeedSummary {
                seed,
                final_loss: last.map(|r| r.loss),
                final_grad_norm_sq: last.map(|r| r.grad_norm_sq),
                comm_rounds: last.map_or(0, |r| r.cum_comm_rounds),
                sfo_per_worker: last.map_or(0, |r| r.cum_sfo_per_worker),
                records: mine.len(),
            }
        })
        .collect()
}

/// Runs one seed. The seed is the run key of every random stream.
pub fn run_seed(cfg: &RunConfig, problem: &Problem, seed: u64) -> Result<RunTrace> {
    let p = &cfg.params;
    let oracle: &dyn StochasticOracle = problem.oracle();
    let pool = WorkerPool::new(p.workers, cfg.threads())?;
    let x1 = Point::filled(oracle.dim(), p.x1);
    let trace = TraceOptions {
        every: p.trace_every,
        keep_iterates: false,
    };
    let out = match cfg.algorithm {
        Algo::CrPsgd => {
            let mut c = CrPsgdConfig::new(p.workers, p.budget, x1, p.b1, p.rho, p.gamma)
                .with_run_id(seed)
                .with_trace(trace);
            c.cap = p.cap;
            cr_psgd(oracle, &c, &pool)?
        }
        Algo::CrPsgdCatalyst => {
            let mut c = catalyst_config(cfg, oracle.smoothness(), x1).with_run_id(seed);
            c.trace = trace;
            cr_psgd_catalyst(oracle, &c, &pool)?
        }
        Algo::Psgd => psgd_baseline(oracle, &baseline_config(cfg, x1, seed, trace), &pool)?,
        Algo::LocalSgd => local_sgd_baseline(
            oracle,
            &baseline_config(cfg, x1, seed, trace),
            p.period,
            &pool,
        )?,
    };
    Ok(out.1)
}

fn baseline_config(cfg: &RunConfig, x1: Point, seed: u64, trace: TraceOptions) -> PsgdConfig {
    let p = &cfg.params;
    PsgdConfig::new(p.workers, p.budget, x1, p.batch, p.gamma)
        .with_run_id(seed)
        .with_trace(trace)
}

fn catalyst_config(cfg: &RunConfig, l: f64, y0: Point) -> CatalystConfig {
    let p = &cfg.params;
    let theta = p.theta.unwrap_or(p.theta_factor * l);
    let mut c = CatalystConfig::new(p.workers, p.budget, theta, y0, p.b1, p.rho, p.gamma);
    c.cap = p.cap;
    c
}

/// Runs every seed of `cfg` in order and returns the concatenated trace
/// rows with the summary.
pub fn execute(cfg: &RunConfig, problem: &Problem) -> Result<(Vec<TraceRow>, RunSummary)> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        log::info!("{} {}: seed {seed}", cfg.run_id, cfg.algorithm);
        let trace = run_seed(cfg, problem, seed)?;
        rows.extend(trace_rows(&TraceRun {
            run_id: &cfg.run_id,
            seed,
            trace: &trace,
        }));
    }
    let summary = summarize(cfg, problem, &rows)?;
    Ok((rows, summary))
}

/// Builds the summary of `rows` produced by `cfg` on `problem`.
pub fn summarize(cfg: &RunConfig, problem: &Problem, rows: &[TraceRow]) -> Result<RunSummary> {
    let p = &cfg.params;
    let info = ProblemInfo::of(problem);
    let mut scheduled_rounds = None;
    let mut rc = None;
    let mut catalyst = None;
    match cfg.algorithm {
        Algo::CrPsgd => {
            let s = Schedule::from(crate::schedule::BatchSchedule::with_cap(
                p.b1, p.rho, p.cap,
            )?);
            scheduled_rounds = Some(s.num_rounds(p.budget));
            if let Some(mu) = info.pl_modulus {
                rc = rate_constants(p.gamma, mu, info.smoothness, p.rho, p.b1, info.sigma2).ok();
            }
        }
        Algo::CrPsgdCatalyst => {
            let c = catalyst_config(cfg, info.smoothness, Point::zeros(info.dim));
            catalyst = catalyst_diagnostics(&c, info.smoothness, info.sigma2);
            rc = catalyst.as_ref().map(|d| d.inner);
        }
        Algo::Psgd => scheduled_rounds = Some(p.budget / p.batch),
        Algo::LocalSgd => scheduled_rounds = Some(p.budget / (p.batch * p.period)),
    }
    Ok(RunSummary {
        config: cfg.clone(),
        problem: info,
        scheduled_rounds,
        rate_constants: rc,
        catalyst,
        seeds: summarize_rows(rows, &cfg.seeds),
    })
}

/// Writes the trace CSV and summary JSON atomically.
pub fn write_outputs(
    rows: &[TraceRow],
    summary: &RunSummary,
    trace: &Path,
    summary_path: &Path,
) -> Result<()> {
    let mut buf = Vec::new();
    super::trace_csv::write_rows(&mut buf, rows)?;
    crate::objectives::write_atomic(trace, &buf)?;
    crate::objectives::write_atomic(summary_path, summary.to_json()?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::RunConfig;
    use crate::cli::trace_csv::{read_trace_csv, write_rows};

    fn quad(alg: &str, sigma2: f64) -> RunConfig {
        RunConfig::from_toml(&format!(
            "algorithm = \"{alg}\"\nseeds = [3, 4]\n[problem]\nfamily = \"quadratic\"\ndim = 3\nsigma2 = {sigma2}\n[params]\nworkers = 2\nbudget = 200\nx1 = 1.0\n"
        ))
        .unwrap()
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        for alg in ["cr-psgd", "psgd", "local-sgd", "cr-psgd-catalyst"] {
            let cfg = quad(alg, 1.0);
            let problem = cfg.problem.build(2, Path::new(".")).unwrap();
            let (rows, summary) = execute(&cfg, &problem).unwrap();
            let mut buf = Vec::new();
            write_rows(&mut buf, &rows).unwrap();
            let back = read_trace_csv(&buf[..]).unwrap();
            let again = summarize(&cfg, &problem, &back).unwrap();
            assert_eq!(
                again.to_json().unwrap(),
                summary.to_json().unwrap(),
                "{alg}"
            );
        }
    }

    #[test]
    fn psgd_and_local_h1_rows_match() {
        let cfg = quad("psgd", 1.0);
        let problem = cfg.problem.build(2, Path::new(".")).unwrap();
        let (a, s) = execute(&cfg, &problem).unwrap();
        let mut local = cfg.clone();
        local.algorithm = Algo::LocalSgd;
        let (b, _) = execute(&local, &problem).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                (x.loss, x.cum_comm_rounds, x.seed),
                (y.loss, y.cum_comm_rounds, y.seed)
            );
        }
        assert_eq!(s.comm_rounds(), 100);
        assert_eq!(s.scheduled_rounds, Some(100));
    }

    #[test]
    fn summary_embeds_resolved_defaults() {
        let cfg = quad("cr-psgd", 1.0);
        let problem = cfg.problem.build(2, Path::new(".")).unwrap();
        let (_, s) = execute(&cfg, &problem).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(v["config"]["params"]["rho"], 1.1);
        assert_eq!(v["config"]["params"]["b1"], 2);
        assert!(v["rate_constants"]["valid"].is_boolean());
        assert_eq!(s.comm_rounds(), s.scheduled_rounds.unwrap());
    }
}
