//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{check_workers, Output, Params, ProblemSpec, RunConfig};
use super::summary::{execute as execute_config, write_outputs, RunSummary};
use super::trace_csv::{read_trace_csv, write_rows};
use super::{
    Command, CompareArgs, GenFamily, Outcome, PlotArgs, RunArgs, Suite, SweepLocalHArgs, VerifyArgs,
};
use crate::algorithms::PsgdConfig;
use crate::error::{Error, Result};
use crate::objectives::{
    generate_logistic_instance, write_atomic, LogisticOptions, Objective, Problem, Quadratic,
    StochasticOracle,
};
use crate::point::Point;
use crate::verify::{
    catalyst_rate_sweep, check_facts_suite, determinism_check, lemma1_grid, pl_rate_sweep,
    sweep_local_h, CatalystSweepConfig, DeterminismConfig, FactsReport, PlSweepConfig,
};

pub fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Gen { family } => gen(family),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Verify(a) => verify(a),
        Command::SweepLocalH(a) => sweep(a),
        Command::PlotScript(a) => plot_script(a),
    }
}

fn gen(family: GenFamily) -> Result<Outcome> {
    let (spec, workers, out) = match family {
        GenFamily::Logistic {
            dim,
            workers,
            samples_per_worker,
            reg,
            seed,
            feature_mean,
            out,
        } => (
            ProblemSpec::Logistic {
                dim,
                workers: Some(workers),
                samples_per_worker,
                reg,
                seed,
                feature_mean: feature_mean.into(),
            },
            workers,
            out,
        ),
        GenFamily::Quadratic {
            kind,
            dim,
            rank,
            curvature,
            seed,
            sigma2,
            out,
        } => (
            ProblemSpec::Quadratic {
                kind: kind.into(),
                dim,
                rank,
                curvature,
                seed,
                sigma2,
            },
            1,
            out,
        ),
        GenFamily::Nonconvex {
            dim,
            amplitude,
            frequency,
            sigma2,
            out,
        } => (
            ProblemSpec::Nonconvex {
                dim,
                amplitude,
                frequency,
                sigma2,
            },
            1,
            out,
        ),
    };
    let problem = spec.build(workers, Path::new("."))?;
    problem.save(&out)?;
    println!(
        "{} dim={} L={} mu={} sigma2={} -> {}",
        problem.family(),
        problem.dim(),
        problem.smoothness(),
        problem
            .pl_modulus()
            .map_or("none".into(), |m| m.to_string()),
        problem.variance_bound(),
        out.display()
    );
    Ok(Outcome::Done)
}

/// Resolves a run config from an optional file, a problem path and flags.
pub fn resolve_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let algorithm = args
                .overrides
                .algorithm
                .ok_or_else(|| Error::config("--algorithm is required without a config file"))?;
            if args.problem.is_none() {
                return Err(Error::config("--problem is required without a config file"));
            }
            RunConfig {
                algorithm,
                run_id: "run".into(),
                seeds: vec![1],
                problem: ProblemSpec::File {
                    path: PathBuf::new(),
                },
                params: Params::default(),
                output: Output::default(),
            }
        }
    };
    if let Some(p) = &args.problem {
        cfg.problem = ProblemSpec::File { path: p.clone() };
    }
    cfg.apply(&args.overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(s: &RunSummary) {
    println!("run {} ({})", s.config.run_id, s.config.algorithm);
    println!(
        "{:>12} {:>22} {:>22} {:>10} {:>12}",
        "seed", "final_loss", "grad_norm_sq", "comm", "sfo/worker"
    );
    for r in &s.seeds {
        println!(
            "{:>12} {:>22} {:>22} {:>10} {:>12}",
            r.seed,
            r.final_loss.map_or("-".into(), |v| format!("{v:.12e}")),
            r.final_grad_norm_sq
                .map_or("-".into(), |v| format!("{v:.12e}")),
            r.comm_rounds,
            r.sfo_per_worker
        );
    }
}

fn run(args: RunArgs) -> Result<Outcome> {
    let cfg = resolve_run_config(&args)?;
    let problem = cfg.problem.build(cfg.params.workers, Path::new("."))?;
    let (rows, summary) = execute_config(&cfg, &problem)?;
    write_outputs(&rows, &summary, &cfg.output.trace, &cfg.output.summary)?;
    print_summary(&summary);
    Ok(Outcome::Done)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub run_id: String,
    pub algorithm: crate::algorithms::Algo,
    pub mean_final_loss: Option<f64>,
    /// Difference to the reference (first) config's mean final loss.
    pub loss_delta: Option<f64>,
    pub relative_loss_delta: Option<f64>,
    pub comm_rounds: u64,
    /// Rounds divided by the reference config's rounds.
    pub comm_ratio: Option<f64>,
    pub sfo_per_worker: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub workers: usize,
    pub budget: u64,
    pub reference: String,
    pub entries: Vec<CompareEntry>,
    pub runs: Vec<RunSummary>,
}

/// Tabulates summaries against the first one.
pub fn compare_summaries(summaries: Vec<RunSummary>) -> Result<CompareReport> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::config("nothing to compare"))?;
    let ref_loss = first.mean_final_loss();
    let ref_comm = first.comm_rounds();
    let entries = summaries
        .iter()
        .map(|s| {
            let loss = s.mean_final_loss();
            let delta = loss.zip(ref_loss).map(|(a, b)| a - b);
            CompareEntry {
                run_id: s.config.run_id.clone(),
                algorithm: s.config.algorithm,
                mean_final_loss: loss,
                loss_delta: delta,
                relative_loss_delta: delta.zip(ref_loss).map(|(d, b)| d / b.abs()),
                comm_rounds: s.comm_rounds(),
                comm_ratio: (ref_comm > 0).then(|| s.comm_rounds() as f64 / ref_comm as f64),
                sfo_per_worker: s.sfo_per_worker(),
            }
        })
        .collect();
    Ok(CompareReport {
        workers: first.config.params.workers,
        budget: first.config.params.budget,
        reference: first.config.run_id.clone(),
        entries,
        runs: summaries,
    })
}

/// Loads and checks configs for a comparison: equal workers, budget and
/// problem; distinct run ids.
pub fn load_compare_configs(paths: &[PathBuf], seeds: Option<&[u64]>) -> Result<Vec<RunConfig>> {
    let mut cfgs = Vec::new();
    for p in paths {
        let mut c = RunConfig::load(p)?;
        if let Some(s) = seeds {
            c.seeds = s.to_vec();
        }
        c.validate()?;
        cfgs.push(c);
    }
    let first = &cfgs[0];
    for c in &cfgs[1..] {
        if c.params.workers != first.params.workers || c.params.budget != first.params.budget {
            return Err(Error::config(format!(
                "{} uses N={}, T={} but {} uses N={}, T={}",
                c.run_id,
                c.params.workers,
                c.params.budget,
                first.run_id,
                first.params.workers,
                first.params.budget
            )));
        }
        if c.problem != first.problem {
            return Err(Error::config(format!(
                "{} and {} use different problems",
                c.run_id, first.run_id
            )));
        }
    }
    for (i, c) in cfgs.iter().enumerate() {
        if cfgs[..i].iter().any(|d| d.run_id == c.run_id) {
            return Err(Error::config(format!(
                "run id {:?} appears twice",
                c.run_id
            )));
        }
    }
    Ok(cfgs)
}

fn compare(args: CompareArgs) -> Result<Outcome> {
    let cfgs = load_compare_configs(&args.configs, args.seeds.as_deref())?;
    let problem = cfgs[0]
        .problem
        .build(cfgs[0].params.workers, Path::new("."))?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for c in &cfgs {
        let (r, s) = execute_config(c, &problem)?;
        rows.extend(r);
        summaries.push(s);
    }
    let report = compare_summaries(summaries)?;
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows)?;
    write_atomic(&args.out, &buf)?;
    write_atomic(
        &args.report,
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    println!(
        "{:<20} {:<18} {:>22} {:>14} {:>10} {:>10}",
        "run_id", "algorithm", "mean_final_loss", "rel_delta", "comm", "comm_ratio"
    );
    for e in &report.entries {
        println!(
            "{:<20} {:<18} {:>22} {:>14} {:>10} {:>10}",
            e.run_id,
            e.algorithm.as_str(),
            e.mean_final_loss
                .map_or("-".into(), |v| format!("{v:.12e}")),
            e.relative_loss_delta
                .map_or("-".into(), |v| format!("{v:+.4e}")),
            e.comm_rounds,
            e.comm_ratio.map_or("-".into(), |v| format!("{v:.4}"))
        );
    }
    Ok(Outcome::Done)
}

/// Facts suite on `count` random strongly convex quadratics plus the
/// equality witness `f = 1/2 L |x|^2`.
pub fn facts_on_quadratics(
    count: usize,
    points: usize,
    seed: u64,
) -> Result<Vec<(String, FactsReport)>> {
    let mut out = Vec::new();
    let witness = Quadratic::isotropic(6, 3.0);
    out.push((
        "isotropic L=3".to_string(),
        check_facts_suite(&witness, points, seed)?,
    ));
    for i in 0..count as u64 {
        let q = Quadratic::random_anisotropic(4 + (i as usize % 5), seed.wrapping_add(i + 1))?;
        out.push((
            format!("anisotropic #{i}"),
            check_facts_suite(&q, points, seed.wrapping_add(1000 + i))?,
        ));
    }
    Ok(out)
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>, pass: bool, name: &str) -> Result<Outcome> {
    let json = serde_json::to_string_pretty(report)? + "\n";
    match out {
        Some(p) => write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    eprintln!("{name}: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass {
        Outcome::Done
    } else {
        Outcome::VerificationFailed
    })
}

fn default_determinism_problem(workers: usize) -> Result<Problem> {
    Ok(Problem::Logistic(generate_logistic_instance(
        10,
        workers,
        200,
        0.01,
        1,
        LogisticOptions::default(),
    )?))
}

fn verify(args: VerifyArgs) -> Result<Outcome> {
    let out = args.out.as_deref();
    match args.suite {
        Suite::Lemma1 { trials, seed } => {
            let r = lemma1_grid(trials, seed)?;
            emit(&r, out, r.pass(), "lemma1")
        }
        Suite::Facts {
            problem,
            points,
            quadratics,
            seed,
        } => match problem {
            Some(p) => {
                let problem = Problem::load(&p)?;
                let r = check_facts_suite(&problem, points, seed)?;
                emit(&r, out, r.pass(), "facts")
            }
            None => {
                let r = facts_on_quadratics(quadratics, points, seed)?;
                let pass = r.iter().all(|(_, f)| f.pass());
                emit(&r, out, pass, "facts")
            }
        },
        Suite::PlRate { seeds } => {
            let r = pl_rate_sweep(&PlSweepConfig {
                seeds,
                ..Default::default()
            })?;
            emit(&r, out, r.pass(), "pl-rate")
        }
        Suite::CatalystRate { seeds } => {
            let r = catalyst_rate_sweep(&CatalystSweepConfig {
                seeds,
                ..Default::default()
            })?;
            emit(&r, out, r.pass(), "catalyst-rate")
        }
        Suite::Determinism {
            problem,
            workers,
            budget,
        } => {
            let problem = match problem {
                Some(p) => Problem::load(&p)?,
                None => default_determinism_problem(workers)?,
            };
            check_workers(&problem, workers)?;
            let mut cfg = DeterminismConfig::new(workers);
            cfg.budget = budget;
            cfg.parallelism.dedup();
            let r = determinism_check(&problem, &cfg)?;
            emit(&r, out, r.pass(), "determinism")
        }
    }
}

fn sweep(args: SweepLocalHArgs) -> Result<Outcome> {
    let problem = Problem::load(&args.problem)?;
    check_workers(&problem, args.workers)?;
    let cfg = PsgdConfig::new(
        args.workers,
        args.budget,
        Point::filled(problem.dim(), args.x1),
        args.batch,
        args.gamma,
    );
    let r = sweep_local_h(&problem, &cfg, &args.periods, &args.seeds, args.factor)?;
    println!("{:>6} {:>22} {:>10}", "H", "mean_final_loss", "comm");
    for row in &r.rows {
        println!(
            "{:>6} {:>22} {:>10}",
            row.period,
            row.mean_final_loss
                .map_or("-".into(), |v| format!("{v:.12e}")),
            row.comm_rounds
        );
    }
    println!(
        "selected H = {} (loss ratio {:.6} to H = 1, limit {})",
        r.selected_period, r.selected_loss_ratio, r.factor
    );
    if let Some(p) = &args.out {
        write_atomic(p, (serde_json::to_string_pretty(&r)? + "\n").as_bytes())?;
    }
    Ok(Outcome::Done)
}

fn plot_script(args: PlotArgs) -> Result<Outcome> {
    let file = std::fs::File::open(&args.trace).map_err(|e| Error::io(&args.trace, e))?;
    let rows = read_trace_csv(file)?;
    let script = super::plot::gnuplot_script(&args.trace, &rows, args.x, args.y, &args.image)?;
    match &args.out {
        Some(p) => write_atomic(p, script.as_bytes())?,
        None => print!("{script}"),
    }
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Algo;

    fn write_cfg(dir: &Path, name: &str, alg: &str, extra: &str) -> PathBuf {
        let p = dir.join(format!("{name}.toml"));
        std::fs::write(
            &p,
            format!(
                "algorithm = \"{alg}\"\nrun_id = \"{name}\"\n[problem]\nfamily = \"file\"\npath = \"p.json\"\n[params]\nworkers = 2\nbudget = 400\ngamma = 0.05\nx1 = 1.0\n{extra}"
            ),
        )
        .unwrap();
        p
    }

    #[test]
    fn compare_rejects_mismatched_budgets() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_cfg(dir.path(), "a", "psgd", "");
        let b = write_cfg(dir.path(), "b", "cr-psgd", "");
        let c = dir.path().join("c.toml");
        std::fs::write(
            &c,
            std::fs::read_to_string(&b)
                .unwrap()
                .replace("budget = 400", "budget = 800")
                .replace("\"b\"", "\"c\""),
        )
        .unwrap();
        assert!(load_compare_configs(&[a.clone(), b.clone()], None).is_ok());
        assert!(load_compare_configs(&[a.clone(), c], None)
            .unwrap_err()
            .is_config());
        assert!(load_compare_configs(&[a.clone(), a], None)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn run_without_config_needs_algorithm_and_problem() {
        let args = RunArgs {
            config: None,
            problem: None,
            overrides: Default::default(),
        };
        assert!(resolve_run_config(&args).unwrap_err().is_config());
        let args = RunArgs {
            config: None,
            problem: Some("p.json".into()),
            overrides: super::super::config::Overrides {
                algorithm: Some(Algo::Psgd),
                budget: Some(10),
                ..Default::default()
            },
        };
        let c = resolve_run_config(&args).unwrap();
        assert_eq!(c.params.budget, 10);
        assert_eq!(
            c.problem,
            ProblemSpec::File {
                path: "p.json".into()
            }
        );
    }

    #[test]
    fn facts_on_default_quadratics_pass() {
        let r = facts_on_quadratics(3, 50, 1).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|(_, f)| f.pass()));
        assert!(r[0].1.check("smoothness-gap").unwrap().equality);
    }
}
