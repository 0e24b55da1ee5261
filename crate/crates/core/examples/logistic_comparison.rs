//! Distributed logistic regression: CR-PSGD against fixed-batch parallel
//! SGD and local SGD at the same per-worker sample budget. Writes the merged
//! trace to `logistic_trace.csv`.
//!
//! ```text
//! cargo run --release --example logistic_comparison
//! ```

use crpsgd::algorithms::{
    cr_psgd, local_sgd_baseline, psgd_baseline, CrPsgdConfig, PsgdConfig, RunTrace,
};
use crpsgd::cli::trace_csv::{write_trace_csv, TraceRun};
use crpsgd::executor::WorkerPool;
use crpsgd::objectives::{generate_logistic_instance, LogisticOptions};
use crpsgd::Point;

fn main() -> crpsgd::Result<()> {
    let (workers, budget, dim) = (10, 10_000, 50);
    let problem =
        generate_logistic_instance(dim, workers, 1000, 0.001, 1, LogisticOptions::default())?;
    let pool = WorkerPool::new(workers, 0)?;
    let x1 = Point::zeros(dim);
    let seed = 1;

    let cr = CrPsgdConfig::new(workers, budget, x1.clone(), 2, 1.1, 0.1).with_run_id(seed);
    let fixed = PsgdConfig::new(workers, budget, x1, 2, 0.1).with_run_id(seed);
    let runs: Vec<(&str, RunTrace)> = vec![
        ("cr-psgd", cr_psgd(&problem, &cr, &pool)?.1),
        ("psgd", psgd_baseline(&problem, &fixed, &pool)?.1),
        (
            "local-sgd-h8",
            local_sgd_baseline(&problem, &fixed, 8, &pool)?.1,
        ),
    ];

    println!(
        "{:<14} {:>12} {:>8} {:>10}",
        "run", "final loss", "rounds", "sfo/worker"
    );
    for (name, t) in &runs {
        println!(
            "{name:<14} {:>12.6} {:>8} {:>10}",
            t.final_loss().unwrap_or(f64::NAN),
            t.comm_rounds,
            t.sfo_per_worker
        );
    }

    let labelled: Vec<TraceRun> = runs
        .iter()
        .map(|(name, trace)| TraceRun {
            run_id: name,
            seed,
            trace,
        })
        .collect();
    let file = std::fs::File::create("logistic_trace.csv").map_err(|e| crpsgd::Error::Io {
        path: "logistic_trace.csv".into(),
        source: e,
    })?;
    write_trace_csv(file, &labelled)?;
    println!("trace written to logistic_trace.csv");
    Ok(())
}
