//! CR-PSGD on a strongly convex quadratic: the final gap shrinks like
//! `1/(N T)` while the round count grows only logarithmically.
//!
//! ```text
//! cargo run --release --example quadratic_speedup
//! ```

use crpsgd::algorithms::{cr_psgd, CrPsgdConfig};
use crpsgd::executor::WorkerPool;
use crpsgd::objectives::{AdditiveGaussian, Objective, Quadratic};
use crpsgd::Point;

fn mean_gap(
    oracle: &AdditiveGaussian<Quadratic>,
    workers: usize,
    budget: u64,
    seeds: u64,
) -> crpsgd::Result<(f64, u64)> {
    let pool = WorkerPool::new(workers, 0)?;
    let mut total = 0.0;
    let mut rounds = 0;
    for seed in 0..seeds {
        let cfg = CrPsgdConfig::new(
            workers,
            budget,
            Point::filled(oracle.dim(), 1.0),
            2,
            1.1,
            0.5,
        )
        .with_run_id(seed);
        let (x, trace) = cr_psgd(oracle, &cfg, &pool)?;
        total += oracle.value(&x);
        rounds = trace.comm_rounds;
    }
    Ok((total / seeds as f64, rounds))
}

fn main() -> crpsgd::Result<()> {
    let oracle = AdditiveGaussian::new(Quadratic::isotropic(16, 1.0), 1.0)?;
    println!("{:>8} {:>4} {:>14} {:>8}", "T", "N", "mean gap", "rounds");
    for budget in [1u64 << 10, 1 << 12, 1 << 14] {
        for workers in [1, 4] {
            let (gap, rounds) = mean_gap(&oracle, workers, budget, 10)?;
            println!("{budget:>8} {workers:>4} {gap:>14.4e} {rounds:>8}");
        }
    }
    Ok(())
}
