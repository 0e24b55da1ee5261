//! Batch sizes, round counts and rate constants of the growing schedule.
//!
//! ```text
//! cargo run --example batch_schedule
//! ```

use crpsgd::schedule::{rate_constants, BatchSchedule, Schedule};

fn main() -> crpsgd::Result<()> {
    let geometric = BatchSchedule::new(2, 1.1)?;
    let first: Vec<u64> = (1..=12)
        .map(|t| geometric.batch_size(t))
        .collect::<Result<_, _>>()?;
    println!("first batches: {first:?}");

    let budget = 10_000;
    let growing = Schedule::from(geometric);
    let fixed = Schedule::constant(2)?;
    println!(
        "T = {budget}: {} rounds growing (log bound {:.2}), {} rounds fixed",
        growing.num_rounds(budget),
        geometric.log_round_bound(budget),
        fixed.num_rounds(budget)
    );

    let capped = Schedule::from(BatchSchedule::with_cap(32, 1.02, Some(512))?);
    println!(
        "capped at 512: {} rounds for T = 50000",
        capped.num_rounds(50_000)
    );

    for rho in [1.02, 1.1] {
        let rc = rate_constants(0.1, 1.0, 1.0, rho, 2, 1.0)?;
        println!(
            "gamma 0.1, mu = L = 1, rho {rho}: nu {:.4} delta {:.4} c1 {:.3e} c2 {:.3e} valid {}",
            rc.nu, rc.delta, rc.c1, rc.c2, rc.valid
        );
    }
    Ok(())
}
