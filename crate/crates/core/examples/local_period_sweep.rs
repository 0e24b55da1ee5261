//! Choosing the local SGD averaging period: the largest `H` whose final
//! loss stays within 1% of `H = 1`.
//!
//! ```text
//! cargo run --release --example local_period_sweep
//! ```

use crpsgd::algorithms::PsgdConfig;
use crpsgd::objectives::{generate_logistic_instance, LogisticOptions};
use crpsgd::verify::sweep_local_h;
use crpsgd::Point;

fn main() -> crpsgd::Result<()> {
    let problem = generate_logistic_instance(20, 8, 500, 0.001, 4, LogisticOptions::default())?;
    let cfg = PsgdConfig::new(8, 4000, Point::zeros(20), 2, 0.05);
    let sweep = sweep_local_h(&problem, &cfg, &[1, 2, 4, 8, 16, 32], &[1, 2, 3], 1.01)?;
    for row in &sweep.rows {
        println!(
            "H = {:>2}: loss {:.6}, {} rounds",
            row.period,
            row.mean_final_loss.unwrap_or(f64::NAN),
            row.comm_rounds
        );
    }
    println!(
        "selected H = {} (loss ratio {:.4})",
        sweep.selected_period, sweep.selected_loss_ratio
    );
    Ok(())
}
