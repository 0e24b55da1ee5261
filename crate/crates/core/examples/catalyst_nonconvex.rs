//! The proximal outer loop on a nonconvex objective. Each outer step runs
//! CR-PSGD on `f(x) + theta/2 |x - y|^2`, which is strongly convex for
//! `theta > L`.
//!
//! ```text
//! cargo run --release --example catalyst_nonconvex
//! ```

use crpsgd::algorithms::{catalyst_diagnostics, cr_psgd_catalyst, CatalystConfig};
use crpsgd::executor::WorkerPool;
use crpsgd::objectives::Objective;
use crpsgd::verify::nonconvex_test_objective;
use crpsgd::Point;

fn main() -> crpsgd::Result<()> {
    let f = nonconvex_test_objective(4, 1.0, 2.0, 1.0)?;
    let l = f.smoothness();
    let workers = 4;
    let pool = WorkerPool::new(workers, 0)?;
    println!("L = {l}, theta = {}", 2.0 * l);
    for budget in [10_000u64, 40_000, 160_000] {
        let cfg = CatalystConfig::new(
            workers,
            budget,
            2.0 * l,
            Point::filled(4, 1.5),
            2,
            1.04,
            1.0 / 30.0,
        )
        .with_run_id(7);
        let (y, trace) = cr_psgd_catalyst(&f, &cfg, &pool)?;
        println!(
            "T = {budget:>6}: K = {:>4}, inner T = {:>3}, rounds {:>6}, mean |grad|^2 {:.4e}, f(y_K) {:.4}",
            cfg.outer_iterations(),
            cfg.inner_budget(),
            trace.comm_rounds,
            trace.mean_grad_norm_sq().unwrap_or(f64::NAN),
            f.value(&y)
        );
        if let Some(d) = catalyst_diagnostics(&cfg, l, 1.0) {
            println!(
                "           inner delta {:.3}, valid {}, T threshold {:.3e}",
                d.inner.delta, d.inner.valid, d.budget_threshold
            );
        }
    }
    Ok(())
}
