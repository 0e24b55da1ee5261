//! The numerical checks: one-round contraction, smoothness and convexity
//! inequalities, and thread-count determinism.
//!
//! ```text
//! cargo run --release --example verification
//! ```

use crpsgd::objectives::{generate_logistic_instance, LogisticOptions, Quadratic};
use crpsgd::verify::{check_facts_suite, determinism_check, lemma1_grid, DeterminismConfig};

fn main() -> crpsgd::Result<()> {
    let lemma = lemma1_grid(4000, 3)?;
    for c in &lemma.cells {
        println!(
            "gamma {:<5} N {} B {}: exact {:.5} <= bound {:.5}, simulated {:.5} +- {:.5}",
            c.gamma,
            c.workers,
            c.batch,
            c.closed_form,
            c.bound,
            c.empirical_mean,
            c.empirical_std_error
        );
    }
    println!(
        "contraction: {}",
        if lemma.pass() { "pass" } else { "FAIL" }
    );

    let q = Quadratic::random_anisotropic(6, 5)?;
    let facts = check_facts_suite(&q, 500, 9)?;
    for c in &facts.checks {
        println!(
            "{:<26} {} points, max ratio {:.6}",
            c.name, c.checked, c.max_ratio
        );
    }
    println!("facts: {}", if facts.pass() { "pass" } else { "FAIL" });

    let problem = generate_logistic_instance(8, 4, 100, 0.01, 2, LogisticOptions::default())?;
    let det = determinism_check(&problem, &DeterminismConfig::new(4))?;
    println!(
        "determinism over threads {:?}: {:?}",
        det.parallelism, det.identical
    );
    Ok(())
}
