//! CR-PSGD, its proximal outer loop for nonconvex objectives, and the
//! fixed-batch baselines it is compared against.
//!
//! All algorithms share the round primitives of [`crate::executor`], so
//! communication and sample counts are measured the same way, and each
//! returns the final iterate with a [`RunTrace`].

mod baselines;
mod catalyst;
mod cr_psgd;
mod trace;

pub use baselines::{local_sgd_baseline, psgd_baseline, PsgdConfig};
pub use catalyst::{
    catalyst_diagnostics, cr_psgd_catalyst, cr_psgd_catalyst_with, CatalystConfig,
    CatalystDiagnostics,
};
pub use cr_psgd::{cr_psgd, CrPsgdConfig};
pub use trace::{Algo, RunTrace, TraceOptions, TraceRecord};
