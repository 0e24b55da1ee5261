use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::executor::Counters;
use crate::objectives::Objective;
use crate::point::{norm_sq, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    CrPsgd,
    CrPsgdCatalyst,
    Psgd,
    LocalSgd,
}

impl Algo {
    pub const ALL: [Algo; 4] = [
        Algo::CrPsgd,
        Algo::CrPsgdCatalyst,
        Algo::Psgd,
        Algo::LocalSgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::CrPsgd => "cr-psgd",
            Algo::CrPsgdCatalyst => "cr-psgd-catalyst",
            Algo::Psgd => "psgd",
            Algo::LocalSgd => "local-sgd",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm {s:?}")))
    }
}

/// State after one communication round (or, for the proximal outer loop,
/// after one outer iteration).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub algo: Algo,
    /// Outer iteration, starting at 1; 0 for single-level algorithms.
    pub outer_k: u64,
    /// Round within the run (or within the outer iteration), starting at 1.
    pub round_t: u64,
    pub batch_size: u64,
    pub cum_sfo_per_worker: u64,
    pub cum_comm_rounds: u64,
    /// Deterministic objective value at the new iterate.
    pub loss: f64,
    pub grad_norm_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterate: Option<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algo: Algo,
    pub records: Vec<TraceRecord>,
    pub final_iterate: Point,
    pub sfo_per_worker: u64,
    pub comm_rounds: u64,
    /// The budget could not pay for a single round.
    pub degenerate: bool,
}

impl RunTrace {
    pub(crate) fn new(algo: Algo, x1: &Point) -> Self {
        Self {
            algo,
            records: Vec::new(),
            final_iterate: x1.clone(),
            sfo_per_worker: 0,
            comm_rounds: 0,
            degenerate: false,
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Loss of the final record, or `None` for an empty trace.
    pub fn final_loss(&self) -> Option<f64> {
        self.last().map(|r| r.loss)
    }

    pub fn counters(&self) -> Counters {
        Counters {
            sfo_per_worker: self.sfo_per_worker,
            comm_rounds: self.comm_rounds,
        }
    }

    /// Mean of the recorded squared gradient norms.
    pub fn mean_grad_norm_sq(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        Some(self.records.iter().map(|r| r.grad_norm_sq).sum::<f64>() / self.records.len() as f64)
    }
}

/// Which rounds produce trace records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Record every `every`-th round; the last round is always recorded.
    pub every: u64,
    pub keep_iterates: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            every: 1,
            keep_iterates: false,
        }
    }
}

impl TraceOptions {
    pub(crate) fn wants(&self, t: u64, last: bool) -> bool {
        last || t.is_multiple_of(self.every.max(1))
    }
}

pub(crate) struct Measure<'a, O: ?Sized> {
    pub obj: &'a O,
    scratch: Vec<f64>,
}

impl<'a, O: Objective + ?Sized> Measure<'a, O> {
    pub fn new(obj: &'a O) -> Self {
        Self {
            obj,
            scratch: vec![0.0; obj.dim()],
        }
    }

    /// `(f(x), |grad f(x)|^2)`.
    pub fn at(&mut self, x: &[f64]) -> (f64, f64) {
        let v = self.obj.value_and_gradient(x, &mut self.scratch);
        (v, norm_sq(&self.scratch))
    }
}
