//! The trace CSV: one row per recorded round, columns
//! `run_id, algo, seed, outer_k, round_t, batch_size, cum_sfo_per_worker,
//! cum_comm_rounds, loss, grad_norm_sq`. Floats are written in shortest
//! round-trip form, rows with LF endings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algo, RunTrace};
use crate::error::Result;

pub const TRACE_COLUMNS: [&str; 10] = [
    "run_id",
    "algo",
    "seed",
    "outer_k",
    "round_t",
    "batch_size",
    "cum_sfo_per_worker",
    "cum_comm_rounds",
    "loss",
    "grad_norm_sq",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: String,
    pub algo: Algo,
    pub seed: u64,
    pub outer_k: u64,
    pub round_t: u64,
    pub batch_size: u64,
    pub cum_sfo_per_worker: u64,
    pub cum_comm_rounds: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
}

/// One run to be written: its label, seed and trace.
pub struct TraceRun<'a> {
    pub run_id: &'a str,
    pub seed: u64,
    pub trace: &'a RunTrace,
}

pub fn trace_rows(run: &TraceRun<'_>) -> Vec<TraceRow> {
    run.trace
        .records
        .iter()
        .map(|r| TraceRow {
            run_id: run.run_id.to_string(),
            algo: r.algo,
            seed: run.seed,
            outer_k: r.outer_k,
            round_t: r.round_t,
            batch_size: r.batch_size,
            cum_sfo_per_worker: r.cum_sfo_per_worker,
            cum_comm_rounds: r.cum_comm_rounds,
            loss: r.loss,
            grad_norm_sq: r.grad_norm_sq,
        })
        .collect()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes the header and the rows. The header is present even when there
/// are no rows.
pub fn write_rows<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(TRACE_COLUMNS)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(w: W, runs: &[TraceRun<'_>]) -> Result<()> {
    let rows: Vec<TraceRow> = runs.iter().flat_map(trace_rows).collect();
    write_rows(w, &rows)
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(crate::error::Error::config(format!(
            "unexpected trace header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
