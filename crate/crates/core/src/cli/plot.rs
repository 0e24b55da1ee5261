//! Gnuplot scripts for trace CSVs. One line per `(run_id, algo, seed)`
//! series, each selected from the CSV by an `awk` filter.

use std::fmt::Write as _;
use std::path::Path;

use super::trace_csv::TraceRow;
use super::{XAxis, YAxis};
use crate::error::{Error, Result};

fn column(x: XAxis) -> (usize, &'static str) {
    match x {
        XAxis::Sfo => (7, "SFO calls per worker"),
        XAxis::Comm => (8, "communication rounds"),
    }
}

fn value_column(y: YAxis) -> (usize, &'static str) {
    match y {
        YAxis::Loss => (9, "loss"),
        YAxis::GradNormSq => (10, "squared gradient norm"),
    }
}

fn plain(field: &str) -> Result<&str> {
    if field.contains([',', '"', '\'', '\n', '\r', '\\']) {
        return Err(Error::config(format!(
            "{field:?} cannot be filtered by awk; avoid , \" ' and \\"
        )));
    }
    Ok(field)
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Distinct series in order of first appearance.
pub fn series(rows: &[TraceRow]) -> Vec<(String, String, u64)> {
    let mut out: Vec<(String, String, u64)> = Vec::new();
    for r in rows {
        let key = (r.run_id.clone(), r.algo.to_string(), r.seed);
        if !out.contains(&key) {
            out.push(key);
        }
    }
    out
}

pub fn gnuplot_script(
    csv: &Path,
    rows: &[TraceRow],
    x: XAxis,
    y: YAxis,
    image: &Path,
) -> Result<String> {
    let (xc, xlabel) = column(x);
    let (yc, ylabel) = value_column(y);
    let csv = csv.display().to_string();
    let mut s = String::new();
    writeln!(s, "set terminal pngcairo size 1000,700").unwrap();
    writeln!(s, "set output {}", quote(&image.display().to_string())).unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set xlabel '{xlabel}'").unwrap();
    writeln!(s, "set ylabel '{ylabel}'").unwrap();
    writeln!(s, "set logscale y").unwrap();
    writeln!(s, "set key outside right").unwrap();
    let lines = series(rows);
    if lines.is_empty() {
        writeln!(s, "# {csv} has no rows").unwrap();
        return Ok(s);
    }
    let mut plots = Vec::new();
    for (run_id, algo, seed) in &lines {
        let filter = format!(
            "< awk -F, 'NR > 1 && $1 == \"{}\" && $2 == \"{algo}\" && $3 == \"{seed}\"' \"{}\"",
            plain(run_id)?,
            plain(&csv)?
        );
        plots.push(format!(
            "{} using {xc}:{yc} with lines title {}",
            quote(&filter),
            quote(&format!("{run_id} {algo} seed {seed}"))
        ));
    }
    writeln!(s, "plot \\\n    {}", plots.join(", \\\n    ")).unwrap();
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Algo;

    fn row(run_id: &str, algo: Algo, seed: u64) -> TraceRow {
        TraceRow {
            run_id: run_id.into(),
            algo,
            seed,
            outer_k: 0,
            round_t: 1,
            batch_size: 2,
            cum_sfo_per_worker: 2,
            cum_comm_rounds: 1,
            loss: 0.5,
            grad_norm_sq: 0.1,
        }
    }

    #[test]
    fn one_line_per_series() {
        let rows = vec![
            row("a", Algo::Psgd, 1),
            row("a", Algo::Psgd, 1),
            row("a", Algo::Psgd, 2),
            row("b", Algo::CrPsgd, 1),
        ];
        let s = gnuplot_script(
            Path::new("t.csv"),
            &rows,
            XAxis::Comm,
            YAxis::Loss,
            Path::new("o.png"),
        )
        .unwrap();
        assert_eq!(s.matches("with lines").count(), 3);
        assert!(s.contains("using 8:9"));
        assert!(s.contains("$2 == \"cr-psgd\""));
    }

    #[test]
    fn rejects_unfilterable_ids() {
        let rows = vec![row("a,b", Algo::Psgd, 1)];
        assert!(gnuplot_script(
            Path::new("t.csv"),
            &rows,
            XAxis::Sfo,
            YAxis::Loss,
            Path::new("o.png")
        )
        .is_err());
    }
}
