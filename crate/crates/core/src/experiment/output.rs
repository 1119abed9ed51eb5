//! CSV files. Reals are written with 12 significant digits, so identical
//! inputs give byte-identical files.
//!
//! Column order:
//! - `records.csv`: `value, trial, algorithm, per_cell_sum_rate, wsmse, iterations,
//!   converged, max_constraint_violation, error`, plus `wall_time` when requested.
//! - `summary.csv`: `value, algorithm, completed, failed, mean_rate, std_rate, std_error`.
//! - `cdf.csv`: `value, algorithm, rate, fraction`. Each group ends with a row
//!   whose `fraction` reads `mean` and whose `rate` is the group mean.
//! - convergence traces: `outer, inner, objective, wsmse, max_violation`.

use std::io::{Read, Write};
use std::path::Path;

use crate::algorithms::AlgorithmKind;
use crate::error::{Error, Result};
use crate::model::TraceEntry;

use super::stats::{CdfSeries, SummaryRow};
use super::sweep::TrialRecord;

pub const RECORD_COLUMNS: [&str; 9] =
    ["value", "trial", "algorithm", "per_cell_sum_rate", "wsmse", "iterations", "converged", "max_constraint_violation", "error"];

/// `x` rounded to 12 significant digits, printed in the shortest form that
/// reads back to the rounded value (scientific outside `[1e-5, 1e15)`).
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted real parses");
    if rounded == 0.0 {
        "0".into()
    } else if (1e-5..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn parse_real(field: &str) -> Result<f64> {
    match field {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => field.parse().map_err(|_| Error::Format(format!("`{field}` is not a number"))),
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(e.to_string())
    }
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink)
}

fn to_file(path: &Path, write: impl FnOnce(&mut csv::Writer<std::fs::File>) -> Result<()>) -> Result<()> {
    let mut w = writer(std::fs::File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(sink: W, records: &[TrialRecord], wall_time: bool) -> Result<()> {
    let mut w = writer(sink);
    let mut header: Vec<&str> = RECORD_COLUMNS.to_vec();
    if wall_time {
        header.push("wall_time");
    }
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![
            format_real(r.value),
            r.trial.to_string(),
            r.algorithm.to_string(),
            format_real(r.per_cell_sum_rate),
            format_real(r.wsmse),
            r.iterations.to_string(),
            r.converged.to_string(),
            format_real(r.max_constraint_violation),
            r.error.clone().unwrap_or_default(),
        ];
        if wall_time {
            row.push(format_real(r.wall_time));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[TrialRecord], wall_time: bool) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(file, records, wall_time)
}

/// Reads a file written by [`write_records`]. Records get `value_index` by
/// order of first appearance of their value.
pub fn read_records<R: Read>(source: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(source);
    let headers = rd.headers().map_err(csv_error)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("records file has no `{name}` column")));
    let idx: Vec<usize> = RECORD_COLUMNS.iter().map(|c| column(c)).collect::<Result<_>>()?;
    let wall = headers.iter().position(|h| h == "wall_time");
    let mut values: Vec<u64> = Vec::new();
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let at = |i: usize| row.get(idx[i]).unwrap_or("");
        let context = |e: Error| Error::Format(format!("record {}: {e}", line + 1));
        let value = parse_real(at(0)).map_err(context)?;
        let value_index = match values.iter().position(|&v| v == value.to_bits()) {
            Some(i) => i,
            None => {
                values.push(value.to_bits());
                values.len() - 1
            }
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("record {}: `{s}` is not a count", line + 1)));
        out.push(TrialRecord {
            value_index,
            value,
            trial: int(at(1))?,
            algorithm: at(2).parse::<AlgorithmKind>().map_err(|e| Error::Format(format!("record {}: {e}", line + 1)))?,
            per_cell_sum_rate: parse_real(at(3)).map_err(context)?,
            wsmse: parse_real(at(4)).map_err(context)?,
            iterations: int(at(5))?,
            converged: at(6) == "true",
            max_constraint_violation: parse_real(at(7)).map_err(context)?,
            wall_time: match wall {
                Some(i) => parse_real(row.get(i).unwrap_or("0")).map_err(context)?,
                None => 0.0,
            },
            error: Some(at(8).to_string()).filter(|e| !e.is_empty()),
        });
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<TrialRecord>> {
    read_records(std::fs::File::open(path)?)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    to_file(path, |w| {
        w.write_record(["value", "algorithm", "completed", "failed", "mean_rate", "std_rate", "std_error"]).map_err(csv_error)?;
        for r in rows {
            w.write_record([
                format_real(r.value),
                r.algorithm.to_string(),
                r.completed.to_string(),
                r.failed.to_string(),
                format_real(r.mean_rate),
                format_real(r.std_rate),
                format_real(r.std_error),
            ])
            .map_err(csv_error)?;
        }
        Ok(())
    })
}

pub fn write_cdf(path: &Path, series: &[CdfSeries]) -> Result<()> {
    to_file(path, |w| {
        w.write_record(["value", "algorithm", "rate", "fraction"]).map_err(csv_error)?;
        for s in series {
            for p in &s.points {
                w.write_record([format_real(s.value), s.algorithm.to_string(), format_real(p.rate), format_real(p.fraction)]).map_err(csv_error)?;
            }
            w.write_record([format_real(s.value), s.algorithm.to_string(), format_real(s.mean), "mean".to_string()]).map_err(csv_error)?;
        }
        Ok(())
    })
}

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    to_file(path, |w| {
        w.write_record(["outer", "inner", "objective", "wsmse", "max_violation"]).map_err(csv_error)?;
        for t in trace {
            w.write_record([t.outer.to_string(), t.inner.to_string(), format_real(t.objective), format_real(t.wsmse), format_real(t.max_violation)])
                .map_err(csv_error)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, error: Option<&str>) -> TrialRecord {
        TrialRecord {
            value_index: 0,
            value: 20.0,
            trial,
            algorithm: AlgorithmKind::Pwf,
            per_cell_sum_rate: 1.0 / 3.0,
            wsmse: 2.5,
            iterations: 17,
            converged: true,
            max_constraint_violation: 0.0,
            wall_time: 0.125,
            error: error.map(String::from),
        }
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_real(2.0), "2");
        assert_eq!(format_real(-1.234567890123456e-20), "-1.23456789012e-20");
        assert_eq!(format_real(-0.0), "0");
        assert_eq!(format_real(f64::NAN), "nan");
    }

    #[test]
    fn record_files() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[], false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);

        let mut buf = Vec::new();
        write_records(&mut buf, &[record(0, None)], false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, format!("{}\n20,0,pwf,0.333333333333,2.5,17,true,0,\n", RECORD_COLUMNS.join(",")));

        let mut buf = Vec::new();
        let recs = [record(0, None), record(1, Some("numerical failure: x, y"))];
        write_records(&mut buf, &recs, true).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].error.as_deref(), Some("numerical failure: x, y"));
        assert_eq!(back[0].wall_time, 0.125);
        assert_eq!(back[0].per_cell_sum_rate, 0.333333333333);
    }

    #[test]
    fn missing_column_is_reported() {
        let err = read_records("value,trial\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("algorithm"), "{err}");
    }
}
