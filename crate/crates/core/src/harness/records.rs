//! Per-iteration run records and their CSV form.
//!
//! Columns are `seed,k,samples,sup_error_last[,sup_error_ns],wall_ms`. The
//! non-stationary column is present only when tracking is enabled; `wall_ms`
//! is always present and empty unless timing is on.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub k: usize,
    pub samples: u64,
    /// `‖v* − v^{π_k}‖_∞`.
    pub sup_error_last: f64,
    /// `‖v* − v^{π'_k}‖_∞`.
    pub sup_error_ns: Option<f64>,
    pub wall_ms: Option<f64>,
}

fn header(with_ns: bool) -> Vec<&'static str> {
    let mut h = vec!["seed", "k", "samples", "sup_error_last"];
    if with_ns {
        h.push("sup_error_ns");
    }
    h.push("wall_ms");
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records; the `sup_error_ns` column appears when any record has it.
pub fn write_records<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let with_ns = records.iter().any(|r| r.sup_error_ns.is_some());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(with_ns))?;
    for r in records {
        let mut row = vec![
            r.seed.to_string(),
            r.k.to_string(),
            r.samples.to_string(),
            r.sup_error_last.to_string(),
        ];
        if with_ns {
            row.push(opt(r.sup_error_ns));
        }
        row.push(opt(r.wall_ms));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_records(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_ns = names.contains(&"sup_error_ns");
    if names != header(with_ns) {
        return Err(Error::Config(format!("unexpected record columns {names:?}")));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad number {s:?}")))
        }
    };
    let num = |s: &str| Error::Config(format!("bad number {s:?}"));
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let ns_offset = usize::from(with_ns);
        out.push(RunRecord {
            seed: row[0].parse().map_err(|_| num(&row[0]))?,
            k: row[1].parse().map_err(|_| num(&row[1]))?,
            samples: row[2].parse().map_err(|_| num(&row[2]))?,
            sup_error_last: row[3].parse().map_err(|_| num(&row[3]))?,
            sup_error_ns: if with_ns { parse_opt(&row[4])? } else { None },
            wall_ms: parse_opt(&row[4 + ns_offset])?,
        });
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, ns: Option<f64>) -> RunRecord {
        RunRecord {
            seed: 4,
            k,
            samples: 16 * k as u64,
            sup_error_last: 0.1 / (k + 1) as f64,
            sup_error_ns: ns,
            wall_ms: None,
        }
    }

    #[test]
    fn round_trip_without_ns_column() {
        let records = vec![record(0, None), record(1, None)];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,k,samples,sup_error_last,wall_ms\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn round_trip_with_ns_column() {
        let records = vec![record(0, Some(0.5)), record(1, Some(0.25))];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,k,samples,sup_error_last,sup_error_ns,wall_ms\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }
}
