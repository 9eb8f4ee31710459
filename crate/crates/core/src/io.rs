//! File formats: matches CSV, trace CSV, periods JSON and ground-truth JSON.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an emitted file reproduces the in-memory values exactly.

use std::io::{Read, Write};

use thiserror::Error;

use crate::dynamic::{DynamicTrace, DynamicTraceEntry, PeriodRecord};
use crate::homography::Point2;
use crate::loss::{MatchSet, MatchedPair};

pub const MATCHES_HEADER: [&str; 5] = ["frame_id", "x1", "y1", "x2", "y2"];
pub const TRACE_HEADER: [&str; 6] = [
    "eval_index",
    "frame_id",
    "period_index",
    "current_loss",
    "best_loss_period",
    "is_change_event",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(line: u64, reason: impl Into<String>) -> CsvError {
    CsvError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn from_csv(e: csv::Error, line: u64) -> CsvError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CsvError::Io(io),
            _ => unreachable!(),
        }
    } else {
        let line = e.position().map_or(line, |p| p.line());
        malformed(line, e.to_string())
    }
}

/// Reads all records after checking the header against `header`.
fn records<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut seen_header = false;
    let mut last_line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| from_csv(e, last_line + 1))?;
        let line = rec.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if !seen_header {
            let got: Vec<&str> = rec.iter().map(str::trim).collect();
            if got != header {
                return Err(malformed(
                    line,
                    format!("expected header `{}`, got `{}`", header.join(","), got.join(",")),
                ));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, got {}", header.len(), rec.len()),
            ));
        }
        out.push((line, rec));
    }
    if !seen_header {
        return Err(malformed(1, format!("missing header `{}`", header.join(","))));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T, CsvError> {
    let raw = rec[idx].trim();
    raw.parse()
        .map_err(|_| malformed(line, format!("cannot parse {name} from `{raw}`")))
}

fn finite(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, CsvError> {
    let v: f64 = field(rec, idx, name, line)?;
    if !v.is_finite() {
        return Err(malformed(line, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Parses `frame_id,x1,y1,x2,y2` rows into match sets. Rows of one frame
/// must be contiguous and frames must appear in ascending order.
pub fn read_matches<R: Read>(reader: R) -> Result<Vec<MatchSet>, CsvError> {
    let rows = records(reader, &MATCHES_HEADER)?;
    if rows.is_empty() {
        return Err(malformed(2, "no match rows"));
    }
    let mut sets: Vec<MatchSet> = Vec::new();
    for (line, rec) in rows {
        let frame_id: u64 = field(&rec, 0, "frame_id", line)?;
        let pair = MatchedPair::new(
            Point2::new(finite(&rec, 1, "x1", line)?, finite(&rec, 2, "y1", line)?),
            Point2::new(finite(&rec, 3, "x2", line)?, finite(&rec, 4, "y2", line)?),
        );
        match sets.last_mut() {
            Some(last) if last.frame_id == frame_id => last.pairs.push(pair),
            Some(last) if last.frame_id > frame_id => {
                return Err(malformed(
                    line,
                    format!("frame {frame_id} after frame {}: frames must ascend", last.frame_id),
                ))
            }
            _ => sets.push(MatchSet {
                frame_id,
                pairs: vec![pair],
            }),
        }
    }
    Ok(sets)
}

pub fn write_matches<W: Write>(writer: W, sets: &[MatchSet]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MATCHES_HEADER).map_err(|e| from_csv(e, 1))?;
    for set in sets {
        for p in &set.pairs {
            w.write_record([
                set.frame_id.to_string(),
                p.source.x.to_string(),
                p.source.y.to_string(),
                p.target.x.to_string(),
                p.target.y.to_string(),
            ])
            .map_err(|e| from_csv(e, 0))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(writer: W, trace: &DynamicTrace) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER).map_err(|e| from_csv(e, 1))?;
    for e in &trace.entries {
        w.write_record([
            e.eval_index.to_string(),
            e.frame_id.to_string(),
            e.period_index.to_string(),
            e.current_loss.to_string(),
            e.best_loss_period.to_string(),
            u8::from(e.is_change_event).to_string(),
        ])
        .map_err(|e| from_csv(e, 0))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<DynamicTrace, CsvError> {
    let mut trace = DynamicTrace::default();
    for (line, rec) in records(reader, &TRACE_HEADER)? {
        let flag: u8 = field(&rec, 5, "is_change_event", line)?;
        if flag > 1 {
            return Err(malformed(line, "is_change_event must be 0 or 1"));
        }
        trace.entries.push(DynamicTraceEntry {
            eval_index: field(&rec, 0, "eval_index", line)?,
            frame_id: field(&rec, 1, "frame_id", line)?,
            period_index: field(&rec, 2, "period_index", line)?,
            current_loss: field(&rec, 3, "current_loss", line)?,
            best_loss_period: field(&rec, 4, "best_loss_period", line)?,
            is_change_event: flag == 1,
        });
    }
    Ok(trace)
}

pub fn periods_json(periods: &[PeriodRecord]) -> String {
    let mut s = serde_json::to_string_pretty(periods).expect("periods serialize");
    s.push('\n');
    s
}
