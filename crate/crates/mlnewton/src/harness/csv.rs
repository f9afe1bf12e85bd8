//! Trace serialization.
//!
//! The column set is fixed; floats print through `Display`, which emits
//! the shortest decimal that parses back to the identical bit pattern, so
//! a written trace re-parses exactly.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::solvers::{Level, StepRecord, Trace};

pub const CSV_HEADER: &str =
    "k,f,grad_norm,reduced_grad_norm,alpha,lambda_hat_sq,step_norm,level,inner_loops,elapsed_s";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad header: expected {CSV_HEADER:?}, found {0:?}")]
    BadHeader(String),
    #[error("line {line}: expected 10 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: cannot parse field {field} from {token:?}")]
    BadField { line: usize, field: &'static str, token: String },
}

/// Writes the trace and returns the number of bytes emitted.
pub fn emit_csv(trace: &Trace, sink: &mut dyn Write) -> io::Result<usize> {
    let mut buf = String::with_capacity(64 * (trace.records.len() + 1));
    buf.push_str(CSV_HEADER);
    buf.push('\n');
    for r in &trace.records {
        buf.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            r.f,
            r.grad_norm,
            r.reduced_grad_norm,
            r.alpha,
            r.lambda_hat_sq,
            r.step_norm,
            r.level.as_str(),
            r.inner_loops,
            r.elapsed_s,
        ));
    }
    sink.write_all(buf.as_bytes())?;
    Ok(buf.len())
}

/// Reads records back from the CSV dialect written by [`emit_csv`].
pub fn parse_trace_csv(reader: impl BufRead) -> Result<Vec<StepRecord>, CsvError> {
    let mut records = Vec::new();
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != CSV_HEADER {
        return Err(CsvError::BadHeader(header));
    }
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(CsvError::FieldCount { line: lineno, found: fields.len() });
        }
        let bad = |field: &'static str, token: &str| CsvError::BadField {
            line: lineno,
            field,
            token: token.to_string(),
        };
        let float = |field: &'static str, token: &str| -> Result<f64, CsvError> {
            token.parse::<f64>().map_err(|_| bad(field, token))
        };
        records.push(StepRecord {
            k: fields[0].parse().map_err(|_| bad("k", fields[0]))?,
            f: float("f", fields[1])?,
            grad_norm: float("grad_norm", fields[2])?,
            reduced_grad_norm: float("reduced_grad_norm", fields[3])?,
            alpha: float("alpha", fields[4])?,
            lambda_hat_sq: float("lambda_hat_sq", fields[5])?,
            step_norm: float("step_norm", fields[6])?,
            level: Level::parse(fields[7]).ok_or_else(|| bad("level", fields[7]))?,
            inner_loops: fields[8].parse().map_err(|_| bad("inner_loops", fields[8]))?,
            elapsed_s: float("elapsed_s", fields[9])?,
        });
    }
    Ok(records)
}
