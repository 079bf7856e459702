//! Histogram file formats.
//!
//! CSV: one `label,count` pair per line, optionally preceded by a
//! `label,count` header. Repeated labels are summed. JSON: an object mapping
//! label to a non-negative integer count.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use dptopk_core::Histogram;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("invalid JSON histogram: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    pub fn line(&self) -> Option<u64> {
        match self {
            Self::Parse { line, .. } | Self::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.len() == 2 && rec[0].eq_ignore_ascii_case("label") && rec[1].eq_ignore_ascii_case("count")
}

/// Parses a count, telling negatives (validation) apart from garbage (parse).
fn parse_count(raw: &str) -> Result<u64, Result<String, String>> {
    if let Ok(c) = raw.parse::<u64>() {
        return Ok(c);
    }
    match raw.parse::<i128>() {
        Ok(c) if c < 0 => Err(Err(format!("negative count {c}"))),
        Ok(_) => Err(Ok(format!("count {raw:?} is out of range"))),
        Err(_) => Err(Ok(format!("count {raw:?} is not a non-negative integer"))),
    }
}

pub fn ingest_csv<R: Read>(reader: R) -> Result<Histogram, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut h = Histogram::new();
    let mut rec = csv::StringRecord::new();
    let mut first = true;
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => IngestError::Io(io),
                kind => IngestError::Parse { line, message: format!("{kind:?}") },
            }
        })?;
        if !more {
            break;
        }
        let line = rec.position().map_or(0, |p| p.line());
        if std::mem::take(&mut first) && is_header(&rec) {
            continue;
        }
        if rec.len() != 2 {
            return Err(IngestError::Parse {
                line,
                message: format!("expected \"label,count\", found {} field(s)", rec.len()),
            });
        }
        if rec[0].is_empty() {
            return Err(IngestError::Parse { line, message: "empty label".into() });
        }
        match parse_count(&rec[1]) {
            Ok(c) => h.add(&rec[0], c),
            Err(Ok(message)) => return Err(IngestError::Parse { line, message }),
            Err(Err(message)) => return Err(IngestError::Validation { line, message }),
        }
    }
    Ok(h)
}

pub fn parse_json_histogram(text: &str) -> Result<Histogram, IngestError> {
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(text).map_err(|e| IngestError::Json(e.to_string()))?;
    let mut h = Histogram::new();
    for (label, v) in map {
        match v.as_u64() {
            Some(c) => h.add(label, c),
            None => return Err(IngestError::Json(format!("count for {label:?} must be a non-negative integer, got {v}"))),
        }
    }
    Ok(h)
}

/// Reads a histogram file; `.json` files are JSON, everything else is CSV.
pub fn read_histogram(path: &Path) -> Result<Histogram, IngestError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_json_histogram(&std::fs::read_to_string(path)?)
    } else {
        ingest_csv(BufReader::new(File::open(path)?))
    }
}
