//! Line-oriented readers for CSV and JSONL point streams.
//!
//! CSV: comma-separated decimal reals, one point per line, optional header
//! (recognised when the first field of the first non-blank line is not a
//! number). JSONL: one object per line with a `features` array and an
//! optional string `id`. Blank lines are ignored in both formats, and CRLF
//! endings are accepted.

use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{validate_features, Config, DataPoint, ValidationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnError {
    #[default]
    Halt,
    Skip,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ValidationError,
    },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::Parse { line, .. } | IngestError::Invalid { line, .. } => Some(*line),
            IngestError::Io(_) => None,
        }
    }
}

/// A successfully parsed (not yet validated) input line.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRecord {
    pub line_number: usize,
    pub raw: String,
    pub parsed: Vec<f64>,
    pub label: Option<String>,
}

/// Parses a decimal literal: integer, fractional or scientific. Words such
/// as `inf` or `NaN` are refused.
fn parse_number(field: &str) -> Option<f64> {
    let field = field.trim();
    if field.is_empty()
        || !field
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
    {
        return None;
    }
    field.parse().ok()
}

/// Splits a CSV line into numbers, reporting the 1-based column of the first
/// field that is not a number.
pub fn parse_csv_fields(line: &str) -> Result<Vec<f64>, (usize, String)> {
    line.split(',')
        .enumerate()
        .map(|(i, field)| {
            parse_number(field).ok_or_else(|| (i + 1, format!("not a number: {:?}", field.trim())))
        })
        .collect()
}

#[derive(Deserialize)]
struct JsonRecord {
    features: Vec<f64>,
    #[serde(default)]
    id: Option<String>,
}

/// Parses one JSONL object into its features and optional `id`.
pub fn parse_jsonl_fields(line: &str) -> Result<(Vec<f64>, Option<String>), (usize, String)> {
    serde_json::from_str::<JsonRecord>(line)
        .map(|r| (r.features, r.id))
        .map_err(|e| (e.column(), e.to_string()))
}

/// Parses and validates one CSV line.
pub fn parse_csv_line(
    line: &str,
    line_number: usize,
    seq: u64,
    config: &Config,
) -> Result<DataPoint, IngestError> {
    let features = parse_csv_fields(line).map_err(|(column, message)| IngestError::Parse {
        line: line_number,
        column,
        message,
    })?;
    DataPoint::new(seq, features, config).map_err(|source| IngestError::Invalid {
        line: line_number,
        source,
    })
}

/// Parses and validates one JSONL line.
pub fn parse_jsonl_line(
    line: &str,
    line_number: usize,
    seq: u64,
    config: &Config,
) -> Result<DataPoint, IngestError> {
    let (features, label) =
        parse_jsonl_fields(line).map_err(|(column, message)| IngestError::Parse {
            line: line_number,
            column,
            message,
        })?;
    DataPoint::new(seq, features, config)
        .map(|p| p.with_label(label))
        .map_err(|source| IngestError::Invalid {
            line: line_number,
            source,
        })
}

/// Renders a point as a CSV line using shortest round-trip numerals.
pub fn to_csv_line(features: &[f64]) -> String {
    features
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Streaming reader producing validated points in arrival order.
///
/// Under [`OnError::Skip`] bad lines are recorded in
/// [`PointStream::take_skipped`] and reading continues. Under
/// [`OnError::Halt`] the first error is yielded and the stream ends.
pub struct PointStream<R> {
    reader: R,
    format: Format,
    on_error: OnError,
    n_features: Option<usize>,
    next_seq: u64,
    line_number: usize,
    header_checked: bool,
    skipped: Vec<IngestError>,
    finished: bool,
    buf: Vec<u8>,
}

impl<R: BufRead> PointStream<R> {
    /// `n_features = None` infers the dimensionality from the first valid
    /// record.
    pub fn new(reader: R, format: Format, n_features: Option<usize>, on_error: OnError) -> Self {
        Self {
            reader,
            format,
            on_error,
            n_features,
            next_seq: 0,
            line_number: 0,
            header_checked: false,
            skipped: Vec::new(),
            finished: false,
            buf: Vec::new(),
        }
    }

    /// First seq handed out, for continuing a stream that already consumed
    /// `start` points.
    pub fn starting_at(mut self, start: u64) -> Self {
        self.next_seq = start;
        self
    }

    pub fn n_features(&self) -> Option<usize> {
        self.n_features
    }

    /// Drains the diagnostics of lines skipped so far.
    pub fn take_skipped(&mut self) -> Vec<IngestError> {
        std::mem::take(&mut self.skipped)
    }

    fn read_line(&mut self) -> Result<Option<Result<String, IngestError>>, std::io::Error> {
        self.buf.clear();
        if self.reader.read_until(b'\n', &mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_number += 1;
        let line = self.line_number;
        Ok(Some(match std::str::from_utf8(&self.buf) {
            Ok(s) => Ok(s.trim_end_matches(['\n', '\r']).to_owned()),
            Err(e) => Err(IngestError::Parse {
                line,
                column: 1,
                message: format!("invalid UTF-8: {e}"),
            }),
        }))
    }

    fn parse(&mut self, raw: String) -> Result<Option<InputRecord>, IngestError> {
        let line_number = self.line_number;
        let parsed = match self.format {
            Format::Csv => parse_csv_fields(&raw).map(|f| (f, None)),
            Format::Jsonl => parse_jsonl_fields(&raw),
        };
        match parsed {
            Ok((parsed, label)) => Ok(Some(InputRecord {
                line_number,
                raw,
                parsed,
                label,
            })),
            Err((column, message)) => {
                let is_header = self.format == Format::Csv
                    && !self.header_checked
                    && parse_number(raw.split(',').next().unwrap_or("")).is_none();
                if is_header {
                    Ok(None)
                } else {
                    Err(IngestError::Parse {
                        line: line_number,
                        column,
                        message,
                    })
                }
            }
        }
    }

    fn next_point(&mut self) -> Option<Result<DataPoint, IngestError>> {
        loop {
            let raw = match self.read_line() {
                Ok(None) => return None,
                Ok(Some(Ok(raw))) => raw,
                Ok(Some(Err(e))) => {
                    self.header_checked = true;
                    return Some(Err(e));
                }
                Err(e) => return Some(Err(IngestError::Io(e))),
            };
            if raw.trim().is_empty() {
                continue;
            }
            let record = self.parse(raw);
            self.header_checked = true;
            let record = match record {
                Ok(Some(r)) => r,
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            };

            let dims = self.n_features.unwrap_or(record.parsed.len());
            if let Err(source) = validate_features(&record.parsed, dims) {
                return Some(Err(IngestError::Invalid {
                    line: record.line_number,
                    source,
                }));
            }
            self.n_features = Some(dims);
            let point = DataPoint::with_dims(self.next_seq, record.parsed, dims)
                .expect("validated above")
                .with_label(record.label);
            self.next_seq += 1;
            return Some(Ok(point));
        }
    }
}

impl<R: BufRead> Iterator for PointStream<R> {
    type Item = Result<DataPoint, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        loop {
            match self.next_point() {
                None => {
                    self.finished = true;
                    return None;
                }
                Some(Ok(p)) => return Some(Ok(p)),
                Some(Err(e)) => {
                    if self.on_error == OnError::Skip && !matches!(e, IngestError::Io(_)) {
                        self.skipped.push(e);
                        continue;
                    }
                    self.finished = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Reads a whole stream into memory. Returns the points plus the
/// diagnostics of any skipped lines.
pub fn stream_points<R: BufRead>(
    reader: R,
    format: Format,
    n_features: Option<usize>,
    on_error: OnError,
) -> Result<(Vec<DataPoint>, Vec<IngestError>), IngestError> {
    let mut stream = PointStream::new(reader, format, n_features, on_error);
    let points = stream.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((points, stream.take_skipped()))
}
