//! Flat `t,scheme,partition,metric,value` records and their CSV/JSON forms.
//!
//! Numbers are rounded to 12 significant digits and printed in the shortest
//! form that parses back to the rounded value.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use uepmm_core::analytics::LossCurve;

use crate::config::Format;
use crate::HarnessError;

pub const HEADER: [&str; 5] = ["t", "scheme", "partition", "metric", "value"];
pub const NORMALIZED_LOSS: &str = "normalized_loss";
pub const BOUND: &str = "bound";

/// `decode_prob_class_<l>` with 1-based `l`.
pub fn class_metric(class: usize) -> String {
    format!("decode_prob_class_{}", class + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub scheme: String,
    pub partition: String,
    pub metric: String,
    pub value: f64,
}

/// Round to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn format_value(x: f64) -> String {
    let r = round12(x);
    if r == 0.0 || !r.is_finite() || (1e-6..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Loss, per-class decoding and (optionally) bound records for every grid
/// point.
pub fn curve_records(curve: &LossCurve<f64>, scheme: &str, partition: &str, bound: Option<&[f64]>) -> Vec<Record> {
    let mut out = Vec::new();
    let rec = |t: f64, metric: String, value: f64| Record {
        t,
        scheme: scheme.to_string(),
        partition: partition.to_string(),
        metric,
        value,
    };
    for (i, &t) in curve.times.iter().enumerate() {
        out.push(rec(t, NORMALIZED_LOSS.into(), curve.normalized_loss[i]));
        if let Some(row) = curve.class_decode.get(i) {
            for (l, &p) in row.iter().enumerate() {
                out.push(rec(t, class_metric(l), p));
            }
        }
        if let Some(b) = bound {
            out.push(rec(t, BOUND.into(), b[i]));
        }
    }
    out
}

/// `probs[l][n]` as records with the received count `n` in the `t` column.
pub fn decode_prob_records(probs: &[Vec<f64>], scheme: &str, partition: &str) -> Vec<Record> {
    let n_max = probs.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for n in 0..n_max {
        for (l, row) in probs.iter().enumerate() {
            out.push(Record {
                t: n as f64,
                scheme: scheme.to_string(),
                partition: partition.to_string(),
                metric: class_metric(l),
                value: row[n],
            });
        }
    }
    out
}

/// Serialize `records` to `w`.
pub fn write_records<W: Write>(records: &[Record], format: Format, w: W) -> Result<(), std::io::Error> {
    match format {
        Format::Csv => {
            let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
            csv.write_record(HEADER)?;
            for r in records {
                csv.write_record([
                    format_value(r.t).as_str(),
                    &r.scheme,
                    &r.partition,
                    &r.metric,
                    format_value(r.value).as_str(),
                ])?;
            }
            csv.flush()
        }
        Format::Json => {
            let rounded: Vec<Record> =
                records.iter().map(|r| Record { t: round12(r.t), value: round12(r.value), ..r.clone() }).collect();
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &rounded)?;
            w.write_all(b"\n")
        }
    }
}

/// Write to `path`, or to `stdout` when no path is given.
pub fn emit(records: &[Record], format: Format, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    match path {
        Some(p) => {
            let io = |source| HarnessError::Io { path: p.to_path_buf(), source };
            let f = std::fs::File::create(p).map_err(io)?;
            let mut buf = std::io::BufWriter::new(f);
            write_records(records, format, &mut buf).map_err(io)?;
            buf.flush().map_err(io)
        }
        None => write_records(records, format, stdout)
            .map_err(|source| HarnessError::Io { path: "<stdout>".into(), source }),
    }
}

/// Parse CSV produced by [`write_records`].
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<Record>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}
