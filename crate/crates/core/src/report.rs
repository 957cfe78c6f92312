//! Machine-readable output: JSON documents, their `key,value` CSV
//! flattening, and the plain-text basis matrix format.
//!
//! Basis file format: first line `n k`, then `n` lines of `k` entries
//! `re,im` separated by whitespace. Lines starting with `#` are ignored.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::contour::{RunReport, StudyTable};
use crate::error::{KatoError, Result};
use crate::matrix::CMatrix;

/// Version of every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;

/// Header of the study CSV table.
pub const STUDY_CSV_HEADER: &str = "L,closure_error,oracle_error,p_evals,mat_mults,order";

#[derive(Debug, Clone, Copy, Serialize)]
struct Entry {
    re: f64,
    im: f64,
}

/// Rows of `{"re", "im"}` objects.
pub fn matrix_json(m: &CMatrix) -> Value {
    let rows: Vec<Vec<Entry>> = (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| Entry {
                    re: m[(i, j)].re,
                    im: m[(i, j)].im,
                })
                .collect()
        })
        .collect();
    serde_json::to_value(rows).expect("plain data serializes")
}

/// Summary of one continuation run.
pub fn run_report_json(
    problem: &str,
    scheme: &str,
    order: u32,
    contour: &str,
    init_policy: &str,
    report: &RunReport,
) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "command": "continue",
        "problem": problem,
        "scheme": scheme,
        "order": order,
        "contour": contour,
        "init_policy": init_policy,
        "L": report.frames.len() - 1,
        "n": report.initial().rows(),
        "k": report.initial().cols(),
        "closure_error": report.closure_error,
        "drift": report.drift,
        "drift_rel": report.drift_rel,
        "rank_ok": report.rank_ok,
        "counters": report.counters,
        "r0": matrix_json(report.initial()),
        "r_final": matrix_json(report.last()),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten_into(&join(k), child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten_into(&join(&i.to_string()), child, out);
            }
        }
        scalar => out.push((prefix.to_string(), scalar_text(scalar))),
    }
}

/// Flattens a JSON document into `key,value` rows with dotted paths, in
/// document order. Numbers keep their JSON spelling, so both formats carry
/// the same values.
pub fn flatten_csv(v: &Value) -> String {
    let mut pairs = Vec::new();
    flatten_into("", v, &mut pairs);
    let mut s = String::from("key,value\n");
    for (k, val) in pairs {
        let _ = writeln!(s, "{},{}", csv_field(&k), csv_field(&val));
    }
    s
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

/// Study rows as JSON objects keyed by the CSV header columns.
pub fn study_rows_json(table: &StudyTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            json!({
                "L": r.steps,
                "closure_error": opt_num(r.closure_error),
                "oracle_error": opt_num(r.oracle_error),
                "p_evals": r.p_evals,
                "mat_mults": r.mat_mults,
                "order": opt_num(r.order),
            })
        })
        .collect();
    Value::Array(rows)
}

/// Study table as CSV: header, one row per level, final `median` row.
pub fn study_csv(table: &StudyTable) -> String {
    let mut s = String::new();
    s.push_str(STUDY_CSV_HEADER);
    s.push('\n');
    let num = |x: Option<f64>| x.map_or(String::new(), |v| Value::from(v).to_string());
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.steps,
            num(r.closure_error),
            num(r.oracle_error),
            r.p_evals,
            r.mat_mults,
            num(r.order)
        );
    }
    let _ = writeln!(s, "median,,,,,{}", num(table.median_order));
    s
}

/// Parses the plain-text basis format.
pub fn read_matrix_text(text: &str) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| KatoError::Parse("empty basis file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| KatoError::Parse(format!("bad header {header:?}, expected `n k`")))?;
    let [n, k] = dims[..] else {
        return Err(KatoError::Parse(format!("bad header {header:?}, expected `n k`")));
    };
    let mut data = Vec::with_capacity(n * k);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| KatoError::Parse(format!("missing row {i} of {n}")))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != k {
            return Err(KatoError::Parse(format!(
                "row {i} has {} entries, expected {k}",
                entries.len()
            )));
        }
        for e in entries {
            let (re, im) = e
                .split_once(',')
                .ok_or_else(|| KatoError::Parse(format!("entry {e:?} is not re,im")))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| KatoError::Parse(format!("bad number {s:?} in {e:?}")))
            };
            data.push(Complex64::new(parse(re)?, parse(im)?));
        }
    }
    if lines.next().is_some() {
        return Err(KatoError::Parse(format!("more than {n} rows in basis file")));
    }
    CMatrix::from_vec(n, k, data)
}

pub fn write_matrix_text(m: &CMatrix) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}
