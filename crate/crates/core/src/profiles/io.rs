//! CSV datasets and flat JSON profiles.

use std::path::Path;

use serde_json::{Map, Value};

use super::dataset::Dataset;
use super::schema::{ProfileSchema, RawProfile};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::numerics::Matrix;

pub const LABEL_COLUMN: &str = "label";

/// Writes raw values with a `label` column. Floats use Rust's shortest
/// round-trip formatting, so a reload is bit-exact.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = dataset.schema().names().collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header).map_err(|e| Error::io(path, e.into()))?;
    for (row, label) in dataset.raw().iter_rows().zip(dataset.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| Error::io(path, e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Reads a CSV whose header must list the schema's features in order, then
/// `label`. Stats are fitted on the loaded rows when the schema has none.
pub fn load_csv(path: &Path, schema: &ProfileSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

pub fn parse_csv(text: &str, schema: &ProfileSchema) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::schema(format!("unreadable CSV header: {e}")))?
        .clone();
    let expected: Vec<&str> = schema.names().chain([LABEL_COLUMN]).collect();
    for (i, name) in expected.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *name => {}
            Some(h) => {
                return Err(Error::schema(if schema.index_of(h).is_some() || h == LABEL_COLUMN {
                    format!("column {i} is `{h}`, expected `{name}`")
                } else {
                    format!("unknown column `{h}` at position {i}, expected `{name}`")
                }))
            }
            None => {
                return Err(Error::schema(format!(
                    "CSV has {} columns, missing `{name}`",
                    header.len()
                )))
            }
        }
    }
    if header.len() > expected.len() {
        return Err(Error::schema(format!(
            "unexpected extra column `{}`",
            &header[expected.len()]
        )));
    }

    let d = schema.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, rec) in r.records().enumerate() {
        let row = row_idx + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != expected.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("{} fields, expected {}", rec.len(), expected.len()),
            });
        }
        for (j, field) in rec.iter().take(d).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: expected[j].to_owned(),
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: expected[j].to_owned(),
                    message: format!("`{field}` is not finite"),
                });
            }
            data.push(v);
        }
        let label = match rec[d].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    row,
                    column: LABEL_COLUMN.to_owned(),
                    message: format!("`{other}` is not a binary label"),
                })
            }
        };
        labels.push(label);
    }
    let raw = Matrix::from_vec(labels.len(), d, data)?;
    Dataset::from_raw(schema.clone(), raw, labels)
}

/// Parses a flat JSON object keyed by feature name, with an optional `label`.
pub fn parse_profile_json(text: &str, schema: &ProfileSchema) -> Result<(RawProfile, Option<u8>)> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        row: e.line(),
        column: e.column().to_string(),
        message: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema("profile JSON must be an object keyed by feature name"))?;
    profile_from_map(obj, schema)
}

pub fn profile_from_map(
    obj: &Map<String, Value>,
    schema: &ProfileSchema,
) -> Result<(RawProfile, Option<u8>)> {
    for key in obj.keys() {
        if key != LABEL_COLUMN && schema.index_of(key).is_none() {
            return Err(Error::schema(format!("unknown feature `{key}`")));
        }
    }
    let mut values = Vec::with_capacity(schema.len());
    for f in schema.features() {
        let v = obj
            .get(&f.name)
            .ok_or_else(|| Error::schema(format!("missing feature `{}`", f.name)))?;
        let x = v.as_f64().ok_or_else(|| Error::Parse {
            row: 0,
            column: f.name.clone(),
            message: format!("{v} is not a number"),
        })?;
        values.push(x);
    }
    let label = match obj.get(LABEL_COLUMN) {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(l @ (0 | 1)) => Some(l as u8),
            _ => {
                return Err(Error::Parse {
                    row: 0,
                    column: LABEL_COLUMN.to_owned(),
                    message: format!("{v} is not a binary label"),
                })
            }
        },
    };
    Ok((RawProfile(values), label))
}

pub fn profile_to_map(raw: &RawProfile, schema: &ProfileSchema) -> Map<String, Value> {
    schema
        .names()
        .zip(raw.values())
        .map(|(n, &v)| (n.to_owned(), Value::from(v)))
        .collect()
}
