//! CSV dataset format and its JSON schema sidecar.
//!
//! Header: `x0,..,x{d-1},t,y[,y0,y1[,z0,..]]`. With several outcome
//! columns each outcome name gets a `_k` suffix (`y_0,y_1,y0_0,..`).
//! Values are written with the shortest representation that parses back
//! to the same `f64`, so export followed by ingest is bit-exact.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::model::{DataSchema, Kind};
use crate::numerics::Matrix;

pub const SIDECAR_SUFFIX: &str = ".schema.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSidecar {
    pub feature_kinds: Vec<Kind>,
    pub outcome_kinds: Vec<Kind>,
    #[serde(default)]
    pub potential_outcomes: bool,
    #[serde(default)]
    pub z_dim: usize,
}

impl SchemaSidecar {
    pub fn for_dataset(data: &Dataset) -> Self {
        Self {
            feature_kinds: data.schema().feature_kinds.clone(),
            outcome_kinds: data.schema().outcome_kinds.clone(),
            potential_outcomes: data.potential_outcomes().is_some(),
            z_dim: data.z_true().map_or(0, |z| z.cols()),
        }
    }

    pub fn schema(&self) -> Result<DataSchema> {
        DataSchema::new(self.feature_kinds.clone(), self.outcome_kinds.clone())
    }

    pub fn header(&self) -> Vec<String> {
        let dy = self.outcome_kinds.len();
        let outcome = |base: &str| -> Vec<String> {
            if dy == 1 {
                vec![base.to_string()]
            } else {
                (0..dy).map(|k| format!("{base}_{k}")).collect()
            }
        };
        let mut h: Vec<String> = (0..self.feature_kinds.len()).map(|j| format!("x{j}")).collect();
        h.push("t".into());
        h.extend(outcome("y"));
        if self.potential_outcomes {
            h.extend(outcome("y0"));
            h.extend(outcome("y1"));
            h.extend((0..self.z_dim).map(|j| format!("z{j}")));
        }
        h
    }
}

/// Sidecar path next to a CSV file: `data.csv` → `data.csv.schema.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(SIDECAR_SUFFIX);
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, sidecar: &SchemaSidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<SchemaSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes the dataset as CSV plus its sidecar (`path` + [`SIDECAR_SUFFIX`]).
pub fn export_csv(data: &Dataset, path: &Path) -> Result<()> {
    let sidecar = SchemaSidecar::for_dataset(data);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(sidecar.header()).map_err(wrap)?;
    let potential = data.potential_outcomes();
    let mut record: Vec<String> = Vec::new();
    for i in 0..data.len() {
        record.clear();
        record.extend(data.x().row(i).iter().map(f64::to_string));
        record.push(data.t()[i].to_string());
        record.extend(data.y().row(i).iter().map(f64::to_string));
        if let Some((y0, y1)) = potential {
            record.extend(y0.row(i).iter().map(f64::to_string));
            record.extend(y1.row(i).iter().map(f64::to_string));
            if let Some(z) = data.z_true() {
                record.extend(z.row(i).iter().map(f64::to_string));
            }
        }
        w.write_record(&record).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_sidecar(&sidecar_path(path), &sidecar)
}

/// Reads a CSV written in the format above and validates it against `sidecar`.
pub fn ingest_csv(path: &Path, sidecar: &SchemaSidecar) -> Result<Dataset> {
    let schema = sidecar.schema()?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let expected = sidecar.header();
    let csv_err = |row: usize, column: &str, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(0, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != expected {
        return Err(Error::SchemaMismatch(format!(
            "{}: header {:?} does not match declared columns {:?}",
            path.display(),
            found.join(","),
            expected.join(",")
        )));
    }
    let mut kinds = schema.feature_kinds.clone();
    kinds.push(Kind::Binary);
    for _ in 0..if sidecar.potential_outcomes { 3 } else { 1 } {
        kinds.extend(&schema.outcome_kinds);
    }
    kinds.extend(std::iter::repeat_n(Kind::Continuous, if sidecar.potential_outcomes { sidecar.z_dim } else { 0 }));

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_err(row, "", e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(csv_err(row, "", format!("expected {} fields, found {}", expected.len(), rec.len())));
        }
        let mut values = Vec::with_capacity(rec.len());
        for ((field, name), kind) in rec.iter().zip(&expected).zip(&kinds) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(row, name, format!("cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(csv_err(row, name, format!("non-finite value {field}")));
            }
            if *kind == Kind::Binary && v != 0.0 && v != 1.0 {
                return Err(csv_err(row, name, format!("binary column holds {field}")));
            }
            values.push(v);
        }
        rows.push(values);
    }
    let n = rows.len();
    let (dx, dy) = (schema.x_dim(), schema.y_dim());
    let block = |start: usize, width: usize| Matrix::from_fn(n, width, |i, j| rows[i][start + j]);
    let x = block(0, dx);
    let t: Vec<u8> = rows.iter().map(|r| r[dx] as u8).collect();
    let y = block(dx + 1, dy);
    let (potential, z_true) = if sidecar.potential_outcomes {
        let y0 = block(dx + 1 + dy, dy);
        let y1 = block(dx + 1 + 2 * dy, dy);
        let z = (sidecar.z_dim > 0).then(|| block(dx + 1 + 3 * dy, sidecar.z_dim));
        (Some((y0, y1)), z)
    } else {
        (None, None)
    };
    Dataset::new(schema, x, t, y, potential, z_true)
}
