//! Delimited-text tables in and out.

use std::fs::File;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Writer, WriterBuilder};

use crate::error::{LagError, Result};
use crate::map_solver::Observation;
use crate::transform::TransformRow;

/// Where and how to read observations.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub path: PathBuf,
    pub delimiter: u8,
    pub t_column: String,
    /// `None`: use an `o` column when present, otherwise every `o` is 1.
    pub o_column: Option<String>,
    pub header: bool,
}

impl TableSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            delimiter: b',',
            t_column: "t".to_string(),
            o_column: None,
            header: true,
        }
    }
}

/// A table as read: original records (kept verbatim for pass-through) plus
/// the parsed observations.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: StringRecord,
    pub records: Vec<StringRecord>,
    pub observations: Vec<Observation<f64>>,
    /// True when no offset column was found and `o = 1` was assumed.
    pub offsets_defaulted: bool,
    pub delimiter: u8,
}

impl Table {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Formats with 15 significant digits, fixed notation for moderate magnitudes.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.14e}")
    }
}

fn io_err(path: &Path, source: std::io::Error) -> LagError {
    LagError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn column_index(headers: &StringRecord, name: &str, header: bool) -> Result<Option<usize>> {
    if header {
        Ok(headers.iter().position(|h| h == name))
    } else {
        match name.parse::<usize>() {
            Ok(k) if k >= 1 && k <= headers.len() => Ok(Some(k - 1)),
            Ok(_) => Ok(None),
            Err(_) => Err(LagError::Parse(format!(
                "headerless tables address columns by 1-based index, got `{name}`"
            ))),
        }
    }
}

fn parse_value(record: &StringRecord, idx: usize, name: &str, row: usize) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    let v: f64 = raw.parse().map_err(|_| LagError::InvalidObservation {
        row,
        reason: format!("column `{name}`: `{raw}` is not a number"),
    })?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(LagError::InvalidObservation {
            row,
            reason: format!("column `{name}`: {raw} is negative or not finite"),
        });
    }
    Ok(v)
}

/// Reads observations; row numbers in errors count data rows from 1.
pub fn read_table(spec: &TableSpec) -> Result<Table> {
    let file = File::open(&spec.path).map_err(|e| io_err(&spec.path, e))?;
    let mut reader = ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.header)
        .from_reader(file);
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    let headers = if spec.header {
        reader.headers()?.clone()
    } else {
        let width = records.first().map_or(0, |r| r.len());
        StringRecord::from((1..=width).map(|k| format!("col{k}")).collect::<Vec<_>>())
    };
    let available = || headers.iter().map(str::to_string).collect::<Vec<_>>();

    let t_idx = column_index(&headers, &spec.t_column, spec.header)?.ok_or_else(|| {
        LagError::ColumnNotFound {
            name: spec.t_column.clone(),
            available: available(),
        }
    })?;
    let (o_idx, offsets_defaulted) = match &spec.o_column {
        Some(name) => {
            let idx = column_index(&headers, name, spec.header)?.ok_or_else(|| {
                LagError::ColumnNotFound {
                    name: name.clone(),
                    available: available(),
                }
            })?;
            (Some(idx), false)
        }
        None => {
            let default = if spec.header { "o" } else { "2" };
            match column_index(&headers, default, spec.header)? {
                Some(idx) => (Some(idx), false),
                None => (None, true),
            }
        }
    };
    let t_name = spec.t_column.as_str();
    let o_name = spec.o_column.as_deref().unwrap_or("o");

    let mut observations = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let t = parse_value(rec, t_idx, t_name, row)?;
        let o = match o_idx {
            Some(idx) => parse_value(rec, idx, o_name, row)?,
            None => 1.0,
        };
        let obs = Observation { t, o };
        obs.validate().map_err(|e| LagError::InvalidObservation {
            row,
            reason: e.to_string(),
        })?;
        observations.push(obs);
    }
    Ok(Table {
        headers,
        records,
        observations,
        offsets_defaulted,
        delimiter: spec.delimiter,
    })
}

fn writer(path: &Path, delimiter: u8) -> Result<Writer<File>> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(WriterBuilder::new().delimiter(delimiter).from_writer(file))
}

fn lag_field(lag: Option<f64>) -> String {
    lag.map(format_sig).unwrap_or_default()
}

/// Writes the input columns verbatim followed by `z`, `lag`, `nlag`.
pub fn write_table(table: &Table, rows: &[TransformRow<f64>], path: &Path) -> Result<()> {
    if rows.len() != table.len() {
        return Err(LagError::Length(format!(
            "{} table rows but {} transform rows",
            table.len(),
            rows.len()
        )));
    }
    let mut w = writer(path, table.delimiter)?;
    let mut header: Vec<String> = table.headers.iter().map(str::to_string).collect();
    header.extend(["z", "lag", "nlag"].map(String::from));
    w.write_record(&header)?;
    for (rec, r) in table.records.iter().zip(rows) {
        let mut out: Vec<String> = rec.iter().map(str::to_string).collect();
        out.push(format_sig(r.z));
        out.push(lag_field(r.lag));
        out.push(format_sig(r.nlag));
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One row of a pseudocount comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub o: f64,
    pub log_pseudo: f64,
    pub lag: Option<f64>,
    pub nlag: f64,
}

pub fn compare_rows(
    obs: &[Observation<f64>],
    rows: &[TransformRow<f64>],
    pseudocount: f64,
) -> Vec<CompareRow> {
    obs.iter()
        .zip(rows)
        .map(|(o, r)| CompareRow {
            t: o.t,
            o: o.o,
            log_pseudo: (o.t + pseudocount).ln(),
            lag: r.lag,
            nlag: r.nlag,
        })
        .collect()
}

/// Columns `t, o, log_pseudo, lag, nlag`.
pub fn write_compare(rows: &[CompareRow], path: &Path, delimiter: u8) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(["t", "o", "log_pseudo", "lag", "nlag"])?;
    for r in rows {
        w.write_record([
            format_sig(r.t),
            format_sig(r.o),
            format_sig(r.log_pseudo),
            lag_field(r.lag),
            format_sig(r.nlag),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes a header and rows of already formatted fields.
pub fn write_rows<S: AsRef<str>>(
    path: &Path,
    delimiter: u8,
    header: &[&str],
    rows: &[Vec<S>],
) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
