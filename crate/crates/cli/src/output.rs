use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use rescaled_pressure::pressure_metric::{PressureRow, Readoff};

use crate::config::Seeds;
use crate::error::CliError;

/// Column order of every pressure table file.
pub const TABLE_COLUMNS: [&str; 8] = ["variant", "t", "eps", "delta", "value", "method", "K_id", "fill_radius"];

/// Written in numeric columns that do not apply to a row.
pub const NOT_APPLICABLE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A flat table destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(file: &str, header: &[&str]) -> Self {
        CsvTable {
            file: file.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Rejects NaN and infinities before anything touches the disk.
    pub fn check_finite(&self) -> Result<(), CliError> {
        for (i, row) in self.rows.iter().enumerate() {
            for (col, cell) in self.header.iter().zip(row) {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        return Err(CliError::runtime(format!(
                            "non-finite value {v} in column '{col}' of {} row {}",
                            self.file,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", self.file)))?;
        let csv_err = |e: csv::Error| CliError::runtime(format!("writing {}: {e}", self.file));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Standard table rows; `K_id` and `fill_radius` fall back to [`NOT_APPLICABLE`].
pub fn pressure_rows(file: &str, rows: &[PressureRow]) -> CsvTable {
    let mut t = CsvTable::new(file, &TABLE_COLUMNS);
    for r in rows {
        t.push(vec![
            r.variant.label().into(),
            r.t.into(),
            r.eps.into(),
            r.delta.into(),
            r.value.into(),
            r.method.label().into(),
            r.k_id.map_or(Cell::Int(-1), Cell::from),
            r.fill_radius.unwrap_or(NOT_APPLICABLE).into(),
        ]);
    }
    t
}

pub fn readoff_rows(file: &str, readoffs: &[Readoff]) -> CsvTable {
    let mut t = CsvTable::new(
        file,
        &["variant", "eps", "delta", "method", "slope", "t_first", "t_last"],
    );
    for r in readoffs {
        t.push(vec![
            r.variant.label().into(),
            r.eps.into(),
            r.delta.into(),
            r.method.label().into(),
            r.slope.into(),
            r.t_used.first().copied().unwrap_or(NOT_APPLICABLE).into(),
            r.t_used.last().copied().unwrap_or(NOT_APPLICABLE).into(),
        ]);
    }
    t
}

/// Key/value summary table.
pub fn summary_rows(file: &str, items: &[(&str, f64)]) -> CsvTable {
    let mut t = CsvTable::new(file, &["quantity", "value"]);
    for (k, v) in items {
        t.push(vec![(*k).into(), (*v).into()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Seeds,
}

/// Everything a run produced; tables a command does not build stay absent.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub config: Value,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric_table: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topo_table: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub katok: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variational: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combinatorics: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Value>,
}

impl ReportBundle {
    pub fn new(command: &str, config_text: &str, seeds: &Seeds) -> Result<Self, CliError> {
        let config: Value = serde_json::from_str(config_text)
            .map_err(|e| CliError::Validation(format!("config:{}:{}: {e}", e.line(), e.column())))?;
        Ok(ReportBundle {
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
                seeds: seeds.clone(),
            },
            config,
            files: Vec::new(),
            metric_table: None,
            topo_table: None,
            katok: None,
            equivalence: None,
            sandwich: None,
            variational: None,
            combinatorics: None,
            gamma: None,
        })
    }
}

pub fn to_value<S: Serialize>(s: &S) -> Result<Value, CliError> {
    serde_json::to_value(s).map_err(|e| CliError::runtime(format!("serializing report: {e}")))
}

/// Writes the CSV files in order, then `report.json`.
pub fn write_all(dir: &Path, tables: &[CsvTable], mut bundle: ReportBundle) -> Result<Vec<String>, CliError> {
    for t in tables {
        t.check_finite()?;
    }
    fs::create_dir_all(dir)?;
    for t in tables {
        t.write(dir)?;
        bundle.files.push(t.file.clone());
    }
    bundle.files.push("report.json".into());
    let text =
        serde_json::to_string_pretty(&bundle).map_err(|e| CliError::runtime(format!("serializing report: {e}")))?;
    fs::write(dir.join("report.json"), text + "\n")?;
    Ok(bundle.files)
}
