//! Plain CSV tables with lossless real formatting, and the ledger schema.

use crate::error::{io, Error, Result};
use std::fmt::Write as _;
use std::path::Path;
use wlry_core::ledger::EnergyLedgerEntry;

/// Columns of a ledger file, in order.
pub const LEDGER_COLUMNS: [&str; 11] =
    ["t", "lhs_energy", "dissipation_cum", "term_weight_flux", "term_transport", "term_pressure", "term_forcing_a", "term_forcing_b", "slack_A", "slack_B", "tol_disc"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match v {
                    Value::Int(x) => write!(out, "{x}").unwrap(),
                    Value::Real(x) => out.push_str(&fmt_real(*x)),
                    Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| io(path, e))
    }
}

pub fn ledger_table(entries: &[EnergyLedgerEntry]) -> Table {
    let mut t = Table::new(&LEDGER_COLUMNS);
    for e in entries {
        t.push(
            [e.t, e.lhs_energy, e.dissipation_cum, e.term_weight_flux, e.term_transport, e.term_pressure, e.term_forcing_a, e.term_forcing_b, e.slack_a, e.slack_b, e.tol_disc]
                .into_iter()
                .map(Value::Real)
                .collect(),
        );
    }
    t
}

fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        v => v.parse().ok(),
    }
}

/// Reads a ledger file written by [`ledger_table`].
pub fn read_ledger(text: &str) -> Result<Vec<EnergyLedgerEntry>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != LEDGER_COLUMNS {
        return Err(Error::Csv(format!("unexpected header `{header}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(parse_real).collect::<Option<_>>().ok_or_else(|| Error::Csv(format!("row {}: not a number", i + 1)))?;
        if v.len() != LEDGER_COLUMNS.len() {
            return Err(Error::Csv(format!("row {}: expected {} fields", i + 1, LEDGER_COLUMNS.len())));
        }
        out.push(EnergyLedgerEntry {
            t: v[0],
            lhs_energy: v[1],
            dissipation_cum: v[2],
            term_weight_flux: v[3],
            term_transport: v[4],
            term_pressure: v[5],
            term_forcing_a: v[6],
            term_forcing_b: v[7],
            slack_a: v[8],
            slack_b: v[9],
            tol_disc: v[10],
        });
    }
    Ok(out)
}

/// Outcome of re-checking a ledger offline.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerVerdict {
    pub rows: usize,
    /// Rows with `slack_A < -tol_disc`.
    pub failing_a: Vec<usize>,
    /// Rows with `slack_B < -tol_disc`.
    pub failing_b: Vec<usize>,
    /// Largest gap between the stored first slack and its recomputation
    /// from the stored terms, relative to `tol_disc`.
    pub recompute_gap: f64,
}

impl LedgerVerdict {
    pub fn passed(&self) -> bool {
        self.failing_a.is_empty() && self.failing_b.is_empty() && self.recompute_gap <= 1e-6
    }
}

pub fn verify_ledger(entries: &[EnergyLedgerEntry]) -> LedgerVerdict {
    let e0 = entries.first().map(|e| e.lhs_energy).unwrap_or(0.0);
    let mut v = LedgerVerdict { rows: entries.len(), failing_a: Vec::new(), failing_b: Vec::new(), recompute_gap: 0.0 };
    for (i, e) in entries.iter().enumerate() {
        if !(e.slack_a >= -e.tol_disc) {
            v.failing_a.push(i);
        }
        if !(e.slack_b >= -e.tol_disc) {
            v.failing_b.push(i);
        }
        let rhs = e0 + e.term_weight_flux + e.term_transport + e.term_pressure + e.term_forcing_a + e.term_forcing_b;
        let slack = rhs - (e.lhs_energy + e.dissipation_cum);
        let scale = e.tol_disc.max(f64::MIN_POSITIVE);
        v.recompute_gap = v.recompute_gap.max((slack - e.slack_a).abs() / scale);
    }
    v
}
