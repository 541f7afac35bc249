//! Per-step simulation records and their CSV form.
//!
//! Column order (vector quantities expand to one column per component,
//! numbered from 1):
//!
//! ```text
//! k, t, x_1..x_n, y_true_1..y_true_p, y_meas_1..y_meas_p, r_1..r_p,
//! u_1..u_m, sigma_u_1..sigma_u_m, d_1..d_q,
//! beta, g, err_norm, psi_trace,
//! rho_k, u_change, qp_solves, qp_iterations, objective, failed
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a trace read
//! back parses to the identical bits.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rls::RlsDiagnostics;

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    /// True plant state at `t_k`.
    pub x: DVector<f64>,
    /// Noise-free plant output `C x`.
    pub y_true: DVector<f64>,
    /// Measurement fed to the controller, `C x - r + v`.
    pub y_meas: DVector<f64>,
    pub command: DVector<f64>,
    /// Control held over `[t_k, t_{k+1})`.
    pub u: DVector<f64>,
    /// What actually enters the plant.
    pub sigma_u: DVector<f64>,
    pub disturbance: DVector<f64>,
    pub rls: RlsDiagnostics,
    pub rho_k: usize,
    pub u_change: f64,
    pub qp_solves: usize,
    pub qp_iterations: usize,
    pub objective: f64,
    /// Controller could not produce a control; the previous one was held.
    pub failed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub records: Vec<StepRecord>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let Some(r) = self.records.first() else {
            return Vec::new();
        };
        let mut h = vec!["k".to_string(), "t".to_string()];
        let expand = |h: &mut Vec<String>, name: &str, n: usize| {
            for i in 1..=n {
                h.push(format!("{name}_{i}"));
            }
        };
        expand(&mut h, "x", r.x.len());
        expand(&mut h, "y_true", r.y_true.len());
        expand(&mut h, "y_meas", r.y_meas.len());
        expand(&mut h, "r", r.command.len());
        expand(&mut h, "u", r.u.len());
        expand(&mut h, "sigma_u", r.sigma_u.len());
        expand(&mut h, "d", r.disturbance.len());
        for name in [
            "beta", "g", "err_norm", "psi_trace", "rho_k", "u_change", "qp_solves", "qp_iterations", "objective",
            "failed",
        ] {
            h.push(name.to_string());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.k.to_string(), r.t.to_string()];
            for v in [&r.x, &r.y_true, &r.y_meas, &r.command, &r.u, &r.sigma_u, &r.disturbance] {
                row.extend(v.iter().map(|x| x.to_string()));
            }
            row.push(r.rls.beta.to_string());
            row.push(r.rls.g.to_string());
            row.push(r.rls.error_norm.to_string());
            row.push(r.rls.psi_trace.to_string());
            row.push(r.rho_k.to_string());
            row.push(r.u_change.to_string());
            row.push(r.qp_solves.to_string());
            row.push(r.qp_iterations.to_string());
            row.push(r.objective.to_string());
            row.push(u8::from(r.failed).to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Numeric table read back from a trace CSV.
#[derive(Debug, Clone)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {s:?}: {e}", i + 1))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(TraceTable { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Per-column comparison of two traces.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub tolerance: f64,
    pub columns: Vec<ColumnDeviation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnDeviation {
    pub name: String,
    pub max_abs_deviation: f64,
}

impl CompareReport {
    pub fn max_deviation(&self) -> f64 {
        self.columns.iter().map(|c| c.max_abs_deviation).fold(0.0, f64::max)
    }

    pub fn within_tolerance(&self) -> bool {
        self.columns.iter().all(|c| c.max_abs_deviation <= self.tolerance)
    }
}

/// Max absolute deviation per column. `NaN` in both cells counts as equal.
pub fn compare(a: &TraceTable, b: &TraceTable, tolerance: f64) -> Result<CompareReport> {
    if a.header != b.header {
        return Err(Error::Schema(format!("headers differ: {:?} vs {:?}", a.header, b.header)));
    }
    if a.rows.len() != b.rows.len() {
        return Err(Error::Schema(format!("row counts differ: {} vs {}", a.rows.len(), b.rows.len())));
    }
    let columns = a
        .header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let dev = a
                .rows
                .iter()
                .zip(&b.rows)
                .map(|(ra, rb)| {
                    let (x, y) = (ra[j], rb[j]);
                    if x.is_nan() && y.is_nan() {
                        0.0
                    } else if x.is_nan() || y.is_nan() {
                        f64::INFINITY
                    } else {
                        (x - y).abs()
                    }
                })
                .fold(0.0, f64::max);
            ColumnDeviation { name: name.clone(), max_abs_deviation: dev }
        })
        .collect();
    Ok(CompareReport { tolerance, columns })
}
