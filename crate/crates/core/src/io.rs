//! CSV and legacy VTK output.
//!
//! Floats are written with 17 significant digits so files re-read bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

use crate::diagnostics::{StepRecord, RECORD_COLUMNS};
use crate::discretization::{Cells, Mesh};
use crate::stepper::SimState;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn file_err(path: &Path) -> impl Fn(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.display().to_string(), source }
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A value in a report table.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Write a header and rows as RFC 4180 CSV.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(IoError::Format {
                path: path.display().to_string(),
                message: format!("row has {} cells, header has {}", row.len(), header.len()),
            });
        }
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

fn record_cells(r: &StepRecord) -> Vec<Cell> {
    vec![
        r.step.into(),
        r.t.into(),
        r.energy_total.into(),
        r.mu_energy.into(),
        r.dissipation_cum.into(),
        r.mu_min.into(),
        r.mu_max.into(),
        r.rho_min.into(),
        r.rho_max.into(),
        r.xi_max_abs.into(),
        r.newton_iters.into(),
        r.dt_used.into(),
    ]
}

/// The per-step time series, one row per accepted step.
pub fn write_timeseries(path: &Path, records: &[StepRecord]) -> Result<(), IoError> {
    let rows: Vec<Vec<Cell>> = records.iter().map(record_cells).collect();
    write_table(path, &RECORD_COLUMNS, &rows)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<StepRecord>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    if header != RECORD_COLUMNS {
        return Err(IoError::Format {
            path: path.display().to_string(),
            message: format!("unexpected columns {header:?}"),
        });
    }
    let bad = |m: String| IoError::Format { path: path.display().to_string(), message: m };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", RECORD_COLUMNS[i])));
        let u = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", RECORD_COLUMNS[i])));
        out.push(StepRecord {
            step: u(0)?,
            t: f(1)?,
            energy_total: f(2)?,
            mu_energy: f(3)?,
            dissipation_cum: f(4)?,
            mu_min: f(5)?,
            mu_max: f(6)?,
            rho_min: f(7)?,
            rho_max: f(8)?,
            xi_max_abs: f(9)?,
            newton_iters: u(10)?,
            dt_used: f(11)?,
        });
    }
    Ok(out)
}

pub const SNAPSHOT_COLUMNS: [&str; 7] = ["node", "x", "y", "boundary", "mu", "rho", "xi"];

/// Nodal fields of one state.
pub fn write_snapshot(path: &Path, mesh: &Mesh, state: &SimState) -> Result<(), IoError> {
    let flags = mesh.boundary_flags();
    let rows: Vec<Vec<Cell>> = (0..mesh.n_nodes())
        .map(|i| {
            let p = mesh.coords()[i];
            vec![
                i.into(),
                p[0].into(),
                p[1].into(),
                Cell::Int(flags[i] as i64),
                state.mu[i].into(),
                state.rho[i].into(),
                state.xi[i].into(),
            ]
        })
        .collect();
    write_table(path, &SNAPSHOT_COLUMNS, &rows)
}

/// Legacy ASCII VTK unstructured grid with point data `mu`, `rho`, `xi`.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &SimState) -> Result<(), IoError> {
    let f = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(f);
    let io = file_err(path);
    let n = mesh.n_nodes();
    writeln!(w, "# vtk DataFile Version 3.0\nstate at t = {}\nASCII\nDATASET UNSTRUCTURED_GRID", state.t)
        .map_err(&io)?;
    writeln!(w, "POINTS {n} double").map_err(&io)?;
    for p in mesh.coords() {
        writeln!(w, "{} {} 0", fmt_float(p[0]), fmt_float(p[1])).map_err(&io)?;
    }
    let (cells, per, kind): (Vec<Vec<usize>>, usize, u8) = match mesh.cells() {
        Cells::Segments(s) => (s.iter().map(|c| c.to_vec()).collect(), 2, 3),
        Cells::Triangles(t) => (t.iter().map(|c| c.to_vec()).collect(), 3, 5),
    };
    writeln!(w, "CELLS {} {}", cells.len(), cells.len() * (per + 1)).map_err(&io)?;
    for c in &cells {
        let ids: Vec<String> = c.iter().map(usize::to_string).collect();
        writeln!(w, "{per} {}", ids.join(" ")).map_err(&io)?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len()).map_err(&io)?;
    for _ in &cells {
        writeln!(w, "{kind}").map_err(&io)?;
    }
    writeln!(w, "POINT_DATA {n}").map_err(&io)?;
    for (name, v) in [("mu", &state.mu), ("rho", &state.rho), ("xi", &state.xi)] {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default").map_err(&io)?;
        for x in v.iter() {
            writeln!(w, "{}", fmt_float(*x)).map_err(&io)?;
        }
    }
    w.flush().map_err(&io)
}

/// Nodal values from a CSV with a `node,value` header, one row per node.
pub fn read_nodal_csv(path: &Path, n: usize) -> Result<DVector<f64>, IoError> {
    let bad = |m: String| IoError::Format { path: path.display().to_string(), message: m };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(|s| s.trim().to_string()).collect();
    if header != ["node", "value"] {
        return Err(bad(format!("expected header node,value, got {}", header.join(","))));
    }
    let mut values = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let node: usize = rec[0].trim().parse().map_err(|e| bad(format!("node id: {e}")))?;
        let value: f64 = rec[1].trim().parse().map_err(|e| bad(format!("value: {e}")))?;
        if node >= n {
            return Err(bad(format!("node {node} out of range (mesh has {n} nodes)")));
        }
        values[node] = value;
        seen[node] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(bad(format!("no value for node {missing}")));
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn nodal_csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        std::fs::write(&p, "node,value\n1,2.5\n0,-1\n").unwrap();
        assert_eq!(read_nodal_csv(&p, 2).unwrap(), DVector::from_vec(vec![-1.0, 2.5]));
        assert!(read_nodal_csv(&p, 3).is_err());
        std::fs::write(&p, "a,b\n").unwrap();
        assert!(read_nodal_csv(&p, 2).is_err());
    }
}
