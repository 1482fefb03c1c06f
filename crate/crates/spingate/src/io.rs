//! Artifact formats: CSV tables, JSON reports, field files and propagator
//! trajectories.
//!
//! Every float goes out as `{:.16e}`, which round-trips an `f64` exactly.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use spingate_core::dynamics::{PiecewiseField, TimeGrid, UnitaryTrajectory};
use spingate_core::hilbert::ComplexMatrix;

use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_io = |e: csv::Error| CliError::io(path, e.into());
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(to_io)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(to_io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a CSV of floats. Empty cells become NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let bad = |line: usize, msg: String| CliError::validation(path.display().to_string(), format!("line {line}: {msg}"));
    let header = r.headers().map_err(|e| bad(1, e.to_string()))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(i + 2, e.to_string()))?;
        let row = record
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.trim().parse::<f64>().map_err(|e| bad(i + 2, format!("`{cell}`: {e}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `t,c` rows with `t` the left edge of each interval.
pub fn write_field_csv(path: &Path, field: &PiecewiseField) -> Result<()> {
    let grid = field.grid();
    let rows = field.values().iter().enumerate().map(|(k, &c)| vec![grid.time(k).into(), c.into()]);
    write_csv(path, &["t", "c"], rows)
}

/// Reads a field written by [`write_field_csv`] and checks it against `grid`.
pub fn read_field_csv(path: &Path, grid: &TimeGrid) -> Result<PiecewiseField> {
    let (header, rows) = read_csv(path)?;
    let name = path.display().to_string();
    if header != ["t", "c"] {
        return Err(CliError::validation(name, format!("expected header `t,c`, found `{}`", header.join(","))));
    }
    if rows.len() != grid.steps() {
        return Err(CliError::validation(
            name,
            format!("field has {} samples but the grid has {} steps", rows.len(), grid.steps()),
        ));
    }
    let tol = 1e-9 * grid.t_final().max(1.0);
    for (k, row) in rows.iter().enumerate() {
        if (row[0] - grid.time(k)).abs() > tol {
            return Err(CliError::validation(
                name,
                format!("sample {k} is at t = {} but the grid expects {}", row[0], grid.time(k)),
            ));
        }
    }
    PiecewiseField::new(*grid, rows.iter().map(|r| r[1]).collect()).map_err(|e| CliError::validation(name, e.to_string()))
}

/// Long-format CSV: one row per matrix entry per time.
pub fn write_trajectory_csv(path: &Path, traj: &UnitaryTrajectory) -> Result<()> {
    let grid = traj.grid();
    let rows = traj.unitaries().iter().enumerate().flat_map(|(k, u)| {
        let t = grid.time(k);
        (0..u.ncols()).flat_map(move |col| {
            (0..u.nrows()).map(move |row| vec![t.into(), row.into(), col.into(), u[(row, col)].re.into(), u[(row, col)].im.into()])
        })
    });
    write_csv(path, &["t", "row", "col", "re", "im"], rows)
}

const TRAJECTORY_MAGIC: &[u8; 8] = b"SPGTRAJ1";

/// Little-endian binary: magic, `dim: u64`, `count: u64`, `t_final: f64`,
/// then per time `t: f64` followed by the matrix column-major as `(re, im)` pairs.
pub fn write_trajectory_binary(path: &Path, traj: &UnitaryTrajectory) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let dim = traj.final_unitary().nrows();
    let grid = traj.grid();
    w.write_all(TRAJECTORY_MAGIC).map_err(io)?;
    w.write_all(&(dim as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(traj.unitaries().len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&grid.t_final().to_le_bytes()).map_err(io)?;
    for (k, u) in traj.unitaries().iter().enumerate() {
        w.write_all(&grid.time(k).to_le_bytes()).map_err(io)?;
        for z in u.iter() {
            w.write_all(&z.re.to_le_bytes()).map_err(io)?;
            w.write_all(&z.im.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a binary trajectory back as `(t, U)` pairs.
pub fn read_trajectory_binary(path: &Path) -> Result<Vec<(f64, ComplexMatrix)>> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| CliError::io(path, e))?;
    let corrupt = |msg: &str| CliError::validation(path.display().to_string(), msg.to_string());
    let mut pos = 0;
    let mut take = |len: usize| -> Result<&[u8]> {
        let chunk = bytes.get(pos..pos + len).ok_or_else(|| corrupt("truncated trajectory"))?;
        pos += len;
        Ok(chunk)
    };
    if take(8)? != TRAJECTORY_MAGIC {
        return Err(corrupt("not a trajectory file"));
    }
    let word = |b: &[u8]| <[u8; 8]>::try_from(b).expect("eight bytes");
    let dim = u64::from_le_bytes(word(take(8)?)) as usize;
    let count = u64::from_le_bytes(word(take(8)?)) as usize;
    let _t_final = f64::from_le_bytes(word(take(8)?));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let t = f64::from_le_bytes(word(take(8)?));
        let mut data = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            let re = f64::from_le_bytes(word(take(8)?));
            let im = f64::from_le_bytes(word(take(8)?));
            data.push(spingate_core::hilbert::ONE * re + spingate_core::hilbert::I * im);
        }
        out.push((t, ComplexMatrix::from_vec(dim, dim, data)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spingate_core::dynamics::propagate;
    use spingate_core::model::default_spec;

    #[test]
    fn field_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let grid = TimeGrid::new(15.4, 308).unwrap();
        let field = PiecewiseField::from_fn(grid, |t| (1.7 * t).sin() / 3.0 + 1e-300).unwrap();
        write_field_csv(&path, &field).unwrap();
        assert_eq!(read_field_csv(&path, &grid).unwrap(), field);
    }

    #[test]
    fn field_on_the_wrong_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let field = PiecewiseField::zeros(TimeGrid::new(10.0, 200).unwrap());
        write_field_csv(&path, &field).unwrap();
        assert!(matches!(read_field_csv(&path, &TimeGrid::new(10.0, 100).unwrap()), Err(CliError::Validation { .. })));
        assert!(matches!(read_field_csv(&path, &TimeGrid::new(12.0, 200).unwrap()), Err(CliError::Validation { .. })));
    }

    #[test]
    fn binary_trajectory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.bin");
        let spec = default_spec(1, 0.02, 0.0).unwrap();
        let field = PiecewiseField::from_fn(TimeGrid::new(2.0, 20).unwrap(), |t| t.cos()).unwrap();
        let traj = propagate(&spec, &field, true);
        write_trajectory_binary(&path, &traj).unwrap();
        let back = read_trajectory_binary(&path).unwrap();
        assert_eq!(back.len(), 21);
        for (k, (t, u)) in back.iter().enumerate() {
            assert_eq!(*t, field.grid().time(k));
            assert_eq!(u, &traj.unitaries()[k]);
        }
    }

    #[test]
    fn csv_cells_render_in_full_precision() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
        assert_eq!(Cell::from(None).render(), "");
    }
}
