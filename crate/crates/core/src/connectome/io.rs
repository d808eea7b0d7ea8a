use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{ConnectomeError, RawConnectome};

fn open(path: &Path) -> Result<File, ConnectomeError> {
    File::open(path).map_err(|source| ConnectomeError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a square numeric matrix from CSV, one row per node.
///
/// A leading header row is skipped when any of its fields fails to parse as
/// a number. Values are not range-checked here.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>, ConnectomeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(col, f)| f.parse::<f64>().map_err(|_| col))
            .collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if idx == 0 => continue,
            Err(col) => {
                return Err(ConnectomeError::Parse {
                    row: rows.len(),
                    col,
                    value: record.get(col).unwrap_or_default().to_string(),
                })
            }
        }
    }

    let n = rows.len();
    if n == 0 {
        return Err(ConnectomeError::Empty);
    }
    for (row, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(ConnectomeError::NotSquare {
                rows: n,
                row,
                cols: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Reads a streamline-count matrix from a CSV file.
pub fn load_raw(path: impl AsRef<Path>) -> Result<RawConnectome, ConnectomeError> {
    let m = parse_matrix_csv(open(path.as_ref())?)?;
    RawConnectome::from_matrix(m)
}

/// Reads a per-edge value matrix (FA, MD) from a CSV file.
pub fn load_edge_values(path: impl AsRef<Path>) -> Result<DMatrix<f64>, ConnectomeError> {
    parse_matrix_csv(open(path.as_ref())?)
}

/// Writes a matrix as header-less CSV. Values use the shortest decimal form
/// that round-trips, so a save/load cycle is bit-exact.
pub fn save_matrix_csv<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<(), ConnectomeError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.nrows() {
        wtr.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    wtr.flush().map_err(|source| ConnectomeError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_raw(raw: &RawConnectome, path: impl AsRef<Path>) -> Result<(), ConnectomeError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| ConnectomeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    save_matrix_csv(raw.weights(), file)
}
