//! Plain-text matrix exchange format used by the command-line tools.
//!
//! The first line holds the two dimensions (`rows cols`); each of the
//! following `rows` lines holds `cols` whitespace-separated decimal values.
//! Values are written with enough digits to round-trip f64 exactly.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, SubspaceError};

pub fn write_matrix_to<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix_from<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| SubspaceError::Parse("empty matrix file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| SubspaceError::Parse(format!("bad dimension token {t:?}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(SubspaceError::Parse(format!(
            "header must hold exactly two dimensions, got {header:?}"
        )));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if rows == 0 || cols == 0 {
        return Err(SubspaceError::Parse("matrix dimensions must be positive".into()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| SubspaceError::Parse(format!("bad value token {tok:?}")))?;
            data.push(v);
        }
        seen += 1;
        if seen > rows {
            break;
        }
    }
    if data.len() != rows * cols {
        return Err(SubspaceError::Parse(format!(
            "expected {} values for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix<P: AsRef<Path>>(path: P, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_matrix_to(&mut f, m)
}

pub fn read_matrix<P: AsRef<Path>>(path: P) -> Result<DMatrix<f64>> {
    let f = std::fs::File::open(path)?;
    read_matrix_from(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        let m = DMatrix::from_row_slice(
            2,
            3,
            &[1.0, -0.5, std::f64::consts::PI, 1e-300, 2.2250738585072014e-308, -0.0],
        );
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &m).unwrap();
        let back = read_matrix_from(&buf[..]).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let text = b"2 2\n1 2\n3\n";
        assert!(read_matrix_from(&text[..]).is_err());
    }

    #[test]
    fn rejects_bad_header() {
        let text = b"two 2\n1 2\n";
        assert!(read_matrix_from(&text[..]).is_err());
    }
}
