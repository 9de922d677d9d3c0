use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};
use crate::types::RepresentationSet;

/// Reads a rectangular numeric CSV into an `n x d` matrix. Fields are trimmed
/// and parsed with `str::parse::<f64>`, independent of locale.
pub fn read_csv_matrix<R: Read>(reader: R, has_header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| AlignError::ParseError(e.to_string()))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(AlignError::RaggedRows {
                line,
                expected,
                found: record.len(),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                AlignError::ParseError(format!(
                    "line {line}, column {}: '{field}' is not a number",
                    col + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if rows == 0 || d == 0 {
        return Err(AlignError::ParseError("no numeric rows".into()));
    }
    Ok(DMatrix::from_row_slice(rows, d, &values))
}

pub fn read_csv_repr(path: impl AsRef<Path>, has_header: bool) -> Result<RepresentationSet> {
    let path = path.as_ref();
    let data = read_csv_matrix(File::open(path)?, has_header)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RepresentationSet::new(label, data)
}

/// Writes one row per sample using the shortest round-trip decimal form.
pub fn write_csv_matrix<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| AlignError::Serialization(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_repr(rs: &RepresentationSet, path: impl AsRef<Path>) -> Result<()> {
    write_csv_matrix(File::create(path)?, rs.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        let m = read_csv_matrix("1,2\n3,4".as_bytes(), false).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let m = read_csv_matrix("a,b\n1e3, 2\n".as_bytes(), true).unwrap();
        assert_eq!(m[(0, 0)], 1000.0);
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn ragged_and_bad_fields() {
        assert!(matches!(
            read_csv_matrix("1,2\n3\n".as_bytes(), false),
            Err(AlignError::RaggedRows {
                line: 2,
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            read_csv_matrix("1,2\n3,x\n".as_bytes(), false),
            Err(AlignError::ParseError(_))
        ));
        assert!(matches!(
            read_csv_matrix("1,5;2\n".as_bytes(), false),
            Err(AlignError::ParseError(_))
        ));
        assert!(read_csv_matrix("".as_bytes(), false).is_err());
    }

    #[test]
    fn round_trip_is_value_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e-310, 6.02214076e23]);
        let mut buf = Vec::new();
        write_csv_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_csv_matrix(buf.as_slice(), false).unwrap(), m);
    }
}
