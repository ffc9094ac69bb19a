//! CSV regression tables.
//!
//! The header names every column with an `in:` or `out:` prefix, all input
//! columns first, e.g. `in:mu,in:t,in:x,out:u`. Every following row holds one
//! sample as plain decimal numbers. Rows are numbered from 1 for the header.

use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Targets};
use crate::matrix::Matrix;
use crate::{Error, Result};

fn tab_err(row: usize, message: impl Into<String>) -> Error {
    Error::Tabular {
        row,
        message: message.into(),
    }
}

pub fn load_tabular(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tabular(std::io::BufReader::new(file), path.display().to_string())
}

pub fn parse_tabular<R: Read>(reader: R, name: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| tab_err(1, e.to_string()))?,
        None => return Err(tab_err(1, "missing header")),
    };
    let mut n_in = 0;
    let mut n_out = 0;
    for (c, cell) in header.iter().enumerate() {
        if cell.starts_with("in:") {
            if n_out > 0 {
                return Err(tab_err(1, format!("input column {c} follows a target column")));
            }
            n_in += 1;
        } else if cell.starts_with("out:") {
            n_out += 1;
        } else {
            return Err(tab_err(
                1,
                format!("column {c} ({cell:?}) lacks an `in:` or `out:` prefix"),
            ));
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(tab_err(1, "header needs at least one `in:` and one `out:` column"));
    }

    let width = n_in + n_out;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut count = 0;
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| tab_err(row, e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(tab_err(row, format!("expected {width} cells, found {}", rec.len())));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| tab_err(row, format!("column {c}: {cell:?} is not a number")))?;
            if !v.is_finite() {
                return Err(tab_err(row, format!("column {c}: non-finite value")));
            }
            if c < n_in {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    Dataset::new(
        name,
        Matrix::new(count, n_in, inputs)?,
        Targets::Values(Matrix::new(count, n_out, targets)?),
    )
}

/// Writes a regression dataset in the layout [`parse_tabular`] reads, with
/// full round-trip precision.
pub fn write_tabular<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let Targets::Values(values) = data.targets() else {
        return Err(Error::TaskMismatch("only regression datasets can be written as CSV".into()));
    };
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..data.input_dim())
        .map(|c| format!("in:x{c}"))
        .chain((0..values.cols()).map(|c| format!("out:y{c}")))
        .collect();
    let to_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for i in 0..data.len() {
        let row: Vec<String> = data
            .input(i)
            .iter()
            .chain(values.row(i))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Report(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows() {
        let d = parse_tabular("in:x,out:y\n1,2\n3.5,-4\n".as_bytes(), "t").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.input(1), &[3.5]);
        assert_eq!(d.target(1), super::super::Target::Values(&[-4.0]));
    }

    #[test]
    fn header_only() {
        match parse_tabular("in:x,out:y\n".as_bytes(), "t") {
            Err(Error::Empty(m)) => assert_eq!(m, "no samples"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows_report_row() {
        match parse_tabular("in:x,out:y\n1,2\n3\n".as_bytes(), "t") {
            Err(Error::Tabular { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse_tabular("in:x,out:y\n1,abc\n".as_bytes(), "t") {
            Err(Error::Tabular { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_rules() {
        assert!(parse_tabular("x,y\n1,2\n".as_bytes(), "t").is_err());
        assert!(parse_tabular("out:y,in:x\n1,2\n".as_bytes(), "t").is_err());
        assert!(parse_tabular("in:x\n1\n".as_bytes(), "t").is_err());
        assert!(parse_tabular("".as_bytes(), "t").is_err());
    }

    #[test]
    fn write_then_parse() {
        let d = parse_tabular("in:a,in:b,out:y\n0.1,0.2,0.30000000000000004\n".as_bytes(), "t")
            .unwrap();
        let mut buf = Vec::new();
        write_tabular(&d, &mut buf).unwrap();
        let back = parse_tabular(buf.as_slice(), "t").unwrap();
        assert_eq!(back, d);
    }
}
