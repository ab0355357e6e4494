//! CSV ingestion and atomic output.
//!
//! Dialect: comma separated, header row, UTF-8, decimal point. One optional
//! column holds string labels; every other column must parse as a finite
//! number.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Numeric table with optional labels, before any shape requirements.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub values: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub labels: Option<Vec<String>>,
}

fn parse_table<R: std::io::Read>(reader: R, label_column: &str, source: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::InvalidData(format!("{source}: missing header row")));
    }
    let label_idx = headers.iter().position(|h| h == label_column);
    let numeric: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
    if numeric.is_empty() {
        return Err(Error::InvalidData(format!("{source}: no numeric columns")));
    }

    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // Line numbers count the header as line 1.
        let line = r + 2;
        if record.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "{source}: line {line} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for &j in &numeric {
            let field = record[j].trim();
            let value: f64 = field.parse().map_err(|_| {
                Error::InvalidData(format!(
                    "{source}: line {line}, column '{}': '{field}' is not a number",
                    headers[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::InvalidData(format!(
                    "{source}: line {line}, column '{}': non-finite value '{field}'",
                    headers[j]
                )));
            }
            data.push(value);
        }
        if let (Some(l), Some(idx)) = (labels.as_mut(), label_idx) {
            l.push(record[idx].trim().to_string());
        }
        n += 1;
    }
    Ok(Table {
        values: DMatrix::from_row_slice(n, numeric.len(), &data),
        column_names: numeric.iter().map(|&j| headers[j].clone()).collect(),
        labels,
    })
}

pub fn read_table(path: &Path, label_column: &str) -> Result<Table> {
    let file = fs::File::open(path)?;
    parse_table(file, label_column, &path.display().to_string())
}

pub fn parse_data_matrix(text: &str, label_column: &str) -> Result<DataMatrix> {
    table_to_data(parse_table(text.as_bytes(), label_column, "input")?)
}

/// Reads observations; the label column is used when present.
pub fn read_data_matrix(path: &Path, label_column: &str) -> Result<DataMatrix> {
    table_to_data(read_table(path, label_column)?)
}

fn table_to_data(table: Table) -> Result<DataMatrix> {
    let mut x = DataMatrix::new(table.values)?.with_column_names(table.column_names)?;
    if let Some(labels) = table.labels {
        x = x.with_labels(labels)?;
    }
    Ok(x)
}

/// CSV text of `values` with an optional leading label column.
pub fn matrix_csv(
    column_names: &[String],
    values: &DMatrix<f64>,
    labels: Option<&[String]>,
    label_column: &str,
) -> Result<Vec<u8>> {
    if column_names.len() != values.ncols() {
        return Err(Error::InvalidData(format!(
            "{} column names for {} columns",
            column_names.len(),
            values.ncols()
        )));
    }
    if let Some(l) = labels {
        if l.len() != values.nrows() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} rows",
                l.len(),
                values.nrows()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = Vec::with_capacity(values.ncols() + 1);
    if labels.is_some() {
        header.push(label_column);
    }
    header.extend(column_names.iter().map(String::as_str));
    w.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..values.nrows() {
        record.clear();
        if let Some(l) = labels {
            record.push(l[i].clone());
        }
        // Shortest round-trip representation; reproducible across runs.
        record.extend(values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(e.into_error()))
}

pub fn data_matrix_csv(x: &DataMatrix, label_column: &str) -> Result<Vec<u8>> {
    let names = x
        .column_names()
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| (1..=x.ncols()).map(|j| format!("v{j}")).collect());
    matrix_csv(&names, x.values(), x.labels(), label_column)
}

/// Writes through a temporary file in the target directory and renames it
/// into place; the target is either untouched or complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labels_anywhere() {
        let x = parse_data_matrix("a,label,b\n1,x,2\n3,y,4.5\n", "label").unwrap();
        assert_eq!(x.values(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]));
        assert_eq!(x.labels().unwrap(), &["x".to_string(), "y".to_string()]);
        assert_eq!(x.column_names().unwrap(), &["a".to_string(), "b".to_string()]);
        let unlabelled = parse_data_matrix("a,b\n1,2\n3,4\n", "label").unwrap();
        assert!(unlabelled.labels().is_none());
    }

    #[test]
    fn rejects_bad_numbers_with_position() {
        for bad in ["NaN", "inf", "-inf", "abc", ""] {
            let text = format!("a,b\n1,2\n3,{bad}\n");
            let err = parse_data_matrix(&text, "label").unwrap_err().to_string();
            assert!(err.contains("line 3") && err.contains("'b'"), "{err}");
        }
        assert!(parse_data_matrix("label\nx\ny\n", "label").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let values = DMatrix::from_row_slice(2, 2, &[0.1, -1e-300, 1.0 / 3.0, 12345.678]);
        let labels = vec!["g1".to_string(), "g,2".to_string()];
        let x = DataMatrix::new(values)
            .unwrap()
            .with_labels(labels)
            .unwrap();
        let bytes = data_matrix_csv(&x, "label").unwrap();
        let back = parse_data_matrix(std::str::from_utf8(&bytes).unwrap(), "label").unwrap();
        assert_eq!(back.values(), x.values());
        assert_eq!(back.labels(), x.labels());
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
