//! Plain-text formats: numeric matrices and labels as CSV, diagnostics as JSON.
//!
//! Numbers are written with 17 significant digits so that every `f64` survives a round trip
//! bit for bit.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Version tag carried by every diagnostics document.
pub const SCHEMA_VERSION: u32 = 1;

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source)
}

/// Reads a numeric CSV (rows = observations). A first line containing any non-numeric
/// field is taken as a header and skipped.
pub fn read_matrix<R: Read>(source: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader(source).records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, (usize, String)> = record
            .iter()
            .enumerate()
            .map(|(c, field)| field.parse::<f64>().map_err(|_| (c, field.to_string())))
            .collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(record.len());
                continue;
            }
            Err((c, field)) => {
                return Err(parse_error(
                    line,
                    format!("column {}: '{field}' is not a number", c + 1),
                ))
            }
        };
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(parse_error(
                line,
                format!("column {}: value is not finite", c + 1),
            ));
        }
        let expected = *width.get_or_insert(values.len());
        if values.len() != expected {
            return Err(parse_error(
                line,
                format!("expected {expected} fields, found {}", values.len()),
            ));
        }
        rows.push(values);
    }
    let cols = width.unwrap_or(0);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Empty("matrix file has no data rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reads a single-column label file. When `expected_rows` is given and the file holds
/// exactly one more entry, the first entry is taken as a header.
pub fn read_labels<R: Read>(source: R, expected_rows: Option<usize>) -> Result<Vec<String>> {
    let mut labels = Vec::new();
    for record in reader(source).records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match record.len() {
            0 => continue,
            1 if record[0].is_empty() => continue,
            1 => labels.push(record[0].to_string()),
            n => return Err(parse_error(line, format!("expected 1 field, found {n}"))),
        }
    }
    if let Some(n) = expected_rows {
        if labels.len() == n + 1 {
            labels.remove(0);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("label file has no entries"));
    }
    Ok(labels)
}

/// `v` in scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `m` as CSV with LF line endings and no header.
pub fn write_matrix<W: Write>(mut sink: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(sink, "{}", line.join(","))?;
    }
    sink.flush()
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    let mut out = Vec::new();
    write_matrix(&mut out, m).expect("writing to memory");
    String::from_utf8(out).expect("ASCII output")
}

/// A JSON document `{"schema": 1, ...body}`.
#[derive(Debug, Serialize)]
pub struct Versioned<T: Serialize> {
    pub schema: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            body,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let with = read_matrix("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        let without = read_matrix("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert_eq!(with, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_matrix("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                message: "column 2: 'x' is not a number".into()
            }
        );
        let err = read_matrix("h1,h2\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            read_matrix("1,inf\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read_matrix("a,b\n".as_bytes()).is_err());
        assert!(read_matrix("".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let m = DMatrix::from_row_slice(
            2,
            3,
            &[0.1, -1.0 / 3.0, f64::MIN_POSITIVE, 1e300, 2f64.sqrt(), -0.0],
        );
        let back = read_matrix(matrix_to_string(&m).as_bytes()).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(format_f64(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn labels_with_and_without_header() {
        let l = read_labels("class\na\nb\n".as_bytes(), Some(2)).unwrap();
        assert_eq!(l, vec!["a", "b"]);
        let l = read_labels("1\n2\n".as_bytes(), Some(2)).unwrap();
        assert_eq!(l, vec!["1", "2"]);
        assert!(read_labels("a\n".as_bytes(), Some(3)).is_err());
        assert!(read_labels("a,b\n".as_bytes(), None).is_err());
    }

    #[test]
    fn versioned_json_has_schema() {
        #[derive(Serialize)]
        struct Body {
            gamma_star: f64,
        }
        let v: serde_json::Value =
            serde_json::from_str(&Versioned::new(Body { gamma_star: 0.5 }).to_json_string())
                .unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["gamma_star"], 0.5);
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_text_never_panics(text in "[0-9a-z.,eE+\\- \n#\"]{0,80}") {
            if let Ok(m) = read_matrix(text.as_bytes()) {
                let back = read_matrix(matrix_to_string(&m).as_bytes()).unwrap();
                proptest::prop_assert!(m.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
            let _ = read_labels(text.as_bytes(), Some(2));
        }
    }
}
