//! CSV ingestion and atomic output.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::mc_lab::format_number;

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn input_error(message: String) -> Error {
    Error::Invalid {
        what: "input".into(),
        message,
    }
}

/// Reads a CSV with header `x1,...,xd,y`. Row numbers in errors count data
/// rows from 1.
pub fn ingest_csv(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_sample_csv(&text)
}

pub fn parse_sample_csv(text: &str) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(input_error("missing header row (file is empty)".into())),
        Some(r) => r.map_err(|e| input_error(format!("unreadable header: {e}")))?,
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.len() < 2 || names.iter().all(|n| n.is_empty()) {
        return Err(input_error(format!(
            "missing header row: expected x1,...,xd,y, found '{}'",
            names.join(",")
        )));
    }
    let d = names.len() - 1;
    for (k, name) in names.iter().enumerate() {
        let want = if k == d { "y".to_string() } else { format!("x{}", k + 1) };
        if *name != want {
            if name.parse::<f64>().is_ok() {
                return Err(input_error(format!(
                    "missing header row: first line is numeric, expected x1,...,x{d},y"
                )));
            }
            return Err(input_error(format!(
                "header column {} is '{name}', expected '{want}' (columns must be x1..x{d} then y)",
                k + 1
            )));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, record) in records.enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| input_error(format!("row {row}: {e}")))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != d + 1 {
            return Err(input_error(format!(
                "ragged row {row}: {} fields, expected {}",
                record.len(),
                d + 1
            )));
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                input_error(format!("row {row}, column {}: '{field}' is not a number", names[k]))
            })?;
            if !v.is_finite() {
                return Err(input_error(format!(
                    "row {row}, column {}: non-finite value '{field}'",
                    names[k]
                )));
            }
            if k == d {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(input_error("zero data rows after the header".into()));
    }
    Sample::new(xs, ys, d)
}

/// The sample as CSV, 17 significant digits per value.
pub fn emit_sample_csv(sample: &Sample) -> String {
    let d = sample.dim();
    let mut out: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    out.push("y".into());
    let mut text = out.join(",") + "\n";
    for i in 0..sample.n() {
        let mut fields: Vec<String> = sample.row(i).iter().map(|v| format_number(*v)).collect();
        fields.push(format_number(sample.y()[i]));
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    text
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so the target never holds a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message(text: &str) -> String {
        parse_sample_csv(text).unwrap_err().to_string()
    }

    #[test]
    fn reads_small_files() {
        let s = parse_sample_csv("x1,y\n0,1\n0.5,2\n1,3\n").unwrap();
        assert_eq!((s.n(), s.dim()), (3, 1));
        let s = parse_sample_csv("x1,x2,y\n0,1,2\n3,4,5\n").unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.y(), &[2.0, 5.0]);
    }

    #[test]
    fn distinct_errors() {
        assert!(message("").contains("missing header"));
        assert!(message("0,1\n2,3\n").contains("missing header"));
        assert!(message("x2,x1,y\n1,2,3\n").contains("column 1 is 'x2'"));
        assert!(message("x1,y\n1,2\n3\n").contains("ragged row 2"));
        assert!(message("x1,y\n").contains("zero data rows"));
        let mut text = String::from("x1,y\n");
        for i in 0..10 {
            text.push_str(&if i == 6 { "0.5,NaN\n".to_string() } else { format!("{i},1\n") });
        }
        let m = message(&text);
        assert!(m.contains("row 7") && m.contains("column y"), "{m}");
        assert!(message("x1,y\n1,abc\n").contains("'abc' is not a number"));
    }

    #[test]
    fn echo_round_trip() {
        let x = vec![0.1, -1.0 / 3.0, 2e-300];
        let y = vec![std::f64::consts::PI, 1e300, -0.0];
        let s = Sample::new(x, y, 1).unwrap();
        let back = parse_sample_csv(&emit_sample_csv(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
