//! CSV traces, two-column tables and labelled matrices. Every column header
//! carries its unit.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{IoError, Result};

fn frequency_scale(header: &str) -> Option<f64> {
    match header.trim().to_ascii_lowercase().as_str() {
        "frequency_hz" | "f_hz" => Some(1.0),
        "frequency_mhz" | "f_mhz" => Some(1e6),
        "frequency_ghz" | "f_ghz" => Some(1e9),
        _ => None,
    }
}

fn number(field: &str, row: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| IoError::Parse {
        line: row,
        message: format!("not a number: {field:?}"),
    })
}

/// Reads a complex trace with header `frequency_<unit>,re,im` or
/// `frequency_<unit>,mag,phase_deg`.
pub fn read_trace<R: Read>(reader: R) -> Result<Vec<(f64, Complex64)>> {
    let mut rdr = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 {
        return Err(IoError::Invalid(format!("trace needs 3 columns, header has {}", headers.len())));
    }
    let scale = frequency_scale(&headers[0]).ok_or_else(|| {
        IoError::Invalid(format!("first column {:?} must be frequency_hz|mhz|ghz", &headers[0]))
    })?;
    let polar = match (headers[1].to_ascii_lowercase().as_str(), headers[2].to_ascii_lowercase().as_str()) {
        ("re", "im") => false,
        ("mag", "phase_deg") => true,
        (a, b) => return Err(IoError::Invalid(format!("unsupported value columns {a:?}, {b:?}"))),
    };
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let f = number(&rec[0], row)? * scale;
        let (a, b) = (number(&rec[1], row)?, number(&rec[2], row)?);
        let z = if polar { Complex64::from_polar(a, b.to_radians()) } else { Complex64::new(a, b) };
        out.push((f, z));
    }
    if out.is_empty() {
        return Err(IoError::Invalid("trace has no data rows".into()));
    }
    Ok(out)
}

pub fn write_trace<W: Write>(writer: W, trace: &[(f64, Complex64)]) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    w.write_record(["frequency_hz", "re", "im"])?;
    for (f, z) in trace {
        w.write_record([format!("{f}"), format!("{:e}", z.re), format!("{:e}", z.im)])?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

/// Reads the two named columns of a headed CSV table as (x, y) pairs.
pub fn read_columns<R: Read>(reader: R, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
    let mut rdr = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::Invalid(format!("missing column {name:?}")))
    };
    let (ix, iy) = (find(x)?, find(y)?);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        out.push((number(&rec[ix], k + 2)?, number(&rec[iy], k + 2)?));
    }
    Ok(out)
}

pub fn write_columns<W: Write>(writer: W, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    w.write_record(headers)?;
    for r in rows {
        if r.len() != headers.len() {
            return Err(IoError::Invalid("row length does not match header".into()));
        }
        w.write_record(r.iter().map(|v| format!("{v}")))?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

/// Matrix with the column axis in the header row and the row axis in the
/// first column. Missing cells are written empty.
pub fn write_matrix<W: Write>(
    writer: W,
    corner: &str,
    columns: &[f64],
    rows: &[f64],
    cells: &[Vec<Option<f64>>],
) -> Result<()> {
    if cells.len() != rows.len() || cells.iter().any(|r| r.len() != columns.len()) {
        return Err(IoError::Invalid("matrix shape does not match its axes".into()));
    }
    let mut w = ::csv::Writer::from_writer(writer);
    let mut header = vec![corner.to_string()];
    header.extend(columns.iter().map(|c| format!("{c}")));
    w.write_record(&header)?;
    for (r, row) in rows.iter().zip(cells) {
        let mut rec = vec![format!("{r}")];
        rec.extend(row.iter().map(|c| c.map(|v| format!("{v}")).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

/// Parses a matrix written by [`write_matrix`]: (columns, rows, cells).
#[allow(clippy::type_complexity)]
pub fn read_matrix<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<Option<f64>>>)> {
    let mut rdr = ::csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| IoError::Invalid("empty matrix".into()))??;
    let columns =
        header.iter().skip(1).map(|v| number(v, 1)).collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        rows.push(number(&rec[0], k + 2)?);
        cells.push(
            rec.iter()
                .skip(1)
                .map(|v| if v.is_empty() { Ok(None) } else { number(v, k + 2).map(Some) })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((columns, rows, cells))
}
