use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

fn csv_error(path: &Path, message: String) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message,
    }
}

/// Read an `x,y` table. `path` is only used in error messages.
///
/// Extra columns are ignored; rows are reported by their line number in the file.
pub fn read_xy<R: Read>(input: R, path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_error(path, format!("missing column `{name}` in header")))
    };
    let ix = column("x")?;
    let iy = column("y")?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_error(path, format!("line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = rec
                .get(i)
                .ok_or_else(|| csv_error(path, format!("line {line}: missing `{name}` value")))?;
            let v: f64 = raw.parse().map_err(|_| {
                csv_error(path, format!("line {line}: `{name}` value `{raw}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(csv_error(path, format!("line {line}: `{name}` is not finite")));
            }
            Ok(v)
        };
        let x = field(ix, "x")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(csv_error(path, format!("line {line}: x = {x} lies outside [0, 1]")));
        }
        xs.push(x);
        ys.push(field(iy, "y")?);
    }
    if xs.is_empty() {
        return Err(csv_error(path, "no data rows".into()));
    }
    Ok((xs, ys))
}

pub fn read_xy_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_xy(file, path)
}

pub fn write_xy<W: Write>(xs: &[f64], ys: &[f64], out: W) -> Result<()> {
    let path = Path::new("<xy>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"]).map_err(|e| csv_error(path, e.to_string()))?;
    for (x, y) in xs.iter().zip(ys) {
        w.write_record([x.to_string(), y.to_string()])
            .map_err(|e| csv_error(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// One output row of a fitted curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub x: f64,
    pub fhat: f64,
    /// Pointwise interval, when requested.
    pub interval: Option<(f64, f64)>,
}

/// `x,fhat` or `x,fhat,lo,hi` depending on whether any row carries an interval.
pub fn write_predictions<W: Write>(rows: &[Prediction], out: W) -> Result<()> {
    let path = Path::new("<predictions>");
    let with_ci = rows.iter().any(|r| r.interval.is_some());
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| csv_error(path, e.to_string());
    if with_ci {
        w.write_record(["x", "fhat", "lo", "hi"]).map_err(err)?;
    } else {
        w.write_record(["x", "fhat"]).map_err(err)?;
    }
    for r in rows {
        let mut rec = vec![r.x.to_string(), r.fhat.to_string()];
        if with_ci {
            let (lo, hi) = r.interval.unwrap_or((f64::NAN, f64::NAN));
            rec.push(lo.to_string());
            rec.push(hi.to_string());
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_reports_lines() {
        let p = Path::new("t.csv");
        let (x, y) = read_xy("x,y\n0.1,2\n0.5, 3.5\n".as_bytes(), p).unwrap();
        assert_eq!(x, vec![0.1, 0.5]);
        assert_eq!(y, vec![2.0, 3.5]);
        let e = read_xy("x,y\n0.1,2\n0.5,abc\n".as_bytes(), p).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_xy("x,z\n0.1,2\n".as_bytes(), p).unwrap_err();
        assert!(e.to_string().contains("`y`"), "{e}");
        let e = read_xy("x,y\n1.5,2\n".as_bytes(), p).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_xy(&[0.25, 0.75], &[1.0 / 3.0, -2.5e-9], &mut buf).unwrap();
        let (x, y) = read_xy(buf.as_slice(), Path::new("b")).unwrap();
        assert_eq!(x, vec![0.25, 0.75]);
        assert_eq!(y, vec![1.0 / 3.0, -2.5e-9]);
    }
}
