use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimResult;
use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 9] = [
    "arm", "used", "excluded", "ISB_x1e3", "V_x1e3", "MISE_x1e3", "ISB", "V", "MISE",
];
pub const SELECTION_HEADER: [&str; 8] = [
    "selection", "model", "C_a", "C_lambda", "C_a_lambda", "AIC", "TIC", "failed",
];
pub const GRID_HEADER: [&str; 5] = ["arm", "j", "z", "bias", "variance"];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn scaled(v: f64) -> String {
    format!("{:.3}", v * 1e3)
}

/// Per-arm `ISB`, `V`, `MISE`: three-decimal values scaled by 1000, then the raw values.
pub fn write_metrics_csv<W: Write>(result: &SimResult, out: W) -> Result<()> {
    let path = Path::new("<metrics>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER).map_err(csv_err(path))?;
    for a in &result.arms {
        w.write_record([
            a.label.clone(),
            a.used.to_string(),
            a.excluded.to_string(),
            scaled(a.isb),
            scaled(a.v),
            scaled(a.mise),
            a.isb.to_string(),
            a.v.to_string(),
            a.mise.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// Times each candidate was picked, one row per candidate.
pub fn write_selection_csv<W: Write>(result: &SimResult, out: W) -> Result<()> {
    let path = Path::new("<selection>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SELECTION_HEADER).map_err(csv_err(path))?;
    for s in &result.selections {
        for (i, m) in s.candidates.iter().enumerate() {
            w.write_record([
                s.label.clone(),
                m.clone(),
                s.c_a[i].to_string(),
                s.c_lambda[i].to_string(),
                s.c_a_lambda[i].to_string(),
                s.aic[i].to_string(),
                s.tic[i].to_string(),
                s.failed.to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// `B_j` and `V_j` per arm and grid point.
pub fn write_grid_csv<W: Write>(result: &SimResult, out: W) -> Result<()> {
    let path = Path::new("<grid>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_HEADER).map_err(csv_err(path))?;
    for a in &result.arms {
        for (j, z) in result.grid.iter().enumerate() {
            w.write_record([
                a.label.clone(),
                (j + 1).to_string(),
                z.to_string(),
                a.bias[j].to_string(),
                a.variance[j].to_string(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// Paths written by [`report_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub metrics: PathBuf,
    pub selection: PathBuf,
    pub grid: PathBuf,
}

/// Write `metrics.csv`, `selection.csv` and `grid.csv` into `dir`.
pub fn report_csv(result: &SimResult, dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let files = ReportFiles {
        metrics: dir.join("metrics.csv"),
        selection: dir.join("selection.csv"),
        grid: dir.join("grid.csv"),
    };
    let create = |p: &Path| {
        File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
    };
    let relabel = |p: &Path| {
        let p = p.to_path_buf();
        move |e: Error| match e {
            Error::Csv { message, .. } => Error::Csv {
                path: p.clone(),
                message,
            },
            Error::Io { source, .. } => Error::Io {
                path: p.clone(),
                source,
            },
            other => other,
        }
    };
    write_metrics_csv(result, create(&files.metrics)?).map_err(relabel(&files.metrics))?;
    write_selection_csv(result, create(&files.selection)?).map_err(relabel(&files.selection))?;
    write_grid_csv(result, create(&files.grid)?).map_err(relabel(&files.grid))?;
    Ok(files)
}

/// Raw (unscaled) values of one metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub arm: String,
    pub used: usize,
    pub excluded: usize,
    pub isb: f64,
    pub v: f64,
    pub mise: f64,
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let path = Path::new("<metrics>");
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::Csv {
            path: path.into(),
            message: format!("unexpected metrics header {headers:?}"),
        });
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |what: &str| Error::Csv {
            path: path.into(),
            message: format!("row {}: cannot parse {what}", line + 2),
        };
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
        rows.push(MetricsRow {
            arm: rec[0].to_string(),
            used: rec[1].parse().map_err(|_| bad("used"))?,
            excluded: rec[2].parse().map_err(|_| bad("excluded"))?,
            isb: num(6, "ISB")?,
            v: num(7, "V")?,
            mise: num(8, "MISE")?,
        });
    }
    Ok(rows)
}
