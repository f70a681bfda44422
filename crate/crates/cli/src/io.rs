//! CSV files: header row, UTF-8, '.' decimal separator, shortest
//! round-trip formatting for reals (Rust's `Display` for `f64`).

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use stgp_core::metrics::RocPoint;
use stgp_core::model::Dataset;
use stgp_core::spatial::SpatialDomain;

use crate::error::{io_err, CliError, Result};

/// Formats a real so that parsing it back gives the same bits.
pub fn fmt_real(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err("create directory", dir))?;
    }
    let f = File::create(path).map_err(io_err("create", path))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            action: "write",
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Parse {
            what: "csv",
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

/// Writes a header and rows of preformatted cells.
pub fn write_table<S: AsRef<str>>(
    path: &Path,
    header: &[S],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header.iter().map(|h| h.as_ref()))
        .map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err("write", path))
}

/// A parsed CSV: header names and numeric rows.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_numeric(path: &Path, what: &'static str) -> Result<NumericTable> {
    if !path.exists() {
        return Err(CliError::Missing(vec![path.to_path_buf()]));
    }
    let parse_err = |reason: String| CliError::Parse {
        what,
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    parse_err(format!(
                        "row {}, column `{}`: `{cell}` is not a number",
                        i + 1,
                        header[k]
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// Columns `s_1 .. s_d`, one row per location.
pub fn write_locations(path: &Path, domain: &SpatialDomain) -> Result<()> {
    let header: Vec<String> = (1..=domain.dim()).map(|k| format!("s_{k}")).collect();
    let rows = (0..domain.len()).map(|j| domain.location(j).iter().map(|&v| fmt_real(v)).collect());
    write_table(path, &header, rows)
}

pub fn read_locations(path: &Path) -> Result<SpatialDomain> {
    let t = read_numeric(path, "locations")?;
    let d = t.header.len();
    if d == 0 || t.rows.is_empty() {
        return Err(CliError::Parse {
            what: "locations",
            path: path.to_path_buf(),
            reason: "no coordinates".into(),
        });
    }
    let coords: Vec<f64> = t.rows.into_iter().flatten().collect();
    Ok(SpatialDomain::new(d, coords)?)
}

/// Columns `y, w_1 .. w_q, x_1 .. x_p`.
pub fn write_dataset(
    path: &Path,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<()> {
    let mut header = vec!["y".to_string()];
    header.extend((1..=w.ncols()).map(|k| format!("w_{k}")));
    header.extend((1..=x.ncols()).map(|j| format!("x_{j}")));
    let rows = (0..y.len()).map(|i| {
        let mut row = Vec::with_capacity(header.len());
        row.push(fmt_real(y[i]));
        row.extend(w.row(i).iter().map(|&v| fmt_real(v)));
        row.extend(x.row(i).iter().map(|&v| fmt_real(v)));
        row
    });
    write_table(path, &header, rows)
}

/// Reads a dataset CSV and binds it to `domain`; the number of `x_*`
/// columns must match the number of locations.
pub fn read_dataset(path: &Path, domain: Arc<SpatialDomain>) -> Result<Dataset> {
    let t = read_numeric(path, "dataset")?;
    let bad = |reason: String| CliError::Parse {
        what: "dataset",
        path: path.to_path_buf(),
        reason,
    };
    let y_col = t
        .header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| bad("no `y` column".into()))?;
    let w_cols: Vec<usize> = (0..t.header.len())
        .filter(|&k| t.header[k].starts_with("w_"))
        .collect();
    let x_cols: Vec<usize> = (0..t.header.len())
        .filter(|&k| t.header[k].starts_with("x_"))
        .collect();
    if let Some(k) =
        (0..t.header.len()).find(|&k| k != y_col && !w_cols.contains(&k) && !x_cols.contains(&k))
    {
        return Err(bad(format!("unexpected column `{}`", t.header[k])));
    }
    let n = t.rows.len();
    let y = DVector::from_iterator(n, t.rows.iter().map(|r| r[y_col]));
    let w = DMatrix::from_fn(n, w_cols.len(), |i, k| t.rows[i][w_cols[k]]);
    let x = DMatrix::from_fn(n, x_cols.len(), |i, j| t.rows[i][x_cols[j]]);
    Ok(Dataset::new(y, w, x, domain)?)
}

/// Columns `location, beta`.
pub fn write_coefficients(path: &Path, beta: &[f64]) -> Result<()> {
    let rows = beta
        .iter()
        .enumerate()
        .map(|(j, &b)| vec![(j + 1).to_string(), fmt_real(b)]);
    write_table(path, &["location", "beta"], rows)
}

pub fn read_coefficients(path: &Path) -> Result<Vec<f64>> {
    let t = read_numeric(path, "coefficients")?;
    t.column("beta").ok_or_else(|| CliError::Parse {
        what: "coefficients",
        path: path.to_path_buf(),
        reason: "no `beta` column".into(),
    })
}

/// Per-location posterior summary of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    /// Posterior mean on the original (raw data) scale.
    pub beta: Vec<f64>,
    /// Posterior mean on the normalized scale the chain ran on.
    pub beta_normalized: Vec<f64>,
    pub inclusion: Vec<f64>,
    pub intervals: Option<Vec<(f64, f64)>>,
}

pub fn write_summary(path: &Path, s: &FitSummary) -> Result<()> {
    let mut header = vec!["location", "beta", "beta_normalized", "inclusion"];
    if s.intervals.is_some() {
        header.extend(["ci_lower", "ci_upper"]);
    }
    let rows = (0..s.beta.len()).map(|j| {
        let mut row = vec![
            (j + 1).to_string(),
            fmt_real(s.beta[j]),
            fmt_real(s.beta_normalized[j]),
            fmt_real(s.inclusion[j]),
        ];
        if let Some(iv) = &s.intervals {
            row.push(fmt_real(iv[j].0));
            row.push(fmt_real(iv[j].1));
        }
        row
    });
    write_table(path, &header, rows)
}

pub fn read_summary(path: &Path) -> Result<FitSummary> {
    let t = read_numeric(path, "summary")?;
    let col = |name: &str| {
        t.column(name).ok_or_else(|| CliError::Parse {
            what: "summary",
            path: path.to_path_buf(),
            reason: format!("no `{name}` column"),
        })
    };
    let intervals = match (t.column("ci_lower"), t.column("ci_upper")) {
        (Some(lo), Some(hi)) => Some(lo.into_iter().zip(hi).collect()),
        _ => None,
    };
    Ok(FitSummary {
        beta: col("beta")?,
        beta_normalized: col("beta_normalized")?,
        inclusion: col("inclusion")?,
        intervals,
    })
}

/// Kept-draw traces of the scalar parameters.
pub fn write_traces(
    path: &Path,
    t: &stgp_core::mcmc::Traces,
    burn_in: usize,
    thin: usize,
) -> Result<()> {
    let q = t.alpha.first().map_or(0, Vec::len);
    let mut header: Vec<String> = [
        "iteration",
        "theta",
        "sigma_a",
        "lambda",
        "sigma2",
        "log_likelihood",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=q).map(|k| format!("alpha_{k}")));
    let rows = (0..t.len()).map(|i| {
        let mut row = vec![
            (burn_in + i * thin + 1).to_string(),
            fmt_real(t.theta[i]),
            fmt_real(t.sigma_a[i]),
            fmt_real(t.lambda[i]),
            fmt_real(t.sigma2[i]),
            fmt_real(t.log_likelihood[i]),
        ];
        row.extend(t.alpha[i].iter().map(|&a| fmt_real(a)));
        row
    });
    write_table(path, &header, rows)
}

/// Two columns `fpr, tpr`.
pub fn write_roc(path: &Path, points: &[RocPoint]) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| vec![fmt_real(p.fpr), fmt_real(p.tpr)]);
    write_table(path, &["fpr", "tpr"], rows)
}

pub fn require_all(paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.exists()).cloned().collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Missing(missing))
    }
}
