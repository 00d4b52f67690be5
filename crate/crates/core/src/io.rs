//! File formats: tomogram, optical, kernel and Green-function CSV files,
//! density-matrix CSV pairs, and JSON metadata sidecars.
//!
//! Floats are written with 17 significant digits, so a write/read cycle is
//! lossless. Every file is written to a temporary sibling and renamed into
//! place.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::UniformGrid;
use crate::propagator::KernelFourierQuery;
use crate::states::DensityMatrix;
use crate::tomography::{Discrepancy, OpticalTomogram, ThetaGrid, Tomogram, NEGATIVE_TOLERANCE};

/// Version of the sign and normalization conventions in `docs/conventions.md`.
pub const CONVENTION_VERSION: &str = "1.0";

/// Columns that label sample points rather than carry values.
const COORDINATE_COLUMNS: &[&str] = &[
    "X", "theta", "phi", "x", "y", "t", "k", "mu", "nu", "mu_p", "nu_p", "eps",
];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Encoding of tabular output files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Header row followed by comma-separated rows.
    #[default]
    Csv,
    /// `{"columns": [...], "rows": [[...], ...]}`.
    Json,
}

impl OutputFormat {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

fn write_table(path: &Path, format: OutputFormat, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                let cells: Vec<String> = row.into_iter().map(fmt).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        OutputFormat::Json => {
            let rows: Vec<Vec<f64>> = rows.collect();
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(path.display().to_string()));
            }
            out = serde_json::to_string(&json!({ "columns": header, "rows": rows }))?;
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

/// `<path>` with its extension replaced by `meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Metadata object: `kind`, `convention_version`, `generator`, and the
/// caller's resolved configuration under `config`.
pub fn metadata(kind: &str, config: &impl Serialize, extra: Value) -> Result<Value> {
    Ok(json!({
        "kind": kind,
        "convention_version": CONVENTION_VERSION,
        "generator": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "config": serde_json::to_value(config)?,
        "report": extra,
    }))
}

pub fn write_metadata(data_path: &Path, meta: &Value) -> Result<PathBuf> {
    let path = metadata_path(data_path);
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Tomogram lattice values as `X,theta,w`, θ outer and `X` inner. Negative
/// values above `-1e-10` are written as zero.
pub fn write_tomogram_csv(path: &Path, w: &Tomogram) -> Result<()> {
    write_tomogram(path, w, OutputFormat::Csv)
}

pub fn write_tomogram(path: &Path, w: &Tomogram, format: OutputFormat) -> Result<()> {
    let xs = w.x_grid().points();
    let thetas = w.theta_grid().points();
    let values = w.lattice_values();
    let nx = xs.len();
    let rows = values.into_iter().enumerate().map(|(k, v)| {
        let v = if v < 0.0 && v > -NEGATIVE_TOLERANCE { 0.0 } else { v };
        vec![xs[k % nx], thetas[k / nx], v]
    });
    write_table(path, format, &["X", "theta", "w"], rows)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_number(cell: &str, line: usize) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("line {line}: '{cell}' is not a number")))
}

#[derive(Deserialize)]
struct JsonTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Reads a table written in either [`OutputFormat`]. In CSV files a first row
/// that does not parse as numbers is a header.
fn read_table(path: &Path) -> Result<Table> {
    let table = match OutputFormat::from_path(path) {
        OutputFormat::Json => {
            let t: JsonTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            Table {
                header: t.columns,
                rows: t.rows,
            }
        }
        OutputFormat::Csv => read_csv_table(path)?,
    };
    if table.rows.is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    let width = table.rows[0].len();
    if table.rows.iter().any(|r| r.len() != width) || (!table.header.is_empty() && table.header.len() != width) {
        return Err(Error::Format(format!("{}: ragged rows", path.display())));
    }
    Ok(table)
}

fn read_csv_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if line == 0 && record.iter().any(|c| c.trim().parse::<f64>().is_err()) {
            header = record.iter().map(|c| c.trim().to_string()).collect();
            continue;
        }
        let row = record
            .iter()
            .map(|c| parse_number(c, line + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Reads a file written by [`write_tomogram`] in either format, recovering
/// both grids.
pub fn read_tomogram(path: &Path) -> Result<Tomogram> {
    let table = read_table(path)?;
    if table.header != ["X", "theta", "w"] {
        return Err(Error::Format(format!("{}: expected header X,theta,w", path.display())));
    }
    let rows = &table.rows;
    let first_theta = rows[0][1];
    let nx = rows.iter().take_while(|r| r[1] == first_theta).count();
    if nx < 2 || rows.len() % nx != 0 {
        return Err(Error::Format(format!("{}: rows do not form a lattice", path.display())));
    }
    let x_grid = UniformGrid::new(rows[0][0], rows[nx - 1][0], nx)?;
    let theta = ThetaGrid::new(rows.len() / nx)?;
    for (k, r) in rows.iter().enumerate() {
        let (i, j) = (k % nx, k / nx);
        if !close(r[0], x_grid.point(i)) || !close(r[1], theta.point(j)) {
            return Err(Error::Format(format!(
                "{}: row {} is off the lattice (expected X = {}, theta = {})",
                path.display(),
                k + 2,
                x_grid.point(i),
                theta.point(j)
            )));
        }
    }
    if !close(theta.point(1) * theta.len() as f64, PI) {
        return Err(Error::Format("theta grid does not cover [0, pi)".into()));
    }
    Tomogram::from_samples(x_grid, theta, rows.iter().map(|r| r[2]).collect())
}

/// Optical tomogram as `X,phi,w`, φ outer.
pub fn write_optical_csv(path: &Path, w: &OpticalTomogram) -> Result<()> {
    write_optical(path, w, OutputFormat::Csv)
}

pub fn write_optical(path: &Path, w: &OpticalTomogram, format: OutputFormat) -> Result<()> {
    let xs = w.x_grid.points();
    let nx = xs.len();
    let rows = w
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| vec![xs[k % nx], w.phis[k / nx], v]);
    write_table(path, format, &["X", "phi", "w"], rows)
}

/// Kernel scan as `k,mu,nu,mu_p,nu_p,t,eps,re,im`.
pub fn write_kernel_csv(path: &Path, rows: &[(KernelFourierQuery, num_complex::Complex64)]) -> Result<()> {
    write_kernel(path, rows, OutputFormat::Csv)
}

pub fn write_kernel(
    path: &Path,
    rows: &[(KernelFourierQuery, num_complex::Complex64)],
    format: OutputFormat,
) -> Result<()> {
    let rows = rows
        .iter()
        .map(|(q, v)| vec![q.k, q.mu, q.nu, q.mu_p, q.nu_p, q.t, q.eps, v.re, v.im]);
    write_table(
        path,
        format,
        &["k", "mu", "nu", "mu_p", "nu_p", "t", "eps", "re", "im"],
        rows,
    )
}

/// Green-function samples as `x,y,t,re,im`.
pub fn write_green_csv(path: &Path, rows: &[(f64, f64, f64, num_complex::Complex64)]) -> Result<()> {
    write_green(path, rows, OutputFormat::Csv)
}

pub fn write_green(path: &Path, rows: &[(f64, f64, f64, num_complex::Complex64)], format: OutputFormat) -> Result<()> {
    let rows = rows.iter().map(|&(x, y, t, g)| vec![x, y, t, g.re, g.im]);
    write_table(path, format, &["x", "y", "t", "re", "im"], rows)
}

/// Paths of the real and imaginary parts of a density matrix written to `path`.
pub fn density_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("density");
    let dir = path.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}_re.csv")), dir.join(format!("{stem}_im.csv")))
}

/// Writes `Re ρ` and `Im ρ` as headerless square matrices, row `i` for `x_i`.
pub fn write_density_csv(path: &Path, rho: &DensityMatrix) -> Result<(PathBuf, PathBuf)> {
    let (re_path, im_path) = density_paths(path);
    for (p, part) in [(&re_path, 0), (&im_path, 1)] {
        let mut out = String::new();
        for row in rho.values().rows() {
            let cells: Vec<String> = row.iter().map(|z| fmt(if part == 0 { z.re } else { z.im })).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        write_atomic(p, out.as_bytes())?;
    }
    Ok((re_path, im_path))
}

/// Density matrix as one JSON object with the position grid and the real
/// and imaginary parts as row-major nested arrays.
pub fn write_density_json(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let part = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
        rho.values()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(f).collect())
            .collect()
    };
    let (re, im) = (part(|z| z.re), part(|z| z.im));
    if re.iter().chain(&im).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(path.display().to_string()));
    }
    let mut text = serde_json::to_string(&json!({ "x": rho.grid().points(), "re": re, "im": im }))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Compares two table files (CSV or JSON) of the same layout. Coordinate columns must agree;
/// the report covers all value columns (`l2` is the root mean square).
pub fn compare_csv_files(a: &Path, b: &Path) -> Result<Discrepancy> {
    let ta = read_table(a)?;
    let tb = read_table(b)?;
    if ta.header != tb.header || ta.rows.len() != tb.rows.len() || ta.rows[0].len() != tb.rows[0].len() {
        return Err(Error::InvalidInput(format!(
            "{} and {} have different layouts",
            a.display(),
            b.display()
        )));
    }
    let is_coord: Vec<bool> = (0..ta.rows[0].len())
        .map(|c| {
            ta.header
                .get(c)
                .is_some_and(|h| COORDINATE_COLUMNS.contains(&h.as_str()))
        })
        .collect();
    let mut linf = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (line, (ra, rb)) in ta.rows.iter().zip(&tb.rows).enumerate() {
        for (c, (&u, &v)) in ra.iter().zip(rb).enumerate() {
            if is_coord[c] {
                if !close(u, v) {
                    return Err(Error::InvalidInput(format!(
                        "sample points differ at data row {} column {}",
                        line + 1,
                        ta.header[c]
                    )));
                }
                continue;
            }
            let d = (u - v).abs();
            linf = linf.max(d);
            sq += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput("no value columns to compare".into()));
    }
    Ok(Discrepancy {
        linf,
        l2: (sq / count as f64).sqrt(),
    })
}
