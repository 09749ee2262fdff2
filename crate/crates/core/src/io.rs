//! Matrix files: comma-separated text and the little-endian `dbin` binary layout.
//!
//! `dbin` layout: magic `DBAL`, `u32` version (1), `u64` rows, `u64` cols,
//! then `rows * cols` binary64 values, row-major, all little-endian.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::points::{LabeledPool, PointSet};

pub const DBIN_MAGIC: &[u8; 4] = b"DBAL";
pub const DBIN_VERSION: u32 = 1;
const DBIN_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Dbin,
}

impl MatrixFormat {
    /// `.dbin` files are binary; everything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("dbin") => MatrixFormat::Dbin,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "dbin" => Ok(MatrixFormat::Dbin),
            other => Err(Error::invalid(format!("unknown matrix format `{other}`"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        col,
        message: message.into(),
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<PointSet> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_csv(&text, path)
        }
        MatrixFormat::Dbin => {
            let bytes = fs::read(path).map_err(io_err(path))?;
            parse_dbin(&bytes, path)
        }
    }
}

/// Loads a matrix and splits column `label_col` off as labels.
pub fn load_labeled(
    path: impl AsRef<Path>,
    format: MatrixFormat,
    label_col: usize,
) -> Result<LabeledPool> {
    let m = load_matrix(path, format)?;
    if label_col >= m.dim() {
        return Err(Error::invalid(format!(
            "label column {label_col} out of range for {} columns",
            m.dim()
        )));
    }
    let labels = m.column(label_col);
    LabeledPool::new(m.drop_column(label_col)?, labels)
}

/// Loads a single-column matrix as a vector.
pub fn load_vector(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let m = load_matrix(path, format)?;
    if m.dim() != 1 {
        return Err(parse_err(
            path,
            1,
            2,
            format!("expected a single column, found {}", m.dim()),
        ));
    }
    Ok(m.into_vec())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &PointSet, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Csv => to_csv(m).into_bytes(),
        MatrixFormat::Dbin => to_dbin(m),
    };
    fs::write(path, bytes).map_err(io_err(path))
}

/// CSV text with one row per line. `{}` on `f64` prints the shortest string
/// that parses back to the same bits, so the text round-trips exactly.
pub fn to_csv(m: &PointSet) -> String {
    let mut out = String::with_capacity(m.as_slice().len() * 12);
    for r in m.rows() {
        for (j, v) in r.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn to_dbin(m: &PointSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(DBIN_HEADER_LEN + m.as_slice().len() * 8);
    out.extend_from_slice(DBIN_MAGIC);
    out.extend_from_slice(&DBIN_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.len() as u64).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_csv(text: &str, path: &Path) -> Result<PointSet> {
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();

    let Some(&(_, first)) = lines.peek() else {
        return Err(parse_err(path, 1, 1, "file holds no rows"));
    };
    let width = first.split(',').count();
    let is_header = first.split(',').any(|c| c.trim().parse::<f64>().is_err());
    if is_header {
        lines.next();
    }

    let mut data = Vec::new();
    for (no, line) in lines {
        let line_no = no + 1;
        let mut cols = 0;
        for (j, cell) in line.split(',').enumerate() {
            cols += 1;
            if j >= width {
                continue;
            }
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(path, line_no, j + 1, format!("`{cell}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no, j + 1, "non-finite value"));
            }
            data.push(v);
        }
        if cols != width {
            return Err(parse_err(
                path,
                line_no,
                cols.min(width) + 1,
                format!("expected {width} columns, found {cols}"),
            ));
        }
    }
    PointSet::new(data, width)
}

pub fn parse_dbin(bytes: &[u8], path: &Path) -> Result<PointSet> {
    if bytes.len() < DBIN_HEADER_LEN {
        return Err(parse_err(path, 0, 0, "truncated dbin header"));
    }
    if &bytes[0..4] != DBIN_MAGIC {
        return Err(parse_err(path, 0, 0, "bad magic, expected `DBAL`"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != DBIN_VERSION {
        return Err(parse_err(path, 0, 0, format!("unsupported dbin version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    if cols == 0 {
        return Err(parse_err(path, 0, 0, "dbin matrix with zero columns"));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| parse_err(path, 0, 0, "dbin dimensions overflow"))?;
    let body = &bytes[DBIN_HEADER_LEN..];
    if body.len() != expected {
        return Err(parse_err(
            path,
            0,
            0,
            format!("dbin body holds {} bytes, header implies {expected}", body.len()),
        ));
    }
    let cols = cols as usize;
    let mut data = Vec::with_capacity(expected / 8);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(parse_err(path, k / cols + 1, k % cols + 1, "non-finite value"));
        }
        data.push(v);
    }
    PointSet::new(data, cols)
}
