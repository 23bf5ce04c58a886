//! Dataset, model and report files.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::matrix::DataMatrix;
use crate::reference::CcaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    MatrixMarket,
}

impl DataFormat {
    /// `.mtx` means Matrix Market, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => DataFormat::MatrixMarket,
            _ => DataFormat::Csv,
        }
    }
}

impl FromStr for DataFormat {
    type Err = CcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "mm" | "mtx" | "matrix-market" => Ok(DataFormat::MatrixMarket),
            other => Err(CcaError::Config(format!("unknown data format '{other}' (csv | matrix-market)"))),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Csv => "csv",
            DataFormat::MatrixMarket => "matrix-market",
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CcaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CcaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn parse_err(line: usize, message: impl Into<String>) -> CcaError {
    CcaError::Parse { line, message: message.into() }
}

fn parse_value(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| parse_err(line, format!("'{}' is not a number", field.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value '{}'", field.trim())));
    }
    Ok(v)
}

pub fn load_dataset(path: &Path, format: Option<DataFormat>) -> Result<DataMatrix> {
    let text = read(path)?;
    match format.unwrap_or_else(|| DataFormat::from_path(path)) {
        DataFormat::Csv => parse_csv(&text),
        DataFormat::MatrixMarket => parse_matrix_market(&text),
    }
}

/// Rows are samples. A first line with any non-numeric field is taken as a header.
pub fn parse_csv(text: &str) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows == 0 && width.is_none() && record.iter().any(|f| f.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(parse_err(line, format!("row has {} fields, expected {w}", record.len())));
            }
            _ => width = Some(record.len()),
        }
        for field in record.iter() {
            values.push(parse_value(field, line)?);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(CcaError::InvalidData("CSV input has no numeric rows".into()));
    }
    DataMatrix::from_row_slice(rows, cols, &values)
}

pub fn to_csv(x: &DataMatrix) -> String {
    let d = x.to_dense();
    let mut out = String::new();
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", d[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_market(text: &str) -> Result<DataMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = banner.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> general'"));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    if tokens[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry '{}'", tokens[4])));
    }
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line, size) = body.next().ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_line, format!("bad size field '{t}'"))))
        .collect::<Result<_>>()?;
    let &[rows, cols, nnz] = dims.as_slice() else {
        return Err(parse_err(size_line, "size line needs rows cols nnz"));
    };
    if rows == 0 || cols == 0 {
        return Err(CcaError::InvalidData(format!("matrix has a zero dimension ({rows}x{cols})")));
    }
    let mut triplets = Vec::with_capacity(nnz);
    for (line, entry) in body {
        let fields: Vec<&str> = entry.split_whitespace().collect();
        let want = if pattern { 2 } else { 3 };
        if fields.len() != want {
            return Err(parse_err(line, format!("entry has {} fields, expected {want}", fields.len())));
        }
        let index = |f: &str, bound: usize| -> Result<usize> {
            match f.parse::<usize>() {
                Ok(v) if v >= 1 && v <= bound => Ok(v - 1),
                _ => Err(parse_err(line, format!("index '{f}' outside 1..={bound}"))),
            }
        };
        let i = index(fields[0], rows)?;
        let j = index(fields[1], cols)?;
        let v = if pattern { 1.0 } else { parse_value(fields[2], line)? };
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(parse_err(size_line, format!("declared {nnz} entries, found {}", triplets.len())));
    }
    DataMatrix::sparse(rows, cols, &triplets)
}

pub fn to_matrix_market(x: &DataMatrix) -> String {
    let triplets: Vec<_> = match x {
        DataMatrix::Sparse(c) => c.triplets(),
        DataMatrix::Dense(d) => {
            let mut t = Vec::new();
            for i in 0..d.nrows() {
                for j in 0..d.ncols() {
                    if d[(i, j)] != 0.0 {
                        t.push((i, j, d[(i, j)]));
                    }
                }
            }
            t
        }
    };
    let mut out = format!("%%MatrixMarket matrix coordinate real general\n{} {} {}\n", x.nrows(), x.ncols(), triplets.len());
    for (i, j, v) in triplets {
        writeln!(out, "{} {} {}", i + 1, j + 1, v).unwrap();
    }
    out
}

pub fn save_dataset(path: &Path, x: &DataMatrix, format: Option<DataFormat>) -> Result<()> {
    let text = match format.unwrap_or_else(|| DataFormat::from_path(path)) {
        DataFormat::Csv => to_csv(x),
        DataFormat::MatrixMarket => to_matrix_market(x),
    };
    write(path, &text)
}

/// Dense text block: a `rows cols` line then one whitespace-separated row per line.
pub fn matrix_to_text(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn read_block<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<DMatrix<f64>> {
    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "missing matrix header"))?;
    let dims: Vec<usize> = header.split_whitespace().map(|t| t.parse().map_err(|_| parse_err(hline, "bad matrix header"))).collect::<Result<_>>()?;
    let &[rows, cols] = dims.as_slice() else {
        return Err(parse_err(hline, "matrix header needs 'rows cols'"));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (line, text) = lines.next().ok_or_else(|| parse_err(hline + r + 1, "matrix ended early"))?;
        let row: Vec<f64> = text.split_whitespace().map(|f| parse_value(f, line)).collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(parse_err(line, format!("row has {} values, expected {cols}", row.len())));
        }
        values.extend(row);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn matrix_from_text(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    read_block(&mut lines)
}

/// Model file: phi, psi and the correlation column as three consecutive text blocks.
pub fn model_to_text(model: &CcaModel) -> String {
    let lambda = DMatrix::from_column_slice(model.rank(), 1, model.correlations.as_slice());
    [matrix_to_text(&model.phi), matrix_to_text(&model.psi), matrix_to_text(&lambda)].concat()
}

pub fn model_from_text(text: &str) -> Result<CcaModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let phi = read_block(&mut lines)?;
    let psi = read_block(&mut lines)?;
    let lambda = read_block(&mut lines)?;
    if psi.ncols() != phi.ncols() || lambda.nrows() != phi.ncols() || lambda.ncols() != 1 {
        return Err(CcaError::Dimension("model blocks disagree on rank".into()));
    }
    Ok(CcaModel { phi, psi, correlations: DVector::from_column_slice(lambda.as_slice()), unwhitened: false })
}

pub fn save_model(path: &Path, model: &CcaModel) -> Result<()> {
    write(path, &model_to_text(model))
}

pub fn load_model(path: &Path) -> Result<CcaModel> {
    model_from_text(&read(path)?)
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}
