//! CSV import and export of matrices, strategies, data vectors and answers.
//!
//! Numbers are printed in the shortest decimal form that parses back to the
//! same `f64`, so export followed by import is exact. Lines starting with
//! `#` are comments. Files are written to a temporary sibling and renamed
//! into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::domain::{Buckets, CellConditions, DataVector, Value, Workload};
use crate::error::{Error, Result};
use crate::strategy::{Provenance, Strategy};

/// Shortest round-trip decimal representation (at most 17 significant digits).
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // Normalizes -0.
        return "0".into();
    }
    let plain = format!("{x}");
    let sci = format!("{x:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| format_f64(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    let t = field.trim();
    let x: f64 = t
        .parse()
        .map_err(|_| Error::parse(Some(line), format!("'{t}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::parse(Some(line), format!("'{t}' is not finite")));
    }
    Ok(x)
}

/// Parses a dense matrix. Blank lines and `#` comments are skipped.
pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|f| parse_number(f, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    Some(i + 1),
                    format!("expected {} values, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(None, "matrix file has no rows"));
    }
    let n = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), n, rows.into_iter().flatten()))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

/// Path of the row-description file that accompanies a workload CSV.
pub fn descriptions_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".rows");
    PathBuf::from(s)
}

/// Writes the matrix and, if present, one description per line next to it.
pub fn write_workload(path: &Path, w: &Workload) -> Result<()> {
    write_matrix(path, w.matrix())?;
    if let Some(rows) = w.descriptions() {
        let mut text = rows.join("\n");
        text.push('\n');
        write_atomic(&descriptions_path(path), text.as_bytes())?;
    }
    Ok(())
}

pub fn read_workload(path: &Path) -> Result<Workload> {
    let w = Workload::from_matrix(read_matrix(path)?)?;
    let side = descriptions_path(path);
    if side.exists() {
        let rows = fs::read_to_string(side)?.lines().map(str::to_owned).collect();
        return w.with_descriptions(rows);
    }
    Ok(w)
}

pub fn strategy_to_csv(a: &Strategy) -> String {
    format!("# {} {} {}\n{}", a.p(), a.n(), a.provenance(), matrix_to_csv(a.matrix()))
}

/// Parses a strategy; the `# p n provenance` header is checked when present.
pub fn strategy_from_csv(text: &str) -> Result<Strategy> {
    let m = matrix_from_csv(text)?;
    let header = text
        .lines()
        .enumerate()
        .find(|(_, l)| l.trim_start().starts_with('#'));
    let provenance = match header {
        Some((i, line)) => {
            let parts: Vec<&str> = line.trim_start()[1..].split_whitespace().collect();
            let [p, n, prov] = parts.as_slice() else {
                return Err(Error::parse(Some(i + 1), "strategy header must be '# p n provenance'"));
            };
            let p: usize = p
                .parse()
                .map_err(|_| Error::parse(Some(i + 1), format!("bad row count '{p}'")))?;
            let n: usize = n
                .parse()
                .map_err(|_| Error::parse(Some(i + 1), format!("bad column count '{n}'")))?;
            if (p, n) != m.shape() {
                return Err(Error::parse(
                    Some(i + 1),
                    format!("header says {p}x{n}, matrix is {}x{}", m.nrows(), m.ncols()),
                ));
            }
            prov.parse()
                .map_err(|e: Error| Error::parse(Some(i + 1), e.to_string()))?
        }
        None => Provenance::Workload,
    };
    Strategy::new(m, provenance)
}

pub fn write_strategy(path: &Path, a: &Strategy) -> Result<()> {
    write_atomic(path, strategy_to_csv(a).as_bytes())
}

pub fn read_strategy(path: &Path) -> Result<Strategy> {
    strategy_from_csv(&fs::read_to_string(path)?)
}

/// One count per line.
pub fn data_vector_to_csv(x: &DataVector) -> String {
    x.counts().iter().map(|c| format!("{c}\n")).collect()
}

pub fn data_vector_from_csv(text: &str) -> Result<DataVector> {
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        counts.push(
            t.parse::<u64>()
                .map_err(|_| Error::parse(Some(i + 1), format!("'{t}' is not a non-negative count")))?,
        );
    }
    Ok(DataVector::new(counts))
}

pub fn write_data_vector(path: &Path, x: &DataVector) -> Result<()> {
    write_atomic(path, data_vector_to_csv(x).as_bytes())
}

pub fn read_data_vector(path: &Path) -> Result<DataVector> {
    data_vector_from_csv(&fs::read_to_string(path)?)
}

/// `query,truth,estimate`; the truth column is left empty when unknown.
pub fn answers_to_csv(estimates: &DVector<f64>, truth: Option<&DVector<f64>>) -> String {
    let mut s = String::from("query,truth,estimate\n");
    for (i, e) in estimates.iter().enumerate() {
        let t = truth.map(|t| format_f64(t[i])).unwrap_or_default();
        s.push_str(&format!("{i},{t},{}\n", format_f64(*e)));
    }
    s
}

/// Reads records whose header names the attributes of `cc` (in any order;
/// extra columns are ignored). Values of numeric attributes must parse as
/// numbers.
pub fn read_records<R: std::io::Read>(reader: R, cc: &CellConditions) -> Result<Vec<Vec<Value>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = Vec::new();
    for a in cc.attributes() {
        let col = headers.iter().position(|h| h == a.name).ok_or_else(|| {
            Error::parse(Some(1), format!("header has no column for attribute '{}'", a.name))
        })?;
        columns.push(col);
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        let mut values = Vec::with_capacity(columns.len());
        for (a, &col) in cc.attributes().iter().zip(&columns) {
            let field = rec
                .get(col)
                .ok_or_else(|| Error::parse(Some(line), format!("row {} is missing '{}'", k + 1, a.name)))?;
            values.push(match a.buckets {
                Buckets::Numeric(_) => Value::Number(field.parse().map_err(|_| {
                    Error::parse(
                        Some(line),
                        format!("row {}: '{field}' is not a number for '{}'", k + 1, a.name),
                    )
                })?),
                Buckets::Categorical(_) => Value::Text(field.to_owned()),
            });
        }
        out.push(values);
    }
    Ok(out)
}
