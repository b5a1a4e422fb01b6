//! CSV input and the sparse output formats.
//!
//! Path files hold `lambda_index,lambda,coef_index,value` rows after `#` metadata lines.
//! Indices are 1-based, `coef_index = 0` is the intercept (always written), and zero
//! slopes are omitted. Precision files hold `lambda_index,row,col,value` for the upper
//! triangle with the grid in `# lambda_<k>=` lines. Values are printed with 17
//! significant digits.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::DesignData;
use crate::path::{LambdaGrid, SolutionPath};
use crate::sparse::{SparseVector, SymmetricTriplets};

/// Fields read as missing values.
pub const MISSING_TOKENS: [&str; 4] = ["", "NA", "NaN", "nan"];

/// A numeric table with optional column names and a missing-value mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: DMatrix<f64>,
    pub missing: DMatrix<bool>,
}

/// Which column of a table holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Last,
    /// 0-based.
    Index(usize),
    Name(String),
}

fn is_missing(field: &str) -> bool {
    MISSING_TOKENS.contains(&field.trim())
}

/// Reads comma-separated numbers; the first row is a header when any of its fields is
/// neither numeric nor a missing token.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::Parse("input has no rows".into()));
    }
    let header = rows[0]
        .iter()
        .any(|f| !is_missing(f) && f.parse::<f64>().is_err());
    let names = if header {
        Some(rows.remove(0).iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let n = rows.len();
    let d = names.as_ref().map_or_else(|| rows.first().map_or(0, |r| r.len()), |h| h.len());
    if n == 0 || d == 0 {
        return Err(Error::Parse("input has no data rows".into()));
    }
    let mut values = DMatrix::zeros(n, d);
    let mut missing = DMatrix::from_element(n, d, false);
    for (i, rec) in rows.iter().enumerate() {
        if rec.len() != d {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {d}",
                i + 1 + usize::from(header),
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            if is_missing(field) {
                missing[(i, j)] = true;
            } else {
                values[(i, j)] = field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}, column {}: '{field}' is not a number", i + 1, j + 1))
                })?;
            }
        }
    }
    Ok(Table {
        names,
        values,
        missing,
    })
}

pub fn read_table_path(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table(BufReader::new(file))
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    fn resolve(&self, column: &ResponseColumn) -> Result<usize> {
        let d = self.ncols();
        match column {
            ResponseColumn::Last => Ok(d - 1),
            ResponseColumn::Index(j) if *j < d => Ok(*j),
            ResponseColumn::Index(j) => Err(Error::Dimension(format!(
                "response column {} out of range (table has {d})",
                j + 1
            ))),
            ResponseColumn::Name(name) => self
                .names
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::Parse(format!("no column named '{name}'"))),
        }
    }

    /// Splits off the response column and builds the design.
    pub fn into_regression(self, response: &ResponseColumn) -> Result<DesignData> {
        if self.ncols() < 2 {
            return Err(Error::Dimension("need a response and at least one predictor".into()));
        }
        let j = self.resolve(response)?;
        let keep: Vec<usize> = (0..self.ncols()).filter(|&k| k != j).collect();
        let x = self.values.select_columns(&keep);
        let mask = self.missing.select_columns(&keep);
        let y: Vec<f64> = self.values.column(j).iter().copied().collect();
        let y_mask: Vec<bool> = self.missing.column(j).iter().copied().collect();
        DesignData::with_missing(x, mask, Some(y), Some(y_mask))
    }

    /// Every column is a variable.
    pub fn into_design(self) -> Result<DesignData> {
        DesignData::with_missing(self.values, self.missing, None, None)
    }
}

/// Writes a table with a header, 17 significant digits per value.
pub fn write_table<W: Write>(out: W, names: &[String], values: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names)?;
    for i in 0..values.nrows() {
        w.write_record(values.row(i).iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn write_metadata<W: Write>(out: &mut W, metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

pub fn write_path<W: Write>(mut out: W, metadata: &[(String, String)], path: &SolutionPath) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    writeln!(out, "lambda_index,lambda,coef_index,value")?;
    for (k, coef) in path.coefficients.iter().enumerate() {
        let lambda = path.grid.values()[k];
        writeln!(out, "{},{lambda:.16e},0,{:.16e}", k + 1, path.intercepts[k])?;
        for (j, v) in coef.iter() {
            writeln!(out, "{},{lambda:.16e},{},{v:.16e}", k + 1, j + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A path as read back from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub metadata: BTreeMap<String, String>,
    pub lambdas: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<SparseVector>,
}

fn split_metadata<R: Read>(reader: R) -> Result<(BTreeMap<String, String>, Vec<String>)> {
    let mut metadata = BTreeMap::new();
    let mut body = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            body.push(line);
        }
    }
    Ok((metadata, body))
}

fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[&str; N]> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    fields
        .try_into()
        .map_err(|_| Error::Parse(format!("line {lineno}: expected {N} fields")))
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {lineno}: cannot parse '{s}'")))
}

/// Reads a path file; `dim` is the number of predictors.
pub fn read_path<R: Read>(reader: R, dim: usize) -> Result<PathRecord> {
    let (metadata, body) = split_metadata(reader)?;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut intercepts: Vec<f64> = Vec::new();
    let mut pairs: Vec<Vec<(usize, f64)>> = Vec::new();
    for (lineno, line) in body.iter().enumerate().skip(1) {
        let [k, lambda, j, v] = parse_fields::<4>(line, lineno + 1)?;
        let k: usize = parse_num(k, lineno + 1)?;
        let j: usize = parse_num(j, lineno + 1)?;
        let lambda: f64 = parse_num(lambda, lineno + 1)?;
        let v: f64 = parse_num(v, lineno + 1)?;
        if k == 0 || k > lambdas.len() + 1 {
            return Err(Error::Parse(format!("line {}: lambda_index out of order", lineno + 1)));
        }
        if k == lambdas.len() + 1 {
            lambdas.push(lambda);
            intercepts.push(0.0);
            pairs.push(Vec::new());
        }
        if j == 0 {
            intercepts[k - 1] = v;
        } else {
            pairs[k - 1].push((j - 1, v));
        }
    }
    let coefficients = pairs
        .into_iter()
        .map(|p| {
            SparseVector::from_pairs(dim, p)
                .ok_or_else(|| Error::Parse("coefficient index repeated or out of range".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathRecord {
        metadata,
        lambdas,
        intercepts,
        coefficients,
    })
}

pub fn write_precision<W: Write>(
    mut out: W,
    metadata: &[(String, String)],
    grid: &LambdaGrid,
    matrices: &[SymmetricTriplets],
) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    for (k, lambda) in grid.values().iter().enumerate() {
        writeln!(out, "# lambda_{}={lambda:.16e}", k + 1)?;
    }
    writeln!(out, "lambda_index,row,col,value")?;
    for (k, m) in matrices.iter().enumerate() {
        for &(i, j, v) in m.entries() {
            writeln!(out, "{},{},{},{v:.16e}", k + 1, i + 1, j + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A precision file as read back: the grid and one matrix per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRecord {
    pub metadata: BTreeMap<String, String>,
    pub lambdas: Vec<f64>,
    pub matrices: Vec<SymmetricTriplets>,
}

pub fn read_precision<R: Read>(reader: R, dim: usize) -> Result<PrecisionRecord> {
    let (metadata, body) = split_metadata(reader)?;
    let mut lambdas = Vec::new();
    for k in 1.. {
        match metadata.get(&format!("lambda_{k}")) {
            Some(v) => lambdas.push(parse_num::<f64>(v, 0)?),
            None => break,
        }
    }
    let mut entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); lambdas.len()];
    for (lineno, line) in body.iter().enumerate().skip(1) {
        let [k, i, j, v] = parse_fields::<4>(line, lineno + 1)?;
        let k: usize = parse_num(k, lineno + 1)?;
        let i: usize = parse_num(i, lineno + 1)?;
        let j: usize = parse_num(j, lineno + 1)?;
        let v: f64 = parse_num(v, lineno + 1)?;
        if k == 0 || k > lambdas.len() || i == 0 || j == 0 || i > dim || j > dim || i > j {
            return Err(Error::Parse(format!("line {}: index out of range", lineno + 1)));
        }
        entries[k - 1].push((i - 1, j - 1, v));
    }
    let metadata_out = metadata
        .into_iter()
        .filter(|(k, _)| !k.starts_with("lambda_"))
        .collect();
    Ok(PrecisionRecord {
        metadata: metadata_out,
        lambdas,
        matrices: entries
            .into_iter()
            .map(|e| SymmetricTriplets::from_upper(dim, e))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_regression, fit_tiger, GridOptions, PrecisionOptions, RegressionOptions};
    use crate::model::Method;
    use crate::simulate::{gen_precision, gen_regression, Ar1Design};

    #[test]
    fn header_and_missing_tokens() {
        let text = "a,b,y\n1,2,3\nNA,,4.5\n# comment\n-1,0.5,NaN\n";
        let t = read_table(text.as_bytes()).unwrap();
        assert_eq!(t.names.as_deref().unwrap(), ["a", "b", "y"]);
        assert_eq!(t.values.shape(), (3, 3));
        assert!(t.missing[(1, 0)] && t.missing[(1, 1)] && t.missing[(2, 2)]);
        assert!(!t.missing[(0, 0)]);
        assert_eq!(t.values[(2, 1)], 0.5);
    }

    #[test]
    fn headerless_input_and_ragged_rows() {
        let t = read_table("1,2\n3,4\n".as_bytes()).unwrap();
        assert!(t.names.is_none());
        assert_eq!(t.values[(1, 0)], 3.0);
        assert!(matches!(read_table("1,2\n3\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_table("x,y\n1,abc\n".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn response_selection() {
        let t = read_table("a,y,b\n1,10,2\n3,20,5\n4,30,1\n".as_bytes()).unwrap();
        let data = t.clone().into_regression(&ResponseColumn::Name("y".into())).unwrap();
        assert_eq!(data.y().unwrap(), &[10.0, 20.0, 30.0]);
        assert_eq!(data.x()[(1, 1)], 5.0);
        let last = t.clone().into_regression(&ResponseColumn::Last).unwrap();
        assert_eq!(last.y().unwrap(), &[2.0, 5.0, 1.0]);
        assert!(t.into_regression(&ResponseColumn::Index(7)).is_err());
    }

    #[test]
    fn path_round_trip_is_exact() {
        let data = gen_regression(&Ar1Design::new(40, 15, 0.5, 1)).unwrap();
        let opts = RegressionOptions {
            grid: GridOptions::with_nlambda(6),
            ..RegressionOptions::default()
        };
        let fit = fit_regression(&data, Method::SQRT, &opts).unwrap();
        let meta = vec![("method".to_string(), "sqrt".to_string())];
        let mut buf = Vec::new();
        write_path(&mut buf, &meta, &fit.path).unwrap();
        let back = read_path(buf.as_slice(), 15).unwrap();
        assert_eq!(back.metadata["method"], "sqrt");
        assert_eq!(back.lambdas, fit.path.grid.values());
        assert_eq!(back.intercepts, fit.path.intercepts);
        assert_eq!(back.coefficients, fit.path.coefficients);
        // the λ_max block holds only the intercept
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("1,")).count(), 1);
    }

    #[test]
    fn precision_round_trip_is_exact() {
        let (data, _) = gen_precision(&Ar1Design::new(60, 5, 0.5, 2)).unwrap();
        let fit = fit_tiger(&data, &PrecisionOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_precision(&mut buf, &[], &fit.grid, &fit.matrices).unwrap();
        let back = read_precision(buf.as_slice(), 5).unwrap();
        assert_eq!(back.lambdas, fit.grid.values());
        assert_eq!(back.matrices, fit.matrices);
    }
}
