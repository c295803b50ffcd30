//! Versioned columnar text files for spectra and paths.
//!
//! Every file starts with a `# areatilt-<kind> v<version>` line, followed by
//! `# key = value` header lines, one CSV header row and numeric rows. Numbers
//! are written in shortest round-trip form, so reading a file back recovers
//! the exact values.

use std::fmt::Write as _;
use std::path::Path;

use crate::chain::LatticePath;
use crate::continuum::SturmLiouvilleSpectrum;
use crate::error::{Error, Result};
use crate::harness::report::fmt_num;
use crate::spectral::TransferSpectrum;

pub const FORMAT_VERSION: u32 = 1;

/// A parsed columnar file before interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarFile {
    pub kind: String,
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ColumnarFile {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.into(),
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.header.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("{} file: missing header `{key}`", self.kind)))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        parse_num(self.get(key)?, key)
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("header `{key}`: `{v}` is not a nonnegative integer")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("{} file: missing column `{name}`", self.kind)))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = format!("# areatilt-{} v{FORMAT_VERSION}\n", self.kind);
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, expected_kind: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("empty file".into()))?;
        let rest = first
            .strip_prefix("# areatilt-")
            .ok_or_else(|| Error::Format(format!("line 1: expected `# areatilt-<kind> v<n>`, got `{first}`")))?;
        let (kind, version) = rest
            .rsplit_once(" v")
            .ok_or_else(|| Error::Format(format!("line 1: missing version in `{first}`")))?;
        if kind != expected_kind {
            return Err(Error::Format(format!("expected a {expected_kind} file, found {kind}")));
        }
        if version.parse::<u32>().ok() != Some(FORMAT_VERSION) {
            return Err(Error::Format(format!("unsupported {kind} format version `{version}`")));
        }
        let mut file = ColumnarFile::new(kind, &[]);
        let mut columns = None;
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix("# ") {
                let (k, v) = h
                    .split_once(" = ")
                    .ok_or_else(|| Error::Format(format!("line {lineno}: malformed header `{line}`")))?;
                file.header.push((k.to_string(), v.to_string()));
                continue;
            }
            match columns {
                None => columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>()),
                Some(ref cols) => {
                    let row = line
                        .split(',')
                        .map(|c| parse_num(c, &format!("line {lineno}")))
                        .collect::<Result<Vec<f64>>>()?;
                    if row.len() != cols.len() {
                        return Err(Error::Format(format!(
                            "line {lineno}: {} fields, expected {}",
                            row.len(),
                            cols.len()
                        )));
                    }
                    file.rows.push(row);
                }
            }
        }
        file.columns = columns.ok_or_else(|| Error::Format("missing column header".into()))?;
        Ok(file)
    }
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("{what}: `{s}` is not a number")))
}

fn join_nums(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

fn split_nums(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|t| parse_num(t, what)).collect()
}

/// Lattice Perron data as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub lambda: f64,
    pub big_h: f64,
    pub eigenvalue: f64,
    pub e: f64,
    pub c: f64,
    pub right_residual: f64,
    pub left_residual: f64,
    pub phi: Vec<f64>,
    pub phi_star: Vec<f64>,
}

impl SpectrumRecord {
    pub fn size(&self) -> usize {
        self.phi.len()
    }
}

impl From<&TransferSpectrum> for SpectrumRecord {
    fn from(s: &TransferSpectrum) -> Self {
        Self {
            lambda: s.scale().lambda,
            big_h: s.scale().big_h,
            eigenvalue: s.eigenvalue,
            e: s.e,
            c: s.c,
            right_residual: s.right_residual,
            left_residual: s.left_residual,
            phi: s.phi.clone(),
            phi_star: s.phi_star.clone(),
        }
    }
}

pub fn spectrum_to_string(s: &SpectrumRecord) -> String {
    let mut f = ColumnarFile::new("spectrum", &["x", "phi", "phi_star"]);
    f.set("lambda", fmt_num(s.lambda));
    f.set("H", fmt_num(s.big_h));
    f.set("E", fmt_num(s.eigenvalue));
    f.set("e", fmt_num(s.e));
    f.set("c", fmt_num(s.c));
    f.set("M", s.size().to_string());
    f.set("right_residual", fmt_num(s.right_residual));
    f.set("left_residual", fmt_num(s.left_residual));
    for (i, (p, q)) in s.phi.iter().zip(&s.phi_star).enumerate() {
        f.rows.push(vec![(i + 1) as f64, *p, *q]);
    }
    f.render()
}

pub fn spectrum_from_str(text: &str) -> Result<SpectrumRecord> {
    let f = ColumnarFile::parse(text, "spectrum")?;
    let record = SpectrumRecord {
        lambda: f.get_f64("lambda")?,
        big_h: f.get_f64("H")?,
        eigenvalue: f.get_f64("E")?,
        e: f.get_f64("e")?,
        c: f.get_f64("c")?,
        right_residual: f.get_f64("right_residual")?,
        left_residual: f.get_f64("left_residual")?,
        phi: f.column("phi")?,
        phi_star: f.column("phi_star")?,
    };
    if record.size() != f.get_usize("M")? {
        return Err(Error::Format("spectrum file: row count differs from M".into()));
    }
    Ok(record)
}

/// A lattice path with the parameters it was sampled at.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub lambda: f64,
    pub big_h: f64,
    pub seed: u64,
    pub path: LatticePath,
}

pub fn path_to_string(p: &PathRecord) -> String {
    let mut f = ColumnarFile::new("path", &["time_index", "value"]);
    f.set("lambda", fmt_num(p.lambda));
    f.set("H", fmt_num(p.big_h));
    f.set("seed", p.seed.to_string());
    for (k, v) in p.path.values.iter().enumerate() {
        f.rows.push(vec![(p.path.start_index + k as i64) as f64, *v as f64]);
    }
    f.render()
}

pub fn path_from_str(text: &str) -> Result<PathRecord> {
    let f = ColumnarFile::parse(text, "path")?;
    let seed = f
        .get("seed")?
        .parse()
        .map_err(|_| Error::Format("path file: bad seed".into()))?;
    let times = f.column("time_index")?;
    let values = f.column("value")?;
    let start_index = times.first().map_or(0, |t| *t as i64);
    if times.iter().enumerate().any(|(k, t)| *t != (start_index + k as i64) as f64) {
        return Err(Error::Format("path file: time indices are not consecutive".into()));
    }
    if values.iter().any(|v| !(*v >= 0.0 && v.fract() == 0.0 && *v <= u32::MAX as f64)) {
        return Err(Error::Format("path file: values must be nonnegative integers".into()));
    }
    Ok(PathRecord {
        lambda: f.get_f64("lambda")?,
        big_h: f.get_f64("H")?,
        seed,
        path: LatticePath {
            start_index,
            values: values.into_iter().map(|v| v as u32).collect(),
        },
    })
}

/// Continuum eigenpairs as stored on disk (grid includes both walls).
#[derive(Debug, Clone, PartialEq)]
pub struct SlSpectrumRecord {
    pub sigma2: f64,
    pub q_tag: String,
    pub cutoff: f64,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub grid: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
}

impl From<&SturmLiouvilleSpectrum> for SlSpectrumRecord {
    fn from(s: &SturmLiouvilleSpectrum) -> Self {
        Self {
            sigma2: s.sigma2,
            q_tag: s.q_tag.clone(),
            cutoff: s.cutoff,
            n: s.n,
            eigenvalues: s.eigenvalues.clone(),
            grid: s.grid.clone(),
            eigenfunctions: s.eigenfunctions.clone(),
        }
    }
}

pub fn sl_spectrum_to_string(s: &SlSpectrumRecord) -> String {
    let names: Vec<String> = std::iter::once("r".to_string())
        .chain((0..s.eigenvalues.len()).map(|j| format!("phi_{j}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut f = ColumnarFile::new("sl-spectrum", &refs);
    f.set("sigma2", fmt_num(s.sigma2));
    f.set("q", s.q_tag.clone());
    f.set("R", fmt_num(s.cutoff));
    f.set("n", s.n.to_string());
    f.set("eigenvalues", join_nums(&s.eigenvalues));
    for (i, r) in s.grid.iter().enumerate() {
        let mut row = vec![*r];
        row.extend(s.eigenfunctions.iter().map(|phi| phi[i]));
        f.rows.push(row);
    }
    f.render()
}

pub fn sl_spectrum_from_str(text: &str) -> Result<SlSpectrumRecord> {
    let f = ColumnarFile::parse(text, "sl-spectrum")?;
    let eigenvalues = split_nums(f.get("eigenvalues")?, "eigenvalues")?;
    let eigenfunctions = (0..eigenvalues.len())
        .map(|j| f.column(&format!("phi_{j}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SlSpectrumRecord {
        sigma2: f.get_f64("sigma2")?,
        q_tag: f.get("q")?.to_string(),
        cutoff: f.get_f64("R")?,
        n: f.get_usize("n")?,
        eigenvalues,
        grid: f.column("r")?,
        eigenfunctions,
    })
}

/// Writes `contents` to `path` through a temporary sibling and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_errors() {
        assert!(ColumnarFile::parse("", "path").is_err());
        assert!(ColumnarFile::parse("# areatilt-path v9\nx\n", "path").is_err());
        assert!(ColumnarFile::parse("# areatilt-spectrum v1\nx\n", "path").is_err());
        let err = ColumnarFile::parse("# areatilt-path v1\na,b\n1,2\n3\n", "path").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn path_round_trip() {
        let p = PathRecord {
            lambda: 1e-3,
            big_h: 10.000000000000002,
            seed: 42,
            path: LatticePath {
                start_index: -3,
                values: vec![1, 2, 3, 2, 1, 1, 2],
            },
        };
        let text = path_to_string(&p);
        assert!(text.starts_with("# areatilt-path v1\n"));
        assert_eq!(path_from_str(&text).unwrap(), p);
    }
}
