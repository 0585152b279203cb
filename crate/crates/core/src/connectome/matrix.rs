use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::{fmt_f64, split_fields};

/// Largest `|M(k,l) − M(l,k)|` accepted (and averaged away) on input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Symmetric, non-negative `N × N` matrix of connection densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ConnectivityMatrix {
    /// Validates a row-major `n × n` grid. Asymmetry within
    /// [`SYMMETRY_TOLERANCE`] is averaged out; cell coordinates in errors
    /// are 0-based `(row, col)`.
    pub fn new(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(domain(format!(
                "expected {n}×{n} = {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        for k in 0..n {
            for l in 0..n {
                let x = data[k * n + l];
                if !x.is_finite() {
                    return Err(domain(format!("non-finite entry at ({k}, {l})")));
                }
                if x < 0.0 {
                    return Err(domain(format!("negative entry {x} at ({k}, {l})")));
                }
            }
        }
        for k in 0..n {
            for l in k + 1..n {
                let (a, b) = (data[k * n + l], data[l * n + k]);
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(domain(format!("asymmetric at ({k}, {l}): {a} vs {b}")));
                }
                let avg = 0.5 * (a + b);
                data[k * n + l] = avg;
                data[l * n + k] = avg;
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a symmetric matrix from `f(k, l)` evaluated for `k <= l`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for k in 0..n {
            for l in k..n {
                let x = f(k, l);
                data[k * n + l] = x;
                data[l * n + k] = x;
            }
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.n + l]
    }

    /// Cells `(k, l)` with `k < l` in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .flat_map(|k| (k + 1..n).map(move |l| (k, l)))
            .map(|(k, l)| self.data[k * n + l])
            .collect()
    }

    /// Dense comma-separated text, one row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 8);
        for row in self.data.chunks(self.n) {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a dense grid (commas or whitespace, no header).
    pub fn parse(text: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields = split_fields(line);
            let width = *n.get_or_insert(fields.len());
            if fields.len() != width {
                return Err(Error::Parse {
                    line: i + 1,
                    detail: format!("expected {width} fields, got {}", fields.len()),
                });
            }
            for (j, field) in fields.iter().enumerate() {
                let x: f64 = field.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    detail: format!("column {}: '{field}' is not a number", j + 1),
                })?;
                if x.is_nan() {
                    return Err(Error::Parse {
                        line: i + 1,
                        detail: format!("column {}: NaN is not allowed", j + 1),
                    });
                }
                data.push(x);
            }
        }
        let n = n.ok_or_else(|| domain("empty matrix"))?;
        if data.len() != n * n {
            return Err(domain(format!(
                "matrix is not square: {} rows of {n} columns",
                data.len() / n
            )));
        }
        Self::new(n, data)
    }
}

fn load_error(path: &Path, err: impl std::fmt::Display) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        detail: err.to_string(),
    }
}

pub fn read_matrix(path: &Path) -> Result<ConnectivityMatrix> {
    let text = fs::read_to_string(path).map_err(|e| load_error(path, e))?;
    ConnectivityMatrix::parse(&text).map_err(|e| load_error(path, e))
}

pub fn write_matrix(path: &Path, matrix: &ConnectivityMatrix) -> Result<()> {
    fs::write(path, matrix.to_text())?;
    Ok(())
}

/// Matrix files of a group directory: regular, non-hidden files sorted by name.
pub fn group_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| load_error(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| load_error(dir, e))?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().map_err(|e| load_error(dir, e))?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(load_error(dir, "no matrix files"));
    }
    Ok(files)
}

/// Loads every matrix of a group directory; all must share one size.
pub fn load_group(dir: &Path) -> Result<Vec<ConnectivityMatrix>> {
    let files = group_files(dir)?;
    let mut group: Vec<ConnectivityMatrix> = Vec::with_capacity(files.len());
    for path in &files {
        let m = read_matrix(path)?;
        if let Some(first) = group.first() {
            if m.n() != first.n() {
                return Err(load_error(
                    path,
                    format!(
                        "size {} differs from {} in {}",
                        m.n(),
                        first.n(),
                        files[0].display()
                    ),
                ));
            }
        }
        group.push(m);
    }
    Ok(group)
}

/// Writes `prefix_001.csv`, `prefix_002.csv`, ... into `dir`.
pub fn write_group(dir: &Path, prefix: &str, group: &[ConnectivityMatrix]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let width = group.len().to_string().len().max(3);
    group
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let path = dir.join(format!("{prefix}_{:0width$}.csv", i + 1));
            write_matrix(&path, m)?;
            Ok(path)
        })
        .collect()
}

/// Fibers joining two ROIs: fiber lengths in mm and ROI surfaces in mm².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberBundle {
    pub lengths: Vec<f64>,
    pub surface_k: f64,
    pub surface_l: f64,
}

/// `M(k,l) = 2/(S(k) + S(l)) · Σ_f 1/l(f)`.
pub fn connection_density(bundle: &FiberBundle) -> Result<f64> {
    let (sk, sl) = (bundle.surface_k, bundle.surface_l);
    if !(sk > 0.0 && sl > 0.0 && sk.is_finite() && sl.is_finite()) {
        return Err(domain(format!(
            "ROI surfaces must be positive, got ({sk}, {sl})"
        )));
    }
    let mut sum = 0.0;
    for (i, &len) in bundle.lengths.iter().enumerate() {
        if !(len > 0.0 && len.is_finite()) {
            return Err(domain(format!("fiber {i} has invalid length {len}")));
        }
        sum += 1.0 / len;
    }
    Ok(2.0 / (sk + sl) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(lengths: Vec<f64>, sk: f64, sl: f64) -> FiberBundle {
        FiberBundle {
            lengths,
            surface_k: sk,
            surface_l: sl,
        }
    }

    #[test]
    fn density_examples() {
        assert_eq!(connection_density(&bundle(vec![], 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(connection_density(&bundle(vec![1.0], 1.0, 1.0)).unwrap(), 1.0);
        let d = connection_density(&bundle(vec![2.0, 4.0], 2.0, 3.0)).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
        assert!(connection_density(&bundle(vec![0.0], 1.0, 1.0)).is_err());
        assert!(connection_density(&bundle(vec![1.0], 0.0, 1.0)).is_err());
    }

    #[test]
    fn parse_and_validate() {
        let m = ConnectivityMatrix::parse("0,1,2\n1,0,3\n2,3,0\n").unwrap();
        assert_eq!(m.upper_triangle(), vec![1.0, 2.0, 3.0]);
        assert_eq!(ConnectivityMatrix::parse(&m.to_text()).unwrap(), m);
        let err =
            ConnectivityMatrix::parse("0 0 0 0\n0 0 0 0\n0 0 0 1\n0 0 0 0\n").unwrap_err();
        assert!(err.to_string().contains("(2, 3)"), "{err}");
        assert!(ConnectivityMatrix::parse("0,-1\n-1,0").is_err());
        assert!(ConnectivityMatrix::parse("0,NaN\nNaN,0").is_err());
        assert!(ConnectivityMatrix::parse("0,1\n1").is_err());
        let nearly = ConnectivityMatrix::parse("0,1\n1.0000000000001,0").unwrap();
        assert_eq!(nearly.get(0, 1), nearly.get(1, 0));
    }
}
