//! Symmetric distance matrices and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Tolerance for symmetry of in-memory matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Square, symmetric, nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        Self::validated(m, entries, SYMMETRY_TOL)
    }

    /// Accepts asymmetry up to `tol` and replaces both triangles by their
    /// average so the result is exactly symmetric.
    pub fn symmetrized(m: usize, mut entries: Vec<f64>, tol: f64) -> Result<Self> {
        Self::check_shape(m, &entries)?;
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (entries[i * m + j], entries[j * m + i]);
                if (a - b).abs() > tol {
                    return Err(Error::Data(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let avg = if a == b { a } else { 0.5 * (a + b) };
                entries[i * m + j] = avg;
                entries[j * m + i] = avg;
            }
        }
        Self::validated(m, entries, 0.0)
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = f(i, j);
                entries[i * m + j] = d;
                entries[j * m + i] = d;
            }
        }
        Self::new(m, entries)
    }

    /// Euclidean distances between points given as rows.
    pub fn euclidean(points: &[Vec<f64>]) -> Result<Self> {
        Self::from_fn(points.len(), |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
    }

    fn check_shape(m: usize, entries: &[f64]) -> Result<()> {
        if m == 0 {
            return Err(Error::Invariant(
                "distance matrix must have at least one point".into(),
            ));
        }
        if entries.len() != m * m {
            return Err(Error::Invariant(format!(
                "{} entries for a {m}x{m} matrix",
                entries.len()
            )));
        }
        Ok(())
    }

    fn validated(m: usize, entries: Vec<f64>, tol: f64) -> Result<Self> {
        Self::check_shape(m, &entries)?;
        for i in 0..m {
            if entries[i * m + i] != 0.0 {
                return Err(Error::Data(format!(
                    "nonzero diagonal entry {} at ({i}, {i})",
                    entries[i * m + i]
                )));
            }
            for j in 0..m {
                let d = entries[i * m + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Data(format!("invalid distance {d} at ({i}, {j})")));
                }
                if j > i && (d - entries[j * m + i]).abs() > tol {
                    return Err(Error::Data(format!(
                        "matrix is not symmetric at ({i}, {j}): {d} vs {}",
                        entries[j * m + i]
                    )));
                }
            }
        }
        Ok(Self { m, entries })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.m, self.entries.iter().map(|d| d * c).collect())
    }

    /// Reorders points so that new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::from_fn(self.m, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.m * self.m * 24);
        for i in 0..self.m {
            for (j, d) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", format_f64(*d)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses `m` rows of `m` comma-separated values; asymmetry up to `tol`
    /// is averaged away.
    pub fn from_csv(text: &str, tol: f64) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    let cell = cell.trim();
                    cell.parse::<f64>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("not a number: {cell:?}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("expected {} columns, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        let m = rows.len();
        if m == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "empty distance matrix".into(),
            });
        }
        if rows[0].len() != m {
            return Err(Error::Parse {
                line: 1,
                message: format!("{m} rows but {} columns", rows[0].len()),
            });
        }
        Self::symmetrized(m, rows.concat(), tol)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, tol: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, tol)
    }
}

/// 17-significant-digit scientific notation; parses back to the same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
