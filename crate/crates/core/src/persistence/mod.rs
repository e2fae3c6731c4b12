//! Vietoris-Rips persistent homology in dimensions 0 and 1.
//!
//! A simplex enters the filtration at its diameter and is present at scale
//! `ε` when its diameter is `≤ ε` (closed threshold). Homology is taken with
//! Z/2 coefficients. Pairs with zero persistence are dropped and only
//! counted in [`Diagnostics`].

mod filtration;
mod rips;
mod union_find;

use std::fmt::Write as _;
use std::path::Path;

pub use rips::{
    rips_barcode, rips_barcode_with, rips_h0, rips_h0_with, rips_h1, rips_h1_with, MAX_SIMPLICES,
};
pub use union_find::UnionFind;

use crate::distance::{format_f64, DistanceMatrix};
use crate::error::{Error, Result};

pub const BARCODE_HEADER: &str = "dim,birth,death,open";

/// One bar `[birth, death)`. `death` is `+∞` for the essential dim-0 class;
/// `open` marks a dim-1 bar cut off at the construction cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceInterval {
    pub dim: u8,
    pub birth: f64,
    pub death: f64,
    pub open: bool,
}

impl PersistenceInterval {
    pub fn new(dim: u8, birth: f64, death: f64, open: bool) -> Result<Self> {
        if dim > 1 {
            return Err(Error::Invariant(format!(
                "unsupported homology dimension {dim}"
            )));
        }
        if !(birth.is_finite() && birth >= 0.0) {
            return Err(Error::Invariant(format!(
                "birth must be finite and >= 0, got {birth}"
            )));
        }
        if death.is_nan() || death <= birth {
            return Err(Error::Invariant(format!(
                "death {death} must exceed birth {birth}"
            )));
        }
        if open && death.is_infinite() {
            return Err(Error::Invariant("an open bar needs a finite cap".into()));
        }
        Ok(Self {
            dim,
            birth,
            death,
            open,
        })
    }

    pub fn finite(dim: u8, birth: f64, death: f64) -> Self {
        Self {
            dim,
            birth,
            death,
            open: false,
        }
    }

    pub fn open(dim: u8, birth: f64, cap: f64) -> Self {
        Self {
            dim,
            birth,
            death: cap,
            open: true,
        }
    }

    pub fn essential() -> Self {
        Self::finite(0, 0.0, f64::INFINITY)
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn contains(&self, epsilon: f64) -> bool {
        self.birth <= epsilon && epsilon < self.death
    }

    fn sort_key(&self) -> (u8, u64, u64, bool) {
        (
            self.dim,
            self.birth.to_bits(),
            self.death.to_bits(),
            self.open,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub zero_persistence_h0: usize,
    pub zero_persistence_h1: usize,
}

/// Multiset of intervals, kept sorted by (dim, birth, death).
///
/// Equality compares the interval multiset only.
#[derive(Debug, Clone)]
pub struct Barcode {
    intervals: Vec<PersistenceInterval>,
    scale_max: f64,
    diagnostics: Diagnostics,
}

impl PartialEq for Barcode {
    fn eq(&self, other: &Self) -> bool {
        self.intervals == other.intervals
    }
}

impl Barcode {
    pub fn new(intervals: Vec<PersistenceInterval>, scale_max: f64) -> Self {
        Self::from_parts(intervals, scale_max, Diagnostics::default())
    }

    pub(crate) fn from_parts(
        mut intervals: Vec<PersistenceInterval>,
        scale_max: f64,
        diagnostics: Diagnostics,
    ) -> Self {
        intervals.sort_by_key(PersistenceInterval::sort_key);
        Self {
            intervals,
            scale_max,
            diagnostics,
        }
    }

    pub fn intervals(&self) -> &[PersistenceInterval] {
        &self.intervals
    }

    pub fn scale_max(&self) -> f64 {
        self.scale_max
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn dim(&self, dim: u8) -> impl Iterator<Item = &PersistenceInterval> + '_ {
        self.intervals.iter().filter(move |iv| iv.dim == dim)
    }

    /// Number of bars of dimension `dim` alive at `epsilon`.
    pub fn betti_at(&self, epsilon: f64, dim: u8) -> usize {
        self.dim(dim).filter(|iv| iv.contains(epsilon)).count()
    }

    /// Longest finite-or-open bar of the given dimension.
    pub fn max_persistence(&self, dim: u8) -> f64 {
        self.dim(dim)
            .filter(|iv| !iv.is_infinite())
            .map(PersistenceInterval::persistence)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BARCODE_HEADER);
        out.push('\n');
        for iv in &self.intervals {
            let death = if iv.death.is_infinite() {
                "inf".to_string()
            } else {
                format_f64(iv.death)
            };
            writeln!(
                out,
                "{},{},{},{}",
                iv.dim,
                format_f64(iv.birth),
                death,
                u8::from(iv.open)
            )
            .unwrap();
        }
        out
    }

    /// Parses barcode CSV. The header is optional; the `open` column may be
    /// omitted and defaults to 0. `scale_max` is recovered as the largest
    /// finite endpoint.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line == BARCODE_HEADER) {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(err(format!(
                    "expected 3 or 4 fields, found {}",
                    fields.len()
                )));
            }
            let dim: u8 = fields[0]
                .parse()
                .map_err(|_| err(format!("bad dimension {:?}", fields[0])))?;
            let birth: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad birth {:?}", fields[1])))?;
            let death: f64 = match fields[2] {
                "inf" | "+inf" | "Inf" | "infinity" => f64::INFINITY,
                s => s.parse().map_err(|_| err(format!("bad death {s:?}")))?,
            };
            let open = match fields.get(3).copied().unwrap_or("0") {
                "0" => false,
                "1" => true,
                s => return Err(err(format!("open flag must be 0 or 1, got {s:?}"))),
            };
            let iv = PersistenceInterval::new(dim, birth, death, open)
                .map_err(|e| err(e.to_string()))?;
            intervals.push(iv);
        }
        let scale_max = intervals
            .iter()
            .flat_map(|iv| [iv.birth, iv.death])
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        Ok(Self::new(intervals, scale_max))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

pub fn betti_at(barcode: &Barcode, epsilon: f64, dim: u8) -> usize {
    barcode.betti_at(epsilon, dim)
}

/// Connected components of the graph with edges `d(i, j) ≤ epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPartition {
    pub epsilon: f64,
    /// Component id per point, dense from 0 in order of first appearance.
    pub labels: Vec<usize>,
}

impl ComponentPartition {
    pub fn count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&l| l + 1)
    }

    /// Member indices per component, ordered by component id.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.count()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn singletons(&self) -> Vec<usize> {
        self.members()
            .into_iter()
            .filter(|g| g.len() == 1)
            .map(|g| g[0])
            .collect()
    }
}

pub fn components_at(d: &DistanceMatrix, epsilon: f64) -> ComponentPartition {
    let m = d.len();
    let mut uf = UnionFind::new(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if d.get(i, j) <= epsilon {
                uf.union(i, j);
            }
        }
    }
    let mut ids = vec![usize::MAX; m];
    let mut next = 0;
    let labels = (0..m)
        .map(|i| {
            let root = uf.find(i);
            if ids[root] == usize::MAX {
                ids[root] = next;
                next += 1;
            }
            ids[root]
        })
        .collect();
    ComponentPartition { epsilon, labels }
}
