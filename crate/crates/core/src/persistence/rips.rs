//! Vietoris-Rips barcodes in dimensions 0 and 1.
//!
//! Dimension 0 is Kruskal's algorithm over edges in filtration order. For
//! dimension 1 the coboundary matrix of the edges is reduced over Z/2, one
//! edge column at a time in reverse filtration order. Edges that merged two
//! components are cleared up front: they are paired in dimension 0 and
//! cannot create a loop. The resulting persistence pairs are the same as
//! those of the boundary-matrix reduction of the 2-skeleton.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use super::filtration::{self, key_diameter, triangle_key, Edge, MAX_VERTICES};
use super::union_find::UnionFind;
use super::{Barcode, Diagnostics, PersistenceInterval};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::parallel::Schedule;

/// Upper bound on the number of triangles in a capped complex.
pub const MAX_SIMPLICES: u64 = 1 << 31;

/// Betti₀ barcode: one death per Kruskal union, plus the essential class.
pub fn rips_h0(d: &DistanceMatrix) -> Barcode {
    rips_h0_with(Schedule::default(), d)
}

pub fn rips_h0_with(schedule: Schedule, d: &DistanceMatrix) -> Barcode {
    let edges = filtration::sorted_edges(schedule, d, f64::INFINITY);
    let (intervals, zero) = h0_from_edges(d.len(), &edges, &mut Vec::new());
    Barcode::from_parts(
        intervals,
        d.max_entry(),
        Diagnostics {
            zero_persistence_h0: zero,
            ..Diagnostics::default()
        },
    )
}

/// Returns dim-0 intervals and the count of zero-length merges; marks in
/// `negative` which edges caused a merge.
fn h0_from_edges(
    m: usize,
    edges: &[Edge],
    negative: &mut Vec<bool>,
) -> (Vec<PersistenceInterval>, usize) {
    let mut uf = UnionFind::new(m);
    let mut intervals = Vec::with_capacity(m);
    let mut zero = 0;
    negative.clear();
    negative.resize(edges.len(), false);
    let mut merges = 0;
    for (idx, e) in edges.iter().enumerate() {
        if merges + 1 == m {
            break;
        }
        if uf.union(e.i, e.j) {
            merges += 1;
            negative[idx] = true;
            if e.diam > 0.0 {
                intervals.push(PersistenceInterval::finite(0, 0.0, e.diam));
            } else {
                zero += 1;
            }
        }
    }
    if m > 0 {
        intervals.push(PersistenceInterval::essential());
    }
    (intervals, zero)
}

/// Betti₁ barcode of the Rips complex truncated at `scale_max`. Loops still
/// alive at the cap are reported with death `scale_max` and the open flag.
pub fn rips_h1(d: &DistanceMatrix, scale_max: f64) -> Result<Barcode> {
    rips_h1_with(Schedule::default(), d, scale_max)
}

pub fn rips_h1_with(schedule: Schedule, d: &DistanceMatrix, scale_max: f64) -> Result<Barcode> {
    let (intervals, zero) = h1_intervals(schedule, d, scale_max)?;
    Ok(Barcode::from_parts(
        intervals,
        scale_max,
        Diagnostics {
            zero_persistence_h1: zero,
            ..Diagnostics::default()
        },
    ))
}

/// Both dimensions. The barcode's `scale_max` is the cap, raised to the
/// largest dim-0 death if that lies beyond it.
pub fn rips_barcode(d: &DistanceMatrix, scale_max: f64) -> Result<Barcode> {
    rips_barcode_with(Schedule::default(), d, scale_max)
}

pub fn rips_barcode_with(
    schedule: Schedule,
    d: &DistanceMatrix,
    scale_max: f64,
) -> Result<Barcode> {
    let h0 = rips_h0_with(schedule, d);
    let h1 = rips_h1_with(schedule, d, scale_max)?;
    let largest_h0 = h0
        .intervals()
        .iter()
        .filter(|iv| iv.death.is_finite())
        .map(|iv| iv.death)
        .fold(0.0, f64::max);
    let mut intervals = h0.intervals().to_vec();
    intervals.extend_from_slice(h1.intervals());
    Ok(Barcode::from_parts(
        intervals,
        scale_max.max(largest_h0),
        Diagnostics {
            zero_persistence_h0: h0.diagnostics().zero_persistence_h0,
            zero_persistence_h1: h1.diagnostics().zero_persistence_h1,
        },
    ))
}

fn h1_intervals(
    schedule: Schedule,
    d: &DistanceMatrix,
    scale_max: f64,
) -> Result<(Vec<PersistenceInterval>, usize)> {
    if !scale_max.is_finite() || scale_max <= 0.0 {
        return Err(Error::Invariant(format!(
            "scale_max must be positive and finite, got {scale_max}"
        )));
    }
    let m = d.len();
    if m > MAX_VERTICES {
        return Err(Error::Capacity(format!(
            "{m} points exceed the supported {MAX_VERTICES}"
        )));
    }
    let edges = filtration::sorted_edges(schedule, d, scale_max);
    // every triangle has three edges and each edge lies in at most m - 2 triangles
    let all_triangles =
        (m as u64) * (m as u64).saturating_sub(1) * (m as u64).saturating_sub(2) / 6;
    let bound = all_triangles.min(edges.len() as u64 * (m as u64).saturating_sub(2) / 3);
    if bound > MAX_SIMPLICES {
        return Err(Error::Capacity(format!(
            "up to {bound} triangles below scale {scale_max}; reduce scale_max"
        )));
    }

    let mut negative = Vec::new();
    h0_from_edges(m, &edges, &mut negative);

    let mut reducer = CoboundaryReducer {
        d,
        scale_max,
        edges: &edges,
        pivots: HashMap::new(),
        columns: HashMap::new(),
    };
    let mut intervals = Vec::new();
    let mut zero = 0;
    for idx in (0..edges.len()).rev() {
        if negative[idx] {
            continue;
        }
        let birth = edges[idx].diam;
        let death = match reducer.reduce(idx) {
            Some(pivot) => key_diameter(pivot),
            None => scale_max,
        };
        if death > birth {
            let iv = match reducer.columns.contains_key(&idx) {
                true => PersistenceInterval::finite(1, birth, death),
                false => PersistenceInterval::open(1, birth, death),
            };
            intervals.push(iv);
        } else {
            zero += 1;
        }
    }
    Ok((intervals, zero))
}

struct CoboundaryReducer<'a> {
    d: &'a DistanceMatrix,
    scale_max: f64,
    edges: &'a [Edge],
    /// triangle key -> edge index whose reduced column has it as pivot
    pivots: HashMap<u128, usize>,
    /// edge index -> other edges summed into its column (reduction matrix)
    columns: HashMap<usize, Vec<usize>>,
}

impl CoboundaryReducer<'_> {
    fn coboundary(&self, idx: usize, out: &mut Vec<u128>) {
        let Edge { diam, i, j, .. } = self.edges[idx];
        let (di, dj) = (self.d.row(i), self.d.row(j));
        for k in 0..self.d.len() {
            if k == i || k == j {
                continue;
            }
            let t = diam.max(di[k]).max(dj[k]);
            if t > self.scale_max {
                continue;
            }
            let key = if k < i {
                triangle_key(t, k, i, j)
            } else if k < j {
                triangle_key(t, i, k, j)
            } else {
                triangle_key(t, i, j, k)
            };
            out.push(key);
        }
    }

    /// Reduces the column of edge `idx`; returns its pivot (earliest
    /// triangle) or `None` if the column vanishes.
    fn reduce(&mut self, idx: usize) -> Option<u128> {
        let mut fresh = Vec::new();
        self.coboundary(idx, &mut fresh);
        let first = *fresh.iter().min()?;
        if let Entry::Vacant(slot) = self.pivots.entry(first) {
            slot.insert(idx);
            self.columns.insert(idx, Vec::new());
            return Some(first);
        }

        let mut heap: BinaryHeap<Reverse<u128>> = fresh.into_iter().map(Reverse).collect();
        let mut added = Vec::new();
        let mut scratch = Vec::new();
        while let Some(pivot) = pop_pivot(&mut heap) {
            match self.pivots.get(&pivot) {
                Some(&other) => {
                    added.push(other);
                    added.extend_from_slice(&self.columns[&other]);
                    scratch.clear();
                    self.coboundary(other, &mut scratch);
                    for &e in &self.columns[&other] {
                        self.coboundary(e, &mut scratch);
                    }
                    heap.extend(scratch.drain(..).map(Reverse));
                }
                None => {
                    self.pivots.insert(pivot, idx);
                    self.columns.insert(idx, cancel_pairs(added));
                    return Some(pivot);
                }
            }
        }
        None
    }
}

/// Smallest entry with odd multiplicity, left on the heap.
fn pop_pivot(heap: &mut BinaryHeap<Reverse<u128>>) -> Option<u128> {
    loop {
        let Reverse(top) = heap.pop()?;
        match heap.peek() {
            Some(&Reverse(next)) if next == top => {
                heap.pop();
            }
            _ => {
                heap.push(Reverse(top));
                return Some(top);
            }
        }
    }
}

fn cancel_pairs(mut items: Vec<usize>) -> Vec<usize> {
    items.sort_unstable();
    let mut out = Vec::with_capacity(items.len());
    for v in items {
        if out.last() == Some(&v) {
            out.pop();
        } else {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn three_points() -> DistanceMatrix {
        DistanceMatrix::new(3, vec![0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0]).unwrap()
    }

    pub(crate) fn square() -> DistanceMatrix {
        let pts: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        DistanceMatrix::from_fn(4, |i, j| {
            let (dx, dy) = (pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
            if dx != 0.0 && dy != 0.0 {
                SQRT_2
            } else {
                (dx * dx + dy * dy).sqrt()
            }
        })
        .unwrap()
    }

    #[test]
    fn h0_three_points() {
        let b = rips_h0(&three_points());
        let mut deaths: Vec<f64> = b.intervals().iter().map(|iv| iv.death).collect();
        deaths.sort_by(f64::total_cmp);
        assert_eq!(deaths, vec![1.0, 2.0, f64::INFINITY]);
        assert!(b
            .intervals()
            .iter()
            .all(|iv| iv.birth == 0.0 && iv.dim == 0));
    }

    #[test]
    fn h0_single_and_duplicates() {
        let one = DistanceMatrix::new(1, vec![0.0]).unwrap();
        assert_eq!(
            rips_h0(&one).intervals(),
            &[PersistenceInterval::essential()]
        );
        let dup = DistanceMatrix::new(4, vec![0.0; 16]).unwrap();
        let b = rips_h0(&dup);
        assert_eq!(b.intervals(), &[PersistenceInterval::essential()]);
        assert_eq!(b.diagnostics().zero_persistence_h0, 3);
    }

    #[test]
    fn h1_square() {
        let b = rips_h1(&square(), SQRT_2).unwrap();
        assert_eq!(
            b.intervals(),
            &[PersistenceInterval::finite(1, 1.0, SQRT_2)]
        );
    }

    #[test]
    fn h1_square_capped_below_diagonal_is_open() {
        let b = rips_h1(&square(), 1.2).unwrap();
        assert_eq!(b.intervals(), &[PersistenceInterval::open(1, 1.0, 1.2)]);
    }

    #[test]
    fn h1_trivial_inputs() {
        let two = DistanceMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(rips_h1(&two, 1.0).unwrap().intervals().is_empty());
        assert!(rips_h1(&three_points(), 3.0)
            .unwrap()
            .intervals()
            .is_empty());
        assert!(matches!(rips_h1(&two, 0.0), Err(Error::Invariant(_))));
        assert!(matches!(rips_h1(&two, -1.0), Err(Error::Invariant(_))));
    }

    #[test]
    fn capacity_guard() {
        let m = 2400;
        let d = DistanceMatrix::new(m, vec![0.0; m * m]).unwrap();
        assert!(matches!(rips_h1(&d, 1.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn hexagon_loop() {
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let a = i as f64 * std::f64::consts::PI / 3.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let d = DistanceMatrix::euclidean(&pts).unwrap();
        let b = rips_h1(&d, 2.0).unwrap();
        assert_eq!(b.intervals().len(), 1);
        let iv = b.intervals()[0];
        assert!((iv.birth - 1.0).abs() < 1e-12);
        assert!((iv.death - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn schedules_agree() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.157;
                vec![
                    a.cos() + 0.01 * (i % 7) as f64,
                    a.sin(),
                    0.05 * (i % 3) as f64,
                ]
            })
            .collect();
        let d = DistanceMatrix::euclidean(&pts).unwrap();
        let a = rips_barcode_with(Schedule::Sequential, &d, d.max_entry()).unwrap();
        let b = rips_barcode_with(Schedule::Parallel, &d, d.max_entry()).unwrap();
        assert_eq!(a.intervals(), b.intervals());
    }
}
