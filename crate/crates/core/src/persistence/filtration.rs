//! Simplex keys for the Rips filtration.
//!
//! Simplices are totally ordered by (diameter, dimension, lexicographic
//! vertex tuple). Within one dimension a key packs the diameter bits into
//! the high 64 bits and the vertex tuple into the low 64 bits, so plain
//! integer comparison gives filtration order. Diameters are finite and
//! nonnegative, whose IEEE bit patterns sort like the values.

use crate::distance::DistanceMatrix;
use crate::parallel::{self, Schedule};

const VERTEX_BITS: u32 = 21;
pub const MAX_VERTICES: usize = 1 << VERTEX_BITS;

#[inline]
pub fn edge_key(diam: f64, i: usize, j: usize) -> u128 {
    debug_assert!(i < j);
    ((diam.to_bits() as u128) << 64) | ((i as u128) << VERTEX_BITS) | j as u128
}

#[inline]
pub fn triangle_key(diam: f64, a: usize, b: usize, c: usize) -> u128 {
    debug_assert!(a < b && b < c);
    ((diam.to_bits() as u128) << 64)
        | ((a as u128) << (2 * VERTEX_BITS))
        | ((b as u128) << VERTEX_BITS)
        | c as u128
}

#[inline]
pub fn key_diameter(key: u128) -> f64 {
    f64::from_bits((key >> 64) as u64)
}

#[cfg(test)]
pub fn triangle_vertices(key: u128) -> (usize, usize, usize) {
    let mask = (1u128 << VERTEX_BITS) - 1;
    (
        ((key >> (2 * VERTEX_BITS)) & mask) as usize,
        ((key >> VERTEX_BITS) & mask) as usize,
        (key & mask) as usize,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub key: u128,
    pub diam: f64,
    pub i: usize,
    pub j: usize,
}

/// All edges with diameter at most `cap`, in filtration order.
pub fn sorted_edges(schedule: Schedule, d: &DistanceMatrix, cap: f64) -> Vec<Edge> {
    let m = d.len();
    let rows = parallel::map_indexed(schedule, m, |i| {
        ((i + 1)..m)
            .filter_map(|j| {
                let w = d.get(i, j);
                (w <= cap).then(|| Edge {
                    key: edge_key(w, i, j),
                    diam: w,
                    i,
                    j,
                })
            })
            .collect::<Vec<_>>()
    });
    let mut edges: Vec<Edge> = rows.into_iter().flatten().collect();
    edges.sort_unstable_by_key(|e| e.key);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_order_by_diameter_then_vertices() {
        assert!(edge_key(1.0, 5, 9) < edge_key(1.5, 0, 1));
        assert!(edge_key(1.0, 0, 9) < edge_key(1.0, 1, 2));
        assert!(triangle_key(0.0, 0, 1, 2) < triangle_key(f64::MIN_POSITIVE, 0, 1, 2));
        assert!(triangle_key(2.0, 0, 2, 3) < triangle_key(2.0, 1, 2, 3));
        let k = triangle_key(0.25, 3, 17, 400);
        assert_eq!(triangle_vertices(k), (3, 17, 400));
        assert_eq!(key_diameter(k), 0.25);
    }
}
