//! Test-only oracles, independent of the library's reduction code.
#![allow(dead_code)]

use grassfire::DistanceMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (dim, birth, death, open)
pub type Bar = (u8, f64, f64, bool);

struct Simplex {
    dim: u8,
    diam: f64,
    vertices: Vec<usize>,
}

/// Materializes every simplex of dimension ≤ 2 whose diameter is within
/// `cap` (vertices always), sorts by (diameter, dimension, lexicographic
/// vertices), builds the full boundary matrix over Z/2 and runs the textbook
/// column reduction. Unpaired vertices yield infinite bars, unpaired edges
/// open bars at `cap`.
pub fn brute_force_barcode(d: &DistanceMatrix, cap: f64) -> Vec<Bar> {
    let m = d.len();
    let mut simplices: Vec<Simplex> = (0..m)
        .map(|v| Simplex {
            dim: 0,
            diam: 0.0,
            vertices: vec![v],
        })
        .collect();
    for i in 0..m {
        for j in (i + 1)..m {
            if d.get(i, j) <= cap {
                simplices.push(Simplex {
                    dim: 1,
                    diam: d.get(i, j),
                    vertices: vec![i, j],
                });
            }
            for k in (j + 1)..m {
                let diam = d.get(i, j).max(d.get(i, k)).max(d.get(j, k));
                if diam <= cap {
                    simplices.push(Simplex {
                        dim: 2,
                        diam,
                        vertices: vec![i, j, k],
                    });
                }
            }
        }
    }
    simplices.sort_by(|a, b| {
        a.diam
            .total_cmp(&b.diam)
            .then(a.dim.cmp(&b.dim))
            .then(a.vertices.cmp(&b.vertices))
    });
    let position = |verts: &[usize]| simplices.iter().position(|s| s.vertices == verts).unwrap();
    let n = simplices.len();
    let mut columns: Vec<Vec<bool>> = simplices
        .iter()
        .map(|s| {
            let mut col = vec![false; n];
            if s.dim > 0 {
                for skip in 0..s.vertices.len() {
                    let face: Vec<usize> = s
                        .vertices
                        .iter()
                        .enumerate()
                        .filter(|&(idx, _)| idx != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    col[position(&face)] = true;
                }
            }
            col
        })
        .collect();
    let low = |col: &Vec<bool>| col.iter().rposition(|&b| b);
    let mut low_owner: Vec<Option<usize>> = vec![None; n];
    let mut paired = vec![false; n];
    let mut bars = Vec::new();
    for j in 0..n {
        while let Some(l) = low(&columns[j]) {
            match low_owner[l] {
                Some(k) => {
                    let other = columns[k].clone();
                    for (a, b) in columns[j].iter_mut().zip(other) {
                        *a ^= b;
                    }
                }
                None => {
                    low_owner[l] = Some(j);
                    break;
                }
            }
        }
        if let Some(l) = low(&columns[j]) {
            paired[l] = true;
            paired[j] = true;
            let (birth, death) = (simplices[l].diam, simplices[j].diam);
            if death > birth {
                bars.push((simplices[l].dim, birth, death, false));
            }
        }
    }
    for (i, s) in simplices.iter().enumerate() {
        let zero_column = low(&columns[i]).is_none();
        if paired[i] || !zero_column {
            continue;
        }
        match s.dim {
            0 => bars.push((0, 0.0, f64::INFINITY, false)),
            1 if s.diam < cap => bars.push((1, s.diam, cap, true)),
            _ => {}
        }
    }
    sort_bars(&mut bars);
    bars
}

pub fn sort_bars(bars: &mut [Bar]) {
    bars.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
}

pub fn bars_of(barcode: &grassfire::Barcode) -> Vec<Bar> {
    let mut bars: Vec<Bar> = barcode
        .intervals()
        .iter()
        .map(|iv| (iv.dim, iv.birth, iv.death, iv.open))
        .collect();
    sort_bars(&mut bars);
    bars
}

pub fn bars_match(a: &[Bar], b: &[Bar], tol: f64) -> bool {
    let close =
        |x: f64, y: f64| (x.is_infinite() && y.is_infinite() && x == y) || (x - y).abs() <= tol;
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| p.0 == q.0 && p.3 == q.3 && close(p.1, q.1) && close(p.2, q.2))
}

/// Random symmetric matrix with entries uniform in (0, 1]; with `ties`,
/// entries are drawn from a small integer grid so many coincide.
pub fn random_distance_matrix(rng: &mut ChaCha8Rng, m: usize, ties: bool) -> DistanceMatrix {
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = if ties {
                f64::from(rng.random_range(1u32..=4))
            } else {
                rng.random_range(f64::EPSILON..=1.0)
            };
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    DistanceMatrix::new(m, entries).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` points on the unit circle at uniform random angles, each
/// coordinate perturbed by Gaussian noise of standard deviation `sigma`.
pub fn noisy_circle(seed: u64, count: usize, sigma: f64) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, Normal};
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..count)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            vec![
                a.cos() + noise.sample(&mut rng),
                a.sin() + noise.sample(&mut rng),
            ]
        })
        .collect()
}

/// True when the bars of `a` and `b` admit a partial matching within
/// `delta`: matched bars share a dimension and both endpoints differ by at
/// most `delta`; unmatched bars have persistence at most `2·delta`.
/// Decided exactly with augmenting paths on the diagonal-augmented graph.
pub fn delta_matched(a: &[Bar], b: &[Bar], delta: f64) -> bool {
    let tol = delta + 1e-12;
    let close = |x: f64, y: f64| x == y || (x - y).abs() <= tol;
    let short = |bar: &Bar| bar.2 - bar.1 <= 2.0 * tol;
    // left = a ∪ diag(b), right = b ∪ diag(a)
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let allowed = |l: usize, r: usize| -> bool {
        match (l < na, r < nb) {
            (true, true) => a[l].0 == b[r].0 && close(a[l].1, b[r].1) && close(a[l].2, b[r].2),
            (true, false) => r - nb == l && short(&a[l]),
            (false, true) => l - na == r && short(&b[r]),
            (false, false) => true,
        }
    };
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        l: usize,
        n: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for r in 0..n {
            if seen[r] || !allowed(l, r) {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none() || augment(owner[r].unwrap(), n, allowed, seen, owner) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    (0..n).all(|l| {
        let mut seen = vec![false; n];
        augment(l, n, &allowed, &mut seen, &mut owner)
    })
}
