//! Points on the Grassmannian `G(k, n)` and principal-angle distances.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::cube::PatchMatrix;
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::parallel::{self, Schedule};

/// Relative singular-value threshold below which a patch is rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Maximum per-entry deviation of `YᵀY` from the identity.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Angles below this are reported as exactly zero.
pub const ANGLE_FLOOR: f64 = 1e-8;

/// A `k`-dimensional subspace of `R^n`, stored as an `n × k` matrix with
/// orthonormal columns. Any right-multiple by an orthogonal `k × k` matrix
/// represents the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        if k == 0 || k > n {
            return Err(Error::Invariant(format!(
                "basis of shape {n}x{k} needs 0 < k <= n"
            )));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("basis contains non-finite entries".into()));
        }
        let gram = basis.transpose() * &basis;
        let deviation = gram
            .iter()
            .enumerate()
            .map(|(idx, &g)| {
                let (i, j) = (idx % k, idx / k);
                (g - if i == j { 1.0 } else { 0.0 }).abs()
            })
            .fold(0.0, f64::max);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::Invariant(format!(
                "basis columns are not orthonormal (max |YᵀY - I| = {deviation:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector `Y Yᵀ`, the canonical form of the point.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Maps a patch to the span of its columns using the left factor of the thin SVD.
pub fn embed(patch: &PatchMatrix) -> Result<GrassmannPoint> {
    embed_matrix(patch.entries())
}

pub fn embed_matrix(x: &DMatrix<f64>) -> Result<GrassmannPoint> {
    let (n, k) = x.shape();
    if k == 0 || k > n {
        return Err(Error::Invariant(format!("cannot embed a {n}x{k} matrix")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("patch contains non-finite entries".into()));
    }
    let svd = x.clone().svd(true, false);
    let sigma = &svd.singular_values;
    let largest = sigma.max();
    let smallest = sigma.min();
    if smallest.is_nan() || smallest <= RANK_TOL * largest {
        return Err(Error::DegeneratePatch(format!(
            "numerical rank below {k}: smallest singular value {smallest:.3e}, largest {largest:.3e} \
             (spatially constant or linearly dependent bands?)"
        )));
    }
    let u = svd.u.expect("left singular vectors requested");
    GrassmannPoint::from_basis(u)
}

/// Principal angles between two subspaces, ascending, each in `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    angles: Vec<f64>,
}

impl PrincipalAngles {
    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    pub fn smallest(&self) -> f64 {
        self.angles[0]
    }
}

pub fn principal_angles(a: &GrassmannPoint, b: &GrassmannPoint) -> Result<PrincipalAngles> {
    if a.n() != b.n() || a.k() != b.k() {
        return Err(Error::DimensionMismatch(format!(
            "G({}, {}) vs G({}, {})",
            a.k(),
            a.n(),
            b.k(),
            b.n()
        )));
    }
    let cross = a.basis.transpose() * &b.basis;
    let mut angles: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|&s| {
            let theta = s.clamp(0.0, 1.0).acos();
            if theta < ANGLE_FLOOR {
                0.0
            } else {
                theta
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(PrincipalAngles { angles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubspaceMetric {
    /// Smallest principal angle; a pseudometric.
    MinAngle,
    Chordal,
    Geodesic,
    FubiniStudy,
}

impl SubspaceMetric {
    pub const ALL: [SubspaceMetric; 4] = [
        SubspaceMetric::MinAngle,
        SubspaceMetric::Chordal,
        SubspaceMetric::Geodesic,
        SubspaceMetric::FubiniStudy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubspaceMetric::MinAngle => "min-angle",
            SubspaceMetric::Chordal => "chordal",
            SubspaceMetric::Geodesic => "geodesic",
            SubspaceMetric::FubiniStudy => "fubini-study",
        }
    }

    pub fn from_angles(self, angles: &PrincipalAngles) -> f64 {
        let theta = angles.as_slice();
        match self {
            SubspaceMetric::MinAngle => theta[0],
            SubspaceMetric::Chordal => theta.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt(),
            SubspaceMetric::Geodesic => theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
            SubspaceMetric::FubiniStudy => {
                let prod: f64 = theta.iter().map(|t| t.cos()).product();
                prod.clamp(0.0, 1.0).acos().min(FRAC_PI_2)
            }
        }
    }
}

impl fmt::Display for SubspaceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubspaceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "min-angle" | "minangle" | "smallest-angle" => Ok(SubspaceMetric::MinAngle),
            "chordal" => Ok(SubspaceMetric::Chordal),
            "geodesic" | "arc-length" => Ok(SubspaceMetric::Geodesic),
            "fubini-study" | "fubinistudy" => Ok(SubspaceMetric::FubiniStudy),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn distance(a: &GrassmannPoint, b: &GrassmannPoint, metric: SubspaceMetric) -> Result<f64> {
    Ok(metric.from_angles(&principal_angles(a, b)?))
}

/// Pairwise distances between all points.
pub fn distance_matrix(
    points: &[GrassmannPoint],
    metric: SubspaceMetric,
) -> Result<DistanceMatrix> {
    distance_matrix_with(Schedule::default(), points, metric)
}

pub fn distance_matrix_with(
    schedule: Schedule,
    points: &[GrassmannPoint],
    metric: SubspaceMetric,
) -> Result<DistanceMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::Invariant("distance matrix needs at least one point".into()))?;
    if let Some((i, p)) = points
        .iter()
        .enumerate()
        .find(|(_, p)| p.n() != first.n() || p.k() != first.k())
    {
        return Err(Error::DimensionMismatch(format!(
            "point {i} lies on G({}, {}), point 0 on G({}, {})",
            p.k(),
            p.n(),
            first.k(),
            first.n()
        )));
    }
    let m = points.len();
    // Each row holds the strict upper triangle; entries are independent so
    // the schedule cannot change the result.
    let upper: Vec<Vec<f64>> = parallel::map_indexed(schedule, m, |i| {
        ((i + 1)..m)
            .map(|j| distance(&points[i], &points[j], metric).expect("dimensions checked"))
            .collect()
    });
    let mut entries = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            entries[i * m + j] = d;
            entries[j * m + i] = d;
        }
    }
    DistanceMatrix::new(m, entries)
}
