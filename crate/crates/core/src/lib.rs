//! Grassmannian embeddings of hyperspectral movie patches and Vietoris-Rips
//! persistent homology over the resulting subspace distance matrices.
//!
//! The pipeline is: load or synthesize a movie ([`cube`], [`synth`]), cut
//! patches out of it, map each patch to a point on `G(k, n)` ([`grassmann`]),
//! build a [`DistanceMatrix`] and read off Betti₀/Betti₁ barcodes
//! ([`persistence`]). [`detection`] provides the ACE detector used to locate
//! plume pixels.

pub mod config;
pub mod cube;
pub mod detection;
pub mod distance;
pub mod error;
pub mod grassmann;
pub mod parallel;
pub mod persistence;
pub mod synth;

pub use cube::{HyperspectralMovie, PatchMatrix, PatchSpec, SlidingWindow};
pub use distance::DistanceMatrix;
pub use error::{Error, ErrorKind, Result};
pub use grassmann::{GrassmannPoint, PrincipalAngles, SubspaceMetric};
pub use parallel::Schedule;
pub use persistence::{Barcode, ComponentPartition, PersistenceInterval};
