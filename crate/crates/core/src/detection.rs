//! Adaptive cosine estimator (ACE) against a Gaussian background model.
//!
//! Both the pixel and the target signature are centered on the background
//! mean and whitened through the Cholesky factor of the background
//! covariance; the score is the squared cosine of the angle between them.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cube::HyperspectralMovie;
use crate::distance::format_f64;
use crate::error::{Error, Result};
use crate::parallel::{self, Schedule};

pub const DEFAULT_SHRINKAGE: f64 = 1e-3;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Ratio of smallest to largest squared Cholesky pivot below which the
/// covariance is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BackgroundModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    shrinkage: f64,
    factor: Cholesky<f64, Dyn>,
}

impl BackgroundModel {
    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    /// `L⁻¹ (x − μ)` where `Σ = L Lᵀ`.
    fn whiten(&self, x: &[f64]) -> DVector<f64> {
        let centered =
            DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        self.factor
            .l_dirty()
            .solve_lower_triangular(&centered)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Whitens a target once so that many pixels can be scored against it.
    pub fn prepare(&self, target: &TargetSignature) -> Result<WhitenedTarget> {
        if target.spectrum.len() != self.bands() {
            return Err(Error::DimensionMismatch(format!(
                "target has {} bands, model {}",
                target.spectrum.len(),
                self.bands()
            )));
        }
        let whitened = self.whiten(&target.spectrum);
        let norm2 = whitened.dot(&whitened);
        if norm2 == 0.0 {
            return Err(Error::UndefinedScore(
                "target equals the background mean".into(),
            ));
        }
        Ok(WhitenedTarget { whitened, norm2 })
    }

    /// ACE score of pixel `x` against a prepared target.
    pub fn score(&self, target: &WhitenedTarget, x: &[f64]) -> Result<f64> {
        if x.len() != self.bands() {
            return Err(Error::DimensionMismatch(format!(
                "pixel has {} bands, model {}",
                x.len(),
                self.bands()
            )));
        }
        let xw = self.whiten(x);
        let xx = xw.dot(&xw);
        if xx == 0.0 {
            return Err(Error::UndefinedScore(
                "pixel equals the background mean".into(),
            ));
        }
        let sx = target.whitened.dot(&xw);
        Ok(((sx * sx) / (target.norm2 * xx)).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone)]
pub struct WhitenedTarget {
    whitened: DVector<f64>,
    norm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSignature {
    pub spectrum: Vec<f64>,
}

impl TargetSignature {
    pub fn new(spectrum: Vec<f64>) -> Result<Self> {
        if spectrum.is_empty() || spectrum.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "target spectrum must be nonempty and finite".into(),
            ));
        }
        Ok(Self { spectrum })
    }

    /// Single-column CSV, one band per row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut spectrum = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let cell = line.trim().trim_end_matches(',');
            if cell.is_empty() {
                continue;
            }
            let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            spectrum.push(v);
        }
        Self::new(spectrum)
    }

    pub fn to_csv(&self) -> String {
        self.spectrum
            .iter()
            .map(|v| format_f64(*v) + "\n")
            .collect()
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Sample mean and covariance (divisor `m − 1`) of the given pixels, with
/// `shrinkage · trace(Σ̂)/b` added to the diagonal.
pub fn fit_background<P: AsRef<[f64]>>(pixels: &[P], shrinkage: f64) -> Result<BackgroundModel> {
    let first = pixels
        .first()
        .ok_or_else(|| Error::SingularModel("no background pixels".into()))?;
    let bands = first.as_ref().len();
    let mut acc = MomentAccumulator::new(bands);
    for p in pixels {
        acc.push(p.as_ref())?;
    }
    acc.finish(shrinkage)
}

/// Fits the model to every pixel of the listed frames.
pub fn fit_background_frames(
    movie: &HyperspectralMovie,
    frames: std::ops::Range<usize>,
    shrinkage: f64,
) -> Result<BackgroundModel> {
    if frames.is_empty() || frames.end > movie.frames() {
        return Err(Error::Bounds(format!(
            "background frames {frames:?} invalid for {} frames",
            movie.frames()
        )));
    }
    let mut acc = MomentAccumulator::new(movie.bands());
    let mut buf = vec![0.0; movie.bands()];
    for f in frames {
        for r in 0..movie.rows() {
            for c in 0..movie.cols() {
                for (dst, &v) in buf.iter_mut().zip(movie.pixel(f, r, c)) {
                    *dst = f64::from(v);
                }
                acc.push(&buf)?;
            }
        }
    }
    acc.finish(shrinkage)
}

/// Streaming mean and co-moment (Welford) accumulator.
struct MomentAccumulator {
    count: usize,
    mean: DVector<f64>,
    comoment: DMatrix<f64>,
    delta: DVector<f64>,
}

impl MomentAccumulator {
    fn new(bands: usize) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(bands),
            comoment: DMatrix::zeros(bands, bands),
            delta: DVector::zeros(bands),
        }
    }

    fn push(&mut self, x: &[f64]) -> Result<()> {
        let b = self.mean.len();
        if x.len() != b {
            return Err(Error::DimensionMismatch(format!(
                "pixel with {} bands among {b}-band pixels",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite background pixel".into()));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((d, m), &v) in self.delta.iter_mut().zip(self.mean.iter_mut()).zip(x) {
            *d = v - *m;
            *m += *d / n;
        }
        // comoment += (x - old_mean)(x - new_mean)ᵀ, upper triangle only
        for (j, (&v, &m)) in x.iter().zip(&self.mean).enumerate() {
            let after = v - m;
            for i in 0..=j {
                self.comoment[(i, j)] += self.delta[i] * after;
            }
        }
        Ok(())
    }

    fn finish(self, shrinkage: f64) -> Result<BackgroundModel> {
        if self.count < 2 {
            return Err(Error::SingularModel(format!(
                "need at least 2 background pixels, got {}",
                self.count
            )));
        }
        if !(shrinkage >= 0.0 && shrinkage.is_finite()) {
            return Err(Error::Config(format!(
                "shrinkage must be >= 0, got {shrinkage}"
            )));
        }
        let b = self.mean.len();
        let denom = (self.count - 1) as f64;
        let mut cov = DMatrix::from_fn(b, b, |i, j| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            self.comoment[(lo, hi)] / denom
        });
        let ridge = shrinkage * cov.trace() / b as f64;
        for i in 0..b {
            cov[(i, i)] += ridge;
        }
        let factor = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::SingularModel("covariance is not positive definite".into()))?;
        let pivots = factor.l_dirty().diagonal().map(|v| v * v);
        let (lo, hi) = (pivots.min(), pivots.max());
        if lo.is_nan() || hi.is_nan() || lo <= PIVOT_TOL * hi {
            return Err(Error::SingularModel(format!(
                "covariance is numerically singular (pivot ratio {:.3e}); increase shrinkage",
                lo / hi
            )));
        }
        Ok(BackgroundModel {
            mean: self.mean,
            covariance: cov,
            shrinkage,
            factor,
        })
    }
}

/// Convenience wrapper scoring a single pixel.
pub fn ace_score(model: &BackgroundModel, target: &TargetSignature, x: &[f64]) -> Result<f64> {
    model.score(&model.prepare(target)?, x)
}

/// Per-pixel ACE scores of one frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AceMap {
    pub rows: usize,
    pub cols: usize,
    pub scores: Vec<f64>,
    /// Pixels equal to the background mean, scored as 0.
    pub undefined: usize,
}

impl AceMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.scores.iter().filter(|&&s| s > threshold).count()
    }

    /// Single-frame, single-band movie for HSCB output.
    pub fn to_movie(&self) -> Result<HyperspectralMovie> {
        HyperspectralMovie::new(
            1,
            self.rows,
            self.cols,
            1,
            None,
            self.scores.iter().map(|&s| s as f32).collect(),
        )
    }
}

pub fn ace_map(
    movie: &HyperspectralMovie,
    frame: usize,
    model: &BackgroundModel,
    target: &TargetSignature,
) -> Result<AceMap> {
    ace_map_with(Schedule::default(), movie, frame, model, target)
}

pub fn ace_map_with(
    schedule: Schedule,
    movie: &HyperspectralMovie,
    frame: usize,
    model: &BackgroundModel,
    target: &TargetSignature,
) -> Result<AceMap> {
    if movie.bands() != model.bands() {
        return Err(Error::DimensionMismatch(format!(
            "movie has {} bands, background model {}",
            movie.bands(),
            model.bands()
        )));
    }
    if frame >= movie.frames() {
        return Err(Error::Bounds(format!(
            "frame {frame} of {}",
            movie.frames()
        )));
    }
    let prepared = model.prepare(target)?;
    let rows = parallel::map_indexed(schedule, movie.rows(), |r| {
        let mut buf = vec![0.0; movie.bands()];
        (0..movie.cols())
            .map(|c| {
                for (dst, &v) in buf.iter_mut().zip(movie.pixel(frame, r, c)) {
                    *dst = f64::from(v);
                }
                match model.score(&prepared, &buf) {
                    Ok(s) => Ok(Some(s)),
                    Err(Error::UndefinedScore(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<Option<f64>>>>()
    });
    let mut scores = Vec::with_capacity(movie.rows() * movie.cols());
    let mut undefined = 0;
    for row in rows {
        for s in row? {
            scores.push(s.unwrap_or_else(|| {
                undefined += 1;
                0.0
            }));
        }
    }
    Ok(AceMap {
        rows: movie.rows(),
        cols: movie.cols(),
        scores,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_pixels(seed: u64, count: usize, bands: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                (0..bands)
                    .map(|b| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        3.0 + b as f64 + z * (1.0 + 0.2 * b as f64)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_pixel_fit() {
        let pixels = [vec![0.0, 0.0], vec![2.0, 2.0]];
        assert!(matches!(
            fit_background(&pixels, 0.0),
            Err(Error::SingularModel(_))
        ));
        let model = fit_background(&pixels, 0.1).unwrap();
        assert_eq!(model.mean().as_slice(), &[1.0, 1.0]);
        // [[2,2],[2,2]] plus 0.1 * trace/2 = 0.2 on the diagonal
        assert!((model.covariance()[(0, 0)] - 2.2).abs() < 1e-15);
        assert!((model.covariance()[(0, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_fits() {
        let same = vec![vec![1.0, 2.0, 3.0]; 10];
        assert!(matches!(
            fit_background(&same, 0.0),
            Err(Error::SingularModel(_))
        ));
        assert!(matches!(
            fit_background(&same[..1], 0.1),
            Err(Error::SingularModel(_))
        ));
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(fit_background(&empty, 0.1).is_err());
    }

    #[test]
    fn covariance_matches_two_pass_estimator() {
        let pixels = gaussian_pixels(3, 500, 4);
        let model = fit_background(&pixels, 0.0).unwrap();
        let m = pixels.len() as f64;
        let mean: Vec<f64> = (0..4)
            .map(|b| pixels.iter().map(|p| p[b]).sum::<f64>() / m)
            .collect();
        for i in 0..4 {
            assert!((model.mean()[i] - mean[i]).abs() < 1e-10);
            for j in 0..4 {
                let c = pixels
                    .iter()
                    .map(|p| (p[i] - mean[i]) * (p[j] - mean[j]))
                    .sum::<f64>()
                    / (m - 1.0);
                assert!((model.covariance()[(i, j)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn score_properties() {
        let pixels = gaussian_pixels(4, 200, 5);
        let model = fit_background(&pixels, DEFAULT_SHRINKAGE).unwrap();
        let s = TargetSignature::new(vec![9.0, 1.0, 4.0, 8.0, 2.0]).unwrap();
        assert_eq!(ace_score(&model, &s, &s.spectrum).unwrap(), 1.0);

        let mu = model.mean().as_slice().to_vec();
        assert!(matches!(
            ace_score(&model, &s, &mu),
            Err(Error::UndefinedScore(_))
        ));

        let x = vec![4.0, 2.0, 7.0, 1.0, 6.0];
        let base = ace_score(&model, &s, &x).unwrap();
        assert!((0.0..=1.0).contains(&base));
        for c in [-3.0, 0.5, 10.0] {
            let scaled: Vec<f64> = x.iter().zip(&mu).map(|(v, m)| m + c * (v - m)).collect();
            assert!((ace_score(&model, &s, &scaled).unwrap() - base).abs() < 1e-12);
        }
        let swapped = ace_score(
            &model,
            &TargetSignature::new(x.clone()).unwrap(),
            &s.spectrum,
        )
        .unwrap();
        assert!((swapped - base).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_in_whitened_space_scores_zero() {
        let pixels = gaussian_pixels(5, 300, 3);
        let model = fit_background(&pixels, 0.0).unwrap();
        let s = TargetSignature::new(vec![7.0, 1.0, 2.0]).unwrap();
        let l = model.factor.l();
        let sw = model.whiten(&s.spectrum);
        // pick a whitened vector orthogonal to sw and map it back through L
        let ortho = DVector::from_vec(vec![sw[1], -sw[0], 0.0]);
        let x = l * ortho + model.mean();
        assert!(ace_score(&model, &s, x.as_slice()).unwrap() < 1e-20);
    }

    #[test]
    fn map_marks_undefined_pixels() {
        let movie =
            HyperspectralMovie::from_fn(1, 2, 2, 2, |_, r, c, b| (r * 2 + c + b) as f32).unwrap();
        let pixels: Vec<Vec<f64>> = (0..2)
            .flat_map(|r| (0..2).map(move |c| (r, c)))
            .map(|(r, c)| movie.pixel(0, r, c).iter().map(|&v| f64::from(v)).collect())
            .collect();
        let model = fit_background(&pixels, 0.5).unwrap();
        let target = TargetSignature::new(vec![3.0, 5.0]).unwrap();
        let map = ace_map(&movie, 0, &model, &target).unwrap();
        assert_eq!(map.scores.len(), 4);
        assert_eq!(map.undefined, 0);
        assert!(ace_map(&movie, 1, &model, &target).is_err());
        let three = fit_background(
            &[
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 2.0],
                vec![0.0, 0.0, 1.0],
            ],
            0.5,
        )
        .unwrap();
        assert!(matches!(
            ace_map(
                &movie,
                0,
                &three,
                &TargetSignature::new(vec![1.0, 2.0, 3.0]).unwrap()
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn constant_target_frame_scores_one() {
        let s = [4.0f32, 1.0, 3.0];
        let movie = HyperspectralMovie::from_fn(1, 3, 3, 3, |_, _, _, b| s[b]).unwrap();
        let bg = gaussian_pixels(6, 100, 3);
        let model = fit_background(&bg, DEFAULT_SHRINKAGE).unwrap();
        let target = TargetSignature::new(s.iter().map(|&v| f64::from(v)).collect()).unwrap();
        let map = ace_map(&movie, 0, &model, &target).unwrap();
        assert!(map.scores.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn target_csv() {
        let t = TargetSignature::new(vec![1.5, -2.0, 1e-7]).unwrap();
        assert_eq!(TargetSignature::from_csv(&t.to_csv()).unwrap(), t);
        assert!(matches!(
            TargetSignature::from_csv("1\nx\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
