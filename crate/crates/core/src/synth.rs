//! Seeded synthetic plume movies.
//!
//! `value(f, r, c, b) = background(r, c, b) + profile(f) · amplitude[b] · g_f(r, c) + noise`
//! where `g_f` is an isotropic Gaussian centered at `center0 + drift · (f − onset)`.
//! The background is static: a base level plus a few smooth random fields
//! (low-pass filtered white noise), each mixed into the bands by its own
//! random spectrum. Noise is drawn from a ChaCha8 stream keyed by
//! `(seed, frame)`, so frames can be generated in any order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::KvConfig;
use crate::cube::HyperspectralMovie;
use crate::error::{Error, Result};
use crate::parallel::{self, Schedule};

const FIELD_STREAM: u64 = u64::from_be_bytes(*b"\0bgfield");
const NOISE_DOMAIN: u64 = u64::from_be_bytes(*b"\0\0\0noise");

#[derive(Debug, Clone, PartialEq)]
pub struct PlumeScenario {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub onset_frame: usize,
    pub release_duration: usize,
    /// Frames for the amplitude to fall by `1/e` after the peak.
    pub decay_tau: f64,
    pub plume_center0: (f64, f64),
    /// (rows, cols) per frame.
    pub drift_velocity: (f64, f64),
    pub sigma_spatial: f64,
    pub amplitude: Vec<f64>,
    /// Correlation length of the background fields, in pixels.
    pub background_smoothness: f64,
    pub background_level: f64,
    pub background_std: f64,
    pub background_components: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PlumeScenario {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(msg));
        if self.frames == 0 || self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return fail("scenario dimensions must be positive".into());
        }
        if self.release_duration == 0 {
            return fail("release_duration must be at least 1".into());
        }
        if self.onset_frame + self.release_duration > self.frames {
            return fail(format!(
                "onset_frame {} + release_duration {} exceeds {} frames",
                self.onset_frame, self.release_duration, self.frames
            ));
        }
        if self.sigma_spatial.is_nan() || self.sigma_spatial <= 0.0 {
            return fail(format!(
                "sigma_spatial must be > 0, got {}",
                self.sigma_spatial
            ));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 {
            return fail(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        if self.decay_tau.is_nan() || self.decay_tau <= 0.0 {
            return fail(format!("decay_tau must be > 0, got {}", self.decay_tau));
        }
        if [self.background_smoothness, self.background_std]
            .iter()
            .any(|v| v.is_nan() || *v < 0.0)
        {
            return fail("background smoothness and std must be >= 0".into());
        }
        if self.amplitude.len() != self.bands {
            return fail(format!(
                "amplitude has {} entries for {} bands",
                self.amplitude.len(),
                self.bands
            ));
        }
        let finite = [
            self.plume_center0.0,
            self.plume_center0.1,
            self.drift_velocity.0,
            self.drift_velocity.1,
            self.background_level,
        ];
        if finite.iter().chain(&self.amplitude).any(|v| !v.is_finite()) {
            return fail("scenario contains non-finite values".into());
        }
        Ok(())
    }

    /// Reads a scenario from flat `key = value` text. Keys not belonging to
    /// the scenario are ignored, so one file can also carry pipeline keys.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let pair = |key: &str| -> Result<(f64, f64)> {
            let v: Vec<f64> = cfg.require_list(key)?;
            match v.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::Config(format!(
                    "`{key}` needs two values, got {}",
                    v.len()
                ))),
            }
        };
        let bands: usize = cfg.require("bands")?;
        let mut amplitude: Vec<f64> = cfg.require_list("amplitude")?;
        if amplitude.len() == 1 && bands > 1 {
            amplitude = vec![amplitude[0]; bands];
        }
        let release_duration: usize = cfg.require("release_duration")?;
        let sc = Self {
            frames: cfg.require("frames")?,
            rows: cfg.require("rows")?,
            cols: cfg.require("cols")?,
            bands,
            onset_frame: cfg.require("onset_frame")?,
            release_duration,
            decay_tau: cfg.get_or("decay_tau", release_duration as f64)?,
            plume_center0: pair("plume_center0")?,
            drift_velocity: pair("drift_velocity")?,
            sigma_spatial: cfg.require("sigma_spatial")?,
            amplitude,
            background_smoothness: cfg.require("background_smoothness")?,
            background_level: cfg.get_or("background_level", 10.0)?,
            background_std: cfg.get_or("background_std", 1.0)?,
            background_components: cfg.get_or("background_components", 3)?,
            noise_sigma: cfg.require("noise_sigma")?,
            seed: cfg.require("seed")?,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_config(&KvConfig::parse(text)?)
    }

    /// Plume strength in `[0, 1]`: zero before onset, a linear ramp over the
    /// release reaching 1 at its last frame, then exponential decay.
    pub fn amplitude_profile(&self, frame: usize) -> f64 {
        if frame < self.onset_frame {
            return 0.0;
        }
        let peak = self.onset_frame + self.release_duration - 1;
        if frame <= peak {
            (frame - self.onset_frame + 1) as f64 / self.release_duration as f64
        } else {
            (-((frame - peak) as f64) / self.decay_tau).exp()
        }
    }

    pub fn center(&self, frame: usize) -> (f64, f64) {
        let t = frame.saturating_sub(self.onset_frame) as f64;
        (
            self.plume_center0.0 + self.drift_velocity.0 * t,
            self.plume_center0.1 + self.drift_velocity.1 * t,
        )
    }

    /// Noise-free plume term for one pixel, without the per-band amplitude.
    pub fn plume_shape(&self, frame: usize, row: usize, col: usize) -> f64 {
        let p = self.amplitude_profile(frame);
        if p == 0.0 {
            return 0.0;
        }
        let (cr, cc) = self.center(frame);
        let (dr, dc) = (row as f64 - cr, col as f64 - cc);
        p * (-(dr * dr + dc * dc) / (2.0 * self.sigma_spatial * self.sigma_spatial)).exp()
    }

    /// Largest per-band magnitude of the noise-free plume term.
    pub fn plume_strength(&self, frame: usize, row: usize, col: usize) -> f64 {
        let peak = self.amplitude.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        self.plume_shape(frame, row, col) * peak
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMovie {
    pub movie: HyperspectralMovie,
    /// `(frame, row, col)` row-major; true where the plume exceeds the noise level.
    pub mask: Vec<bool>,
}

impl SyntheticMovie {
    pub fn mask_at(&self, frame: usize, row: usize, col: usize) -> bool {
        let m = &self.movie;
        self.mask[(frame * m.rows() + row) * m.cols() + col]
    }

    /// Mask as a 0/1 single-band movie for HSCB output.
    pub fn mask_movie(&self) -> Result<HyperspectralMovie> {
        let m = &self.movie;
        HyperspectralMovie::new(
            m.frames(),
            m.rows(),
            m.cols(),
            1,
            None,
            self.mask
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

/// Static background, `(row, col, band)` row-major.
pub fn background(sc: &PlumeScenario) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(FIELD_STREAM);
    let pixels = sc.rows * sc.cols;
    let mut bg = vec![sc.background_level; pixels * sc.bands];
    for _ in 0..sc.background_components {
        let field = smooth_field(&mut rng, sc.rows, sc.cols, sc.background_smoothness);
        let spectrum: Vec<f64> = (0..sc.bands).map(|_| rng.random_range(0.5..1.5)).collect();
        for (px, &v) in field.iter().enumerate() {
            for (b, s) in spectrum.iter().enumerate() {
                bg[px * sc.bands + b] += sc.background_std * v * s;
            }
        }
    }
    bg
}

/// White noise blurred by a Gaussian of standard deviation `length`,
/// normalized to zero mean and unit variance. The noise is drawn on a grid
/// padded by three widths so the borders see a full kernel.
fn smooth_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize, length: f64) -> Vec<f64> {
    let radius = (3.0 * length).ceil() as usize;
    let (pr, pc) = (rows + 2 * radius, cols + 2 * radius);
    let noise: Vec<f64> = (0..pr * pc).map(|_| StandardNormal.sample(rng)).collect();
    let kernel: Vec<f64> = if radius == 0 {
        vec![1.0]
    } else {
        (0..=2 * radius)
            .map(|i| {
                let x = i as f64 - radius as f64;
                (-(x * x) / (2.0 * length * length)).exp()
            })
            .collect()
    };
    // along columns, keeping all padded rows
    let mut horiz = vec![0.0; pr * cols];
    for r in 0..pr {
        for c in 0..cols {
            horiz[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * noise[r * pc + c + k])
                .sum();
        }
    }
    let mut field = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            field[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * horiz[(r + k) * cols + c])
                .sum();
        }
    }
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let std = (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if std > 0.0 { 1.0 / std } else { 0.0 };
    field.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    field
}

pub fn generate(sc: &PlumeScenario) -> Result<SyntheticMovie> {
    generate_with(Schedule::default(), sc)
}

pub fn generate_with(schedule: Schedule, sc: &PlumeScenario) -> Result<SyntheticMovie> {
    sc.validate()?;
    let bg = background(sc);
    let frames = parallel::map_indexed(schedule, sc.frames, |f| {
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ NOISE_DOMAIN);
        rng.set_stream(f as u64);
        let mut values = Vec::with_capacity(bg.len());
        let mut mask = Vec::with_capacity(sc.rows * sc.cols);
        for r in 0..sc.rows {
            for c in 0..sc.cols {
                let shape = sc.plume_shape(f, r, c);
                mask.push(sc.plume_strength(f, r, c) > sc.noise_sigma);
                let base = (r * sc.cols + c) * sc.bands;
                for b in 0..sc.bands {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let v = bg[base + b] + shape * sc.amplitude[b] + sc.noise_sigma * z;
                    values.push(v as f32);
                }
            }
        }
        (values, mask)
    });
    let mut values = Vec::with_capacity(sc.frames * bg.len());
    let mut mask = Vec::with_capacity(sc.frames * sc.rows * sc.cols);
    for (v, m) in frames {
        values.extend(v);
        mask.extend(m);
    }
    let movie = HyperspectralMovie::new(sc.frames, sc.rows, sc.cols, sc.bands, None, values)?;
    Ok(SyntheticMovie { movie, mask })
}

/// Scenario files shipped with the crate, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "tep-onset" => Some(include_str!("../scenarios/tep-onset.conf")),
        "mes-loop" => Some(include_str!("../scenarios/mes-loop.conf")),
        "tep-561" => Some(include_str!("../scenarios/tep-561.conf")),
        _ => None,
    }
}

pub const BUNDLED: [&str; 3] = ["tep-onset", "mes-loop", "tep-561"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::remove_background;

    fn small() -> PlumeScenario {
        PlumeScenario {
            frames: 12,
            rows: 10,
            cols: 14,
            bands: 4,
            onset_frame: 4,
            release_duration: 3,
            decay_tau: 2.0,
            plume_center0: (5.0, 4.0),
            drift_velocity: (0.0, 1.0),
            sigma_spatial: 2.0,
            amplitude: vec![3.0, -1.0, 2.0, 0.5],
            background_smoothness: 2.5,
            background_level: 10.0,
            background_std: 1.0,
            background_components: 3,
            noise_sigma: 0.05,
            seed: 42,
        }
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let sc = small();
        let a = generate_with(Schedule::Parallel, &sc).unwrap();
        let b = generate_with(Schedule::Sequential, &sc).unwrap();
        assert_eq!(
            a.movie.to_hscb_bytes().unwrap(),
            b.movie.to_hscb_bytes().unwrap()
        );
        assert_eq!(a.mask, b.mask);
        let mut other = sc.clone();
        other.seed = 43;
        assert_ne!(generate(&other).unwrap().movie, a.movie);
    }

    #[test]
    fn profile_shape() {
        let sc = small();
        let p: Vec<f64> = (0..8).map(|f| sc.amplitude_profile(f)).collect();
        assert_eq!(&p[..4], &[0.0; 4]);
        assert!((p[4] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p[6], 1.0);
        assert!((p[7] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn noise_free_construction() {
        let mut sc = small();
        sc.noise_sigma = 0.0;
        let out = generate(&sc).unwrap();
        let m = &out.movie;
        assert_eq!(m.frame(sc.onset_frame - 1), m.frame(0));
        let peak = sc.onset_frame + sc.release_duration - 1;
        let (cr, cc) = sc.center(peak);
        for r in 0..sc.rows {
            for c in 0..sc.cols {
                let g = (-((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)) / 8.0).exp();
                for b in 0..sc.bands {
                    let diff = f64::from(m.value(peak, r, c, b)) - f64::from(m.value(0, r, c, b));
                    assert!(
                        (diff - g * sc.amplitude[b]).abs() < 1e-5,
                        "{diff} vs {}",
                        g * sc.amplitude[b]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_amplitude_is_background_plus_noise() {
        let mut sc = small();
        sc.amplitude = vec![0.0; 4];
        sc.frames = 60;
        sc.noise_sigma = 0.2;
        let out = generate(&sc).unwrap();
        assert!(out.mask.iter().all(|&b| !b));
        let clean = remove_background(&out.movie, 0..60).unwrap();
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..sc.rows {
            for c in 0..sc.cols {
                for b in 0..sc.bands {
                    let var = (0..60)
                        .map(|f| f64::from(clean.value(f, r, c, b)).powi(2))
                        .sum::<f64>()
                        / 59.0;
                    total += var.sqrt();
                    count += 1;
                }
            }
        }
        let mean_std = total / count as f64;
        assert!((mean_std - 0.2).abs() < 0.01, "{mean_std}");
    }

    #[test]
    fn mask_consistency() {
        let sc = small();
        let out = generate(&sc).unwrap();
        for f in 0..sc.frames {
            for r in 0..sc.rows {
                for c in 0..sc.cols {
                    assert_eq!(
                        out.mask_at(f, r, c),
                        sc.plume_strength(f, r, c) > sc.noise_sigma
                    );
                }
            }
        }
        assert!(out.mask_at(6, 5, 6));
        assert!((0..4).all(|f| (0..10).all(|r| (0..14).all(|c| !out.mask_at(f, r, c)))));
        let mm = out.mask_movie().unwrap();
        assert_eq!(mm.bands(), 1);
        assert_eq!(mm.value(6, 5, 6, 0), 1.0);
    }

    #[test]
    fn invalid_scenarios() {
        let mut sc = small();
        sc.onset_frame = 11;
        assert!(generate(&sc).is_err());
        let mut sc = small();
        sc.sigma_spatial = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = small();
        sc.noise_sigma = -1.0;
        assert!(sc.validate().is_err());
        let mut sc = small();
        sc.amplitude.pop();
        assert!(sc.validate().is_err());
    }

    #[test]
    fn config_parsing() {
        let err = PlumeScenario::parse("frames = 3").unwrap_err();
        assert!(err.to_string().contains("`bands`"), "{err}");
        for name in BUNDLED {
            let sc = PlumeScenario::parse(bundled(name).unwrap()).unwrap();
            assert!(sc.frames > 0, "{name}");
        }
        assert!(bundled("nope").is_none());
    }
}
