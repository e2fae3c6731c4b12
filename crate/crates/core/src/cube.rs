//! Hyperspectral movies, the HSCB container format, and patch extraction.
//!
//! A movie is a dense `(frame, row, col, band)` array of 32-bit radiance
//! values. Patches are spatial rectangles restricted to a band subset; each
//! one becomes an `n × k` matrix whose column `j` is the vectorized spatial
//! patch at `band_indices[j]` (row-major, spatial row varies slowest).

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::parallel::{self, Schedule};

pub const HSCB_MAGIC: &[u8; 4] = b"HSCB";
pub const HSCB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralMovie {
    frames: usize,
    rows: usize,
    cols: usize,
    bands: usize,
    wavelengths: Option<Vec<f64>>,
    values: Vec<f32>,
}

impl HyperspectralMovie {
    pub fn new(
        frames: usize,
        rows: usize,
        cols: usize,
        bands: usize,
        wavelengths: Option<Vec<f64>>,
        values: Vec<f32>,
    ) -> Result<Self> {
        let expected = frames
            .checked_mul(rows)
            .and_then(|v| v.checked_mul(cols))
            .and_then(|v| v.checked_mul(bands))
            .ok_or_else(|| Error::Invariant("movie dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(Error::Invariant(format!(
                "expected {expected} values for {frames}x{rows}x{cols}x{bands}, got {}",
                values.len()
            )));
        }
        if let Some(w) = &wavelengths {
            if w.len() != bands {
                return Err(Error::Invariant(format!(
                    "{} wavelengths for {bands} bands",
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::Invariant(format!(
                    "wavelength {bad} is not strictly positive: {}",
                    w[bad]
                )));
            }
        }
        let movie = Self {
            frames,
            rows,
            cols,
            bands,
            wavelengths,
            values,
        };
        if let Some(idx) = movie.values.iter().position(|v| !v.is_finite()) {
            let (f, r, c, b) = movie.unravel(idx);
            return Err(Error::Data(format!(
                "non-finite value {} at (frame {f}, row {r}, col {c}, band {b})",
                movie.values[idx]
            )));
        }
        Ok(movie)
    }

    /// Builds a movie by evaluating `f(frame, row, col, band)` everywhere.
    pub fn from_fn(
        frames: usize,
        rows: usize,
        cols: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(frames * rows * cols * bands);
        for fr in 0..frames {
            for r in 0..rows {
                for c in 0..cols {
                    for b in 0..bands {
                        values.push(f(fr, r, c, b));
                    }
                }
            }
        }
        Self::new(frames, rows, cols, bands, None, values)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        self.wavelengths = Some(wavelengths);
        Self::new(
            self.frames,
            self.rows,
            self.cols,
            self.bands,
            self.wavelengths,
            self.values,
        )
    }

    #[inline]
    pub fn index(&self, frame: usize, row: usize, col: usize, band: usize) -> usize {
        ((frame * self.rows + row) * self.cols + col) * self.bands + band
    }

    fn unravel(&self, mut idx: usize) -> (usize, usize, usize, usize) {
        let b = idx % self.bands;
        idx /= self.bands;
        let c = idx % self.cols;
        idx /= self.cols;
        let r = idx % self.rows;
        (idx / self.rows, r, c, b)
    }

    #[inline]
    pub fn value(&self, frame: usize, row: usize, col: usize, band: usize) -> f32 {
        self.values[self.index(frame, row, col, band)]
    }

    /// Spectrum of one pixel.
    pub fn pixel(&self, frame: usize, row: usize, col: usize) -> &[f32] {
        let start = self.index(frame, row, col, 0);
        &self.values[start..start + self.bands]
    }

    /// One frame as a contiguous `(row, col, band)` slice.
    pub fn frame(&self, frame: usize) -> &[f32] {
        let len = self.rows * self.cols * self.bands;
        &self.values[frame * len..(frame + 1) * len]
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes the movie in HSCB format.
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Invariant(format!(
                "refusing to write empty movie ({}x{}x{}x{})",
                self.frames, self.rows, self.cols, self.bands
            )));
        }
        let bytes = self.to_hscb_bytes()?;
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_hscb_bytes(&bytes)
    }

    pub fn to_hscb_bytes(&self) -> Result<Vec<u8>> {
        let dim = |v: usize, name: &str| {
            u32::try_from(v).map_err(|_| Error::Invariant(format!("{name} = {v} exceeds u32")))
        };
        let mut out = Vec::with_capacity(25 + self.bands * 8 + self.values.len() * 4);
        out.extend_from_slice(HSCB_MAGIC);
        out.extend_from_slice(&HSCB_VERSION.to_le_bytes());
        out.extend_from_slice(&dim(self.frames, "frames")?.to_le_bytes());
        out.extend_from_slice(&dim(self.rows, "rows")?.to_le_bytes());
        out.extend_from_slice(&dim(self.cols, "cols")?.to_le_bytes());
        out.extend_from_slice(&dim(self.bands, "bands")?.to_le_bytes());
        match &self.wavelengths {
            Some(w) => {
                out.push(1);
                for v in w {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.push(0),
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_hscb_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ByteReader { bytes, pos: 0 };
        let magic = reader.take(4, "magic")?;
        if magic != HSCB_MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {:?}", String::from_utf8_lossy(magic)),
            });
        }
        let version = reader.u32("version")?;
        if version != HSCB_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let frames = reader.u32("frames")? as usize;
        let rows = reader.u32("rows")? as usize;
        let cols = reader.u32("cols")? as usize;
        let bands = reader.u32("bands")? as usize;
        let flag_offset = reader.pos as u64;
        let flag = reader.take(1, "wavelength flag")?[0];
        let wavelengths = match flag {
            0 => None,
            1 => {
                let mut w = Vec::with_capacity(bands);
                for _ in 0..bands {
                    let raw = reader.take(8, "wavelengths")?;
                    w.push(f64::from_le_bytes(raw.try_into().unwrap()));
                }
                Some(w)
            }
            other => {
                return Err(Error::Format {
                    offset: flag_offset,
                    message: format!("wavelength flag must be 0 or 1, got {other}"),
                })
            }
        };
        let header_end = reader.pos as u64;
        let count = (frames as u64)
            .checked_mul(rows as u64)
            .and_then(|v| v.checked_mul(cols as u64))
            .and_then(|v| v.checked_mul(bands as u64))
            .filter(|&v| v.checked_mul(4).is_some_and(|b| b <= usize::MAX as u64))
            .ok_or_else(|| Error::Format {
                offset: 8,
                message: format!("dimensions {frames}x{rows}x{cols}x{bands} overflow"),
            })?;
        if count == 0 {
            return Err(Error::Format {
                offset: 8,
                message: format!("empty movie {frames}x{rows}x{cols}x{bands}"),
            });
        }
        let payload_len = count as usize * 4;
        let remaining = bytes.len() - reader.pos;
        if remaining < payload_len {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!(
                    "truncated payload: expected {payload_len} bytes after offset {header_end}, found {remaining}"
                ),
            });
        }
        if remaining > payload_len {
            return Err(Error::Format {
                offset: header_end + payload_len as u64,
                message: format!("{} trailing bytes", remaining - payload_len),
            });
        }
        let values: Vec<f32> = bytes[reader.pos..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(w) = &wavelengths {
            if let Some(bad) = w.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::Data(format!(
                    "wavelength {bad} is not strictly positive: {}",
                    w[bad]
                )));
            }
        }
        Self::new(frames, rows, cols, bands, wavelengths, values)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                message: format!("truncated while reading {what} at offset {}", self.pos),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Spatial rectangle (inclusive bounds) plus an ordered band subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSpec {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
    pub band_indices: Vec<usize>,
}

impl PatchSpec {
    /// Validates the rectangle and band list and enforces `k < n/2 - 1`.
    pub fn new(
        row_start: usize,
        row_end: usize,
        col_start: usize,
        col_end: usize,
        band_indices: Vec<usize>,
    ) -> Result<Self> {
        let spec =
            Self::new_without_rank_rule(row_start, row_end, col_start, col_end, band_indices)?;
        let (n, k) = (spec.n(), spec.k());
        if (k as f64) >= n as f64 / 2.0 - 1.0 {
            return Err(Error::Invariant(format!(
                "patch with n = {n} spatial samples and k = {k} bands violates k < n/2 - 1"
            )));
        }
        Ok(spec)
    }

    /// Same as [`PatchSpec::new`] but without the `k < n/2 - 1` rule, for
    /// experiments that deliberately use wide band sets.
    pub fn new_without_rank_rule(
        row_start: usize,
        row_end: usize,
        col_start: usize,
        col_end: usize,
        band_indices: Vec<usize>,
    ) -> Result<Self> {
        if row_start > row_end || col_start > col_end {
            return Err(Error::Invariant(format!(
                "empty rectangle rows {row_start}..={row_end}, cols {col_start}..={col_end}"
            )));
        }
        if band_indices.is_empty() {
            return Err(Error::Invariant("band list is empty".into()));
        }
        let mut sorted = band_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invariant(format!(
                "band indices must be distinct: {band_indices:?}"
            )));
        }
        Ok(Self {
            row_start,
            row_end,
            col_start,
            col_end,
            band_indices,
        })
    }

    pub fn patch_rows(&self) -> usize {
        self.row_end - self.row_start + 1
    }

    pub fn patch_cols(&self) -> usize {
        self.col_end - self.col_start + 1
    }

    pub fn n(&self) -> usize {
        self.patch_rows() * self.patch_cols()
    }

    pub fn k(&self) -> usize {
        self.band_indices.len()
    }

    pub fn check_against(&self, movie: &HyperspectralMovie) -> Result<()> {
        if self.row_end >= movie.rows() || self.col_end >= movie.cols() {
            return Err(Error::Bounds(format!(
                "patch rows {}..={} cols {}..={} outside {}x{} frame",
                self.row_start,
                self.row_end,
                self.col_start,
                self.col_end,
                movie.rows(),
                movie.cols()
            )));
        }
        if let Some(&b) = self.band_indices.iter().find(|&&b| b >= movie.bands()) {
            return Err(Error::Bounds(format!(
                "band {b} out of range for {} bands",
                movie.bands()
            )));
        }
        Ok(())
    }
}

/// Raw `n × k` patch matrix; column `j` holds band `band_indices[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    entries: DMatrix<f64>,
}

impl PatchMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "patch matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Extracts one patch from one frame.
pub fn extract_patch(
    movie: &HyperspectralMovie,
    frame: usize,
    spec: &PatchSpec,
) -> Result<PatchMatrix> {
    if frame >= movie.frames() {
        return Err(Error::Bounds(format!(
            "frame {frame} out of range for {} frames",
            movie.frames()
        )));
    }
    spec.check_against(movie)?;
    let pcols = spec.patch_cols();
    let entries = DMatrix::from_fn(spec.n(), spec.k(), |i, j| {
        let r = spec.row_start + i / pcols;
        let c = spec.col_start + i % pcols;
        f64::from(movie.value(frame, r, c, spec.band_indices[j]))
    });
    Ok(PatchMatrix { entries })
}

/// One patch per frame at a fixed location.
pub fn patch_series(movie: &HyperspectralMovie, spec: &PatchSpec) -> Result<Vec<PatchMatrix>> {
    patch_series_with(Schedule::default(), movie, spec)
}

pub fn patch_series_with(
    schedule: Schedule,
    movie: &HyperspectralMovie,
    spec: &PatchSpec,
) -> Result<Vec<PatchMatrix>> {
    spec.check_against(movie)?;
    parallel::map_indexed(schedule, movie.frames(), |f| extract_patch(movie, f, spec))
        .into_iter()
        .collect()
}

/// A window of `window_cols` columns sliding in steps of `stride` across
/// `[col_start, col_end]` at a fixed row band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlidingWindow {
    pub row_start: usize,
    pub row_end: usize,
    pub col_start: usize,
    pub col_end: usize,
    pub window_cols: usize,
    pub stride: usize,
    pub band_indices: Vec<usize>,
}

impl SlidingWindow {
    pub fn count(&self) -> Result<usize> {
        if self.stride == 0 {
            return Err(Error::Invariant("stride must be at least 1".into()));
        }
        if self.window_cols == 0 || self.col_start > self.col_end {
            return Err(Error::Bounds("empty window or column range".into()));
        }
        let width = self.col_end - self.col_start + 1;
        if self.window_cols > width {
            return Err(Error::Bounds(format!(
                "window of {} columns wider than range {}..={}",
                self.window_cols, self.col_start, self.col_end
            )));
        }
        Ok((width - self.window_cols) / self.stride + 1)
    }

    /// Patch specs in sliding order.
    pub fn specs(&self) -> Result<Vec<PatchSpec>> {
        let count = self.count()?;
        (0..count)
            .map(|i| {
                let start = self.col_start + i * self.stride;
                PatchSpec::new(
                    self.row_start,
                    self.row_end,
                    start,
                    start + self.window_cols - 1,
                    self.band_indices.clone(),
                )
            })
            .collect()
    }
}

pub fn sliding_window_series(
    movie: &HyperspectralMovie,
    frame: usize,
    window: &SlidingWindow,
) -> Result<Vec<PatchMatrix>> {
    let specs = window.specs()?;
    parallel::map_slice(Schedule::default(), &specs, |s| {
        extract_patch(movie, frame, s)
    })
    .into_iter()
    .collect()
}

/// Subtracts the per-pixel, per-band temporal mean over `pre_burst`.
pub fn remove_background(
    movie: &HyperspectralMovie,
    pre_burst: Range<usize>,
) -> Result<HyperspectralMovie> {
    if pre_burst.is_empty() {
        return Err(Error::Invariant(format!(
            "empty pre-burst range {pre_burst:?}"
        )));
    }
    if pre_burst.end > movie.frames() {
        return Err(Error::Bounds(format!(
            "pre-burst range {pre_burst:?} exceeds {} frames",
            movie.frames()
        )));
    }
    let frame_len = movie.rows() * movie.cols() * movie.bands();
    let mut mean = vec![0.0f64; frame_len];
    for f in pre_burst.clone() {
        for (m, &v) in mean.iter_mut().zip(movie.frame(f)) {
            *m += f64::from(v);
        }
    }
    let count = pre_burst.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    let values = movie
        .values()
        .chunks_exact(frame_len)
        .flat_map(|frame| {
            frame
                .iter()
                .zip(&mean)
                .map(|(&v, &m)| (f64::from(v) - m) as f32)
        })
        .collect();
    HyperspectralMovie::new(
        movie.frames(),
        movie.rows(),
        movie.cols(),
        movie.bands(),
        movie.wavelengths.clone(),
        values,
    )
}
