//! The subcommands. Each reads a [`PipelineConfig`], writes its artifacts
//! into the output directory and reports what it wrote.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use grassfire::cube::{extract_patch, remove_background, sliding_window_series};
use grassfire::detection::{ace_map, fit_background_frames, AceMap, TargetSignature};
use grassfire::distance::format_f64;
use grassfire::grassmann::{distance_matrix, embed};
use grassfire::parallel::map_indexed;
use grassfire::persistence::rips_barcode;
use grassfire::synth::{generate, SyntheticMovie};
use grassfire::{Barcode, DistanceMatrix, Error, GrassmannPoint, HyperspectralMovie, Schedule};
use sha2::{Digest, Sha256};

use crate::error::{CliResult, StageExt};
use crate::plot::render_svg;
use crate::report::component_report;
use crate::settings::{outputs, AceTarget, DegeneratePolicy, PipelineConfig, SeriesMode, Source};

/// Asymmetry tolerated when reading a distance matrix from disk.
pub const INPUT_SYMMETRY_TOL: f64 = 1e-9;

/// What a subcommand wrote and anything worth telling the user.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    /// File names relative to the output directory, in write order.
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

struct Writer<'a> {
    cfg: &'a PipelineConfig,
    outcome: Outcome,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a PipelineConfig) -> grassfire::Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir).map_err(|e| io_error(&cfg.output_dir, e))?;
        Ok(Self {
            cfg,
            outcome: Outcome::default(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> grassfire::Result<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.outcome.artifacts.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, note: String) {
        self.outcome.notes.push(note);
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generates the configured scenario and writes the movie and its plume mask.
pub fn synth(cfg: &PipelineConfig) -> CliResult<Outcome> {
    let scenario = cfg.require_scenario().stage("config")?;
    let mut w = Writer::new(cfg).stage("output")?;
    let syn = generate(scenario).stage("synth")?;
    write_synthetic(&mut w, &syn).stage("synth")?;
    Ok(w.outcome)
}

fn write_synthetic(w: &mut Writer, syn: &SyntheticMovie) -> grassfire::Result<()> {
    w.write(outputs::MOVIE, &syn.movie.to_hscb_bytes()?)?;
    w.write(outputs::MASK, &syn.mask_movie()?.to_hscb_bytes()?)?;
    let masked = syn.mask.iter().filter(|&&b| b).count();
    w.note(format!(
        "{} frames of {}x{}x{}, {masked} plume pixels in mask",
        syn.movie.frames(),
        syn.movie.rows(),
        syn.movie.cols(),
        syn.movie.bands()
    ));
    Ok(())
}

/// Embeds the configured series and writes its distance matrix.
pub fn embed_series(cfg: &PipelineConfig) -> CliResult<Outcome> {
    cfg.require_series().stage("config")?;
    let mut w = Writer::new(cfg).stage("output")?;
    let movie = acquire(cfg, None)?;
    let movie = background_removal(cfg, movie)?;
    run_embed(&mut w, &movie)?;
    Ok(w.outcome)
}

/// Computes the barcode (and optional component reports) of a distance
/// matrix file: `distance_matrix`, or the embed output in the output directory.
pub fn persist(cfg: &PipelineConfig) -> CliResult<Outcome> {
    let input = cfg
        .distance_matrix
        .clone()
        .unwrap_or_else(|| cfg.output(outputs::DISTANCES));
    let mut w = Writer::new(cfg).stage("output")?;
    let d = DistanceMatrix::read_csv(&input, INPUT_SYMMETRY_TOL).stage("persist")?;
    write_persistence(&mut w, &d, outputs::BARCODE, true).stage("persist")?;
    Ok(w.outcome)
}

/// Renders a barcode file: `barcode`, or the persist output in the output
/// directory.
pub fn plot(cfg: &PipelineConfig) -> CliResult<Outcome> {
    let input = cfg
        .barcode
        .clone()
        .unwrap_or_else(|| cfg.output(outputs::BARCODE));
    let mut w = Writer::new(cfg).stage("output")?;
    let barcode = Barcode::read_csv(&input).stage("plot")?;
    w.write(outputs::PLOT, render_svg(&barcode).as_bytes())
        .stage("plot")?;
    Ok(w.outcome)
}

/// Scores every frame against the target and writes the score cube and the
/// per-frame detection summary.
pub fn ace(cfg: &PipelineConfig) -> CliResult<Outcome> {
    cfg.require_ace().stage("config")?;
    let mut w = Writer::new(cfg).stage("output")?;
    let movie = acquire(cfg, None)?;
    run_ace(&mut w, &movie).stage("ace")?;
    Ok(w.outcome)
}

/// Runs every stage in order and writes a manifest of content hashes.
pub fn pipeline(cfg: &PipelineConfig) -> CliResult<Outcome> {
    cfg.require_series().stage("config")?;
    if cfg.ace_enabled {
        cfg.require_ace().stage("config")?;
    }
    let mut w = Writer::new(cfg).stage("output")?;
    let movie = acquire(cfg, Some(&mut w))?;
    let processed = if cfg.background_removal {
        Some(background_removal(cfg, movie.clone())?)
    } else {
        None
    };
    let embedded = run_embed(&mut w, processed.as_ref().unwrap_or(&movie))?;
    drop(processed);
    for (d, barcode_name, plot_name, reports) in [
        (Some(embedded.main), outputs::BARCODE, outputs::PLOT, true),
        (
            embedded.reference,
            outputs::REFERENCE_BARCODE,
            outputs::REFERENCE_PLOT,
            false,
        ),
    ] {
        let Some(d) = d else { continue };
        let barcode = write_persistence(&mut w, &d, barcode_name, reports).stage("persist")?;
        w.write(plot_name, render_svg(&barcode).as_bytes())
            .stage("plot")?;
    }
    if cfg.ace_enabled {
        run_ace(&mut w, &movie).stage("ace")?;
    }
    let manifest = manifest(cfg, &w.outcome.artifacts).stage("manifest")?;
    w.write(outputs::MANIFEST, manifest.as_bytes())
        .stage("manifest")?;
    Ok(w.outcome)
}

/// Loads or generates the movie. When `w` is given, a generated movie and
/// its mask are written out as pipeline artifacts.
fn acquire(cfg: &PipelineConfig, w: Option<&mut Writer>) -> CliResult<HyperspectralMovie> {
    match cfg.require_source().stage("config")? {
        Source::Movie(path) => HyperspectralMovie::load(path).stage("load"),
        Source::Synthetic(sc) => {
            let syn = generate(sc).stage("synth")?;
            if let Some(w) = w {
                write_synthetic(w, &syn).stage("synth")?;
            }
            Ok(syn.movie)
        }
    }
}

fn background_removal(
    cfg: &PipelineConfig,
    movie: HyperspectralMovie,
) -> CliResult<HyperspectralMovie> {
    match (&cfg.pre_burst, cfg.background_removal) {
        (Some(range), true) => remove_background(&movie, range.clone()).stage("background-removal"),
        _ => Ok(movie),
    }
}

struct Embedded {
    main: DistanceMatrix,
    reference: Option<DistanceMatrix>,
}

fn run_embed(w: &mut Writer, movie: &HyperspectralMovie) -> CliResult<Embedded> {
    let cfg = w.cfg;
    let (main, reference) = match cfg.require_series().stage("config")? {
        SeriesMode::PatchSeries(spec) => {
            spec.check_against(movie).stage("embed")?;
            let points = embed_each(cfg, movie.frames(), "frame", |f| {
                extract_patch(movie, f, spec).and_then(|p| embed(&p))
            })
            .stage("embed")?;
            (points, None)
        }
        SeriesMode::SlidingWindow {
            window,
            frame,
            reference_frame,
        } => {
            let series = |frame: usize| {
                let patches = sliding_window_series(movie, frame, window)?;
                embed_each(cfg, patches.len(), "window", |i| embed(&patches[i]))
            };
            let main = series(*frame).stage("embed")?;
            let reference = reference_frame.map(series).transpose().stage("embed")?;
            (main, reference)
        }
    };
    let mut finish =
        |series: EmbeddedSeries, matrix: &str, index: &str| -> CliResult<DistanceMatrix> {
            let d = distance_matrix(&series.points, cfg.metric).stage("distmat")?;
            w.write(matrix, d.to_csv().as_bytes()).stage("distmat")?;
            w.write(index, series.index_csv().as_bytes())
                .stage("embed")?;
            if !series.skipped.is_empty() {
                w.note(format!(
                    "skipped {} degenerate {}(s): {:?}",
                    series.skipped.len(),
                    series.label,
                    series.skipped
                ));
            }
            Ok(d)
        };
    let main = finish(main, outputs::DISTANCES, outputs::SERIES)?;
    let reference = reference
        .map(|r| finish(r, outputs::REFERENCE_DISTANCES, outputs::REFERENCE_SERIES))
        .transpose()?;
    Ok(Embedded { main, reference })
}

struct EmbeddedSeries {
    label: &'static str,
    points: Vec<GrassmannPoint>,
    /// Source index (frame or window) of each point.
    kept: Vec<usize>,
    skipped: Vec<usize>,
    total: usize,
}

impl EmbeddedSeries {
    /// `index,row`: matrix row per source index, `skipped` where dropped.
    fn index_csv(&self) -> String {
        let mut rows = vec![None; self.total];
        for (row, &idx) in self.kept.iter().enumerate() {
            rows[idx] = Some(row);
        }
        let mut s = format!("{},row\n", self.label);
        for (idx, row) in rows.iter().enumerate() {
            match row {
                Some(r) => {
                    let _ = writeln!(s, "{idx},{r}");
                }
                None => {
                    let _ = writeln!(s, "{idx},skipped");
                }
            }
        }
        s
    }
}

fn embed_each<F>(
    cfg: &PipelineConfig,
    count: usize,
    label: &'static str,
    f: F,
) -> grassfire::Result<EmbeddedSeries>
where
    F: Fn(usize) -> grassfire::Result<GrassmannPoint> + Sync + Send,
{
    let results = map_indexed(Schedule::default(), count, f);
    let mut series = EmbeddedSeries {
        label,
        points: Vec::with_capacity(count),
        kept: Vec::with_capacity(count),
        skipped: Vec::new(),
        total: count,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                series.points.push(p);
                series.kept.push(i);
            }
            Err(Error::DegeneratePatch(msg)) => match cfg.on_degenerate {
                DegeneratePolicy::Abort => {
                    return Err(Error::DegeneratePatch(format!("{label} {i}: {msg}")))
                }
                DegeneratePolicy::Skip => series.skipped.push(i),
            },
            Err(e) => return Err(e),
        }
    }
    if series.points.is_empty() {
        return Err(Error::Data(format!("no {label} could be embedded")));
    }
    Ok(series)
}

fn write_persistence(
    w: &mut Writer,
    d: &DistanceMatrix,
    barcode_name: &str,
    reports: bool,
) -> grassfire::Result<Barcode> {
    let cfg = w.cfg;
    let scale_max = cfg.scale_max.resolve(d.max_entry());
    let barcode = rips_barcode(d, scale_max)?;
    w.write(barcode_name, barcode.to_csv().as_bytes())?;
    if reports && !cfg.epsilons.is_empty() {
        w.write(
            outputs::COMPONENTS,
            component_report(d, &cfg.epsilons).as_bytes(),
        )?;
    }
    let diag = barcode.diagnostics();
    w.note(format!(
        "{barcode_name}: {} points, scale_max {}, {} dim-0 and {} dim-1 bars, longest dim-1 persistence {}",
        d.len(),
        format_f64(scale_max),
        barcode.dim(0).count(),
        barcode.dim(1).count(),
        format_f64(barcode.max_persistence(1)),
    ));
    if diag.zero_persistence_h0 + diag.zero_persistence_h1 > 0 {
        w.note(format!(
            "{barcode_name}: dropped {} dim-0 and {} dim-1 zero-length pairs",
            diag.zero_persistence_h0, diag.zero_persistence_h1
        ));
    }
    Ok(barcode)
}

/// Per-frame ACE maps of the whole movie.
pub struct AceRun {
    pub maps: Vec<AceMap>,
    pub threshold: f64,
}

impl AceRun {
    pub fn first_detection(&self) -> Option<usize> {
        self.maps
            .iter()
            .position(|m| m.count_above(self.threshold) > 0)
    }

    /// `frame,max_score,pixels_above,undefined`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("frame,max_score,pixels_above,undefined\n");
        for (f, m) in self.maps.iter().enumerate() {
            let _ = writeln!(
                s,
                "{f},{},{},{}",
                format_f64(m.max()),
                m.count_above(self.threshold),
                m.undefined
            );
        }
        s
    }

    /// All maps stacked into one single-band movie.
    pub fn to_movie(&self) -> grassfire::Result<HyperspectralMovie> {
        let (rows, cols) = self.maps.first().map_or((0, 0), |m| (m.rows, m.cols));
        let values = self
            .maps
            .iter()
            .flat_map(|m| m.scores.iter().map(|&s| s as f32))
            .collect();
        HyperspectralMovie::new(self.maps.len(), rows, cols, 1, None, values)
    }
}

/// Fits the background model and scores every frame; pure computation.
pub fn compute_ace(
    cfg: &PipelineConfig,
    movie: &HyperspectralMovie,
) -> grassfire::Result<(AceRun, TargetSignature)> {
    let ace = cfg.require_ace()?;
    let model = fit_background_frames(movie, ace.model_frames.clone(), ace.shrinkage)?;
    let target = match &ace.target {
        AceTarget::File(path) => TargetSignature::read_csv(path)?,
        AceTarget::Scenario => {
            let Some(Source::Synthetic(sc)) = &cfg.source else {
                return Err(Error::Config(
                    "a scenario target needs a synthetic source".into(),
                ));
            };
            if sc.amplitude.len() != model.bands() {
                return Err(Error::DimensionMismatch(format!(
                    "scenario amplitude has {} bands, movie {}",
                    sc.amplitude.len(),
                    model.bands()
                )));
            }
            TargetSignature::new(
                model
                    .mean()
                    .iter()
                    .zip(&sc.amplitude)
                    .map(|(m, a)| m + a)
                    .collect(),
            )?
        }
    };
    let maps = (0..movie.frames())
        .map(|f| ace_map(movie, f, &model, &target))
        .collect::<grassfire::Result<Vec<_>>>()?;
    Ok((
        AceRun {
            maps,
            threshold: ace.threshold,
        },
        target,
    ))
}

fn run_ace(w: &mut Writer, movie: &HyperspectralMovie) -> grassfire::Result<()> {
    let cfg = w.cfg;
    let (run, target) = compute_ace(cfg, movie)?;
    if matches!(cfg.require_ace()?.target, AceTarget::Scenario) {
        w.write(outputs::ACE_TARGET, target.to_csv().as_bytes())?;
    }
    w.write(outputs::ACE_SCORES, &run.to_movie()?.to_hscb_bytes()?)?;
    w.write(outputs::ACE_SUMMARY, run.summary_csv().as_bytes())?;
    w.note(match run.first_detection() {
        Some(f) => format!(
            "ACE: first frame with a pixel above {} is {f}",
            format_f64(run.threshold)
        ),
        None => format!("ACE: no pixel above {}", format_f64(run.threshold)),
    });
    Ok(())
}

/// `sha256  name` per artifact, sorted by name.
fn manifest(cfg: &PipelineConfig, artifacts: &[String]) -> grassfire::Result<String> {
    let names: BTreeSet<&String> = artifacts.iter().collect();
    let mut s = String::new();
    for name in names {
        let path = cfg.output(name);
        let bytes = std::fs::read(&path).map_err(|e| io_error(&path, e))?;
        let _ = writeln!(s, "{}  {name}", hex::encode(Sha256::digest(&bytes)));
    }
    Ok(s)
}

/// Parses a manifest back into `(hash, name)` pairs.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(h, n)| (h.to_string(), n.to_string()))
        .collect()
}
