//! Typed view of a pipeline configuration file.
//!
//! A configuration is a flat `key = value` file. Scenario keys (`frames`,
//! `rows`, …) describe a synthetic movie; the remaining keys describe how the
//! movie is processed. Relative paths are resolved against the directory of
//! the configuration file.

use std::ops::Range;
use std::path::{Component, Path, PathBuf};

use grassfire::config::KvConfig;
use grassfire::cube::{PatchSpec, SlidingWindow};
use grassfire::detection::{DEFAULT_SHRINKAGE, DEFAULT_THRESHOLD};
use grassfire::synth::{bundled, PlumeScenario, BUNDLED};
use grassfire::{Error, Result, SubspaceMetric};

/// Prefix selecting a scenario shipped with the library instead of a file.
pub const BUNDLED_PREFIX: &str = "bundled:";

const SCENARIO_KEYS: &[&str] = &[
    "frames",
    "rows",
    "cols",
    "bands",
    "onset_frame",
    "release_duration",
    "decay_tau",
    "plume_center0",
    "drift_velocity",
    "sigma_spatial",
    "amplitude",
    "background_smoothness",
    "background_level",
    "background_std",
    "background_components",
    "noise_sigma",
    "seed",
];

const PATCH_KEYS: &[&str] = &["patch_rows", "patch_cols"];

const WINDOW_KEYS: &[&str] = &[
    "window_rows",
    "window_col_range",
    "window_cols",
    "stride",
    "window_frame",
    "reference_frame",
];

const PIPELINE_KEYS: &[&str] = &[
    "input",
    "mode",
    "band_indices",
    "allow_wide_patches",
    "metric",
    "scale_max",
    "pre_burst",
    "background_removal",
    "on_degenerate",
    "epsilons",
    "distance_matrix",
    "barcode",
    "ace",
    "ace_target",
    "ace_model_frames",
    "ace_threshold",
    "shrinkage",
    "output_dir",
];

/// Files written by the subcommands, relative to the output directory.
pub mod outputs {
    pub const MOVIE: &str = "movie.hscb";
    pub const MASK: &str = "mask.hscb";
    pub const DISTANCES: &str = "distances.csv";
    pub const SERIES: &str = "series.csv";
    pub const BARCODE: &str = "barcode.csv";
    pub const COMPONENTS: &str = "components.txt";
    pub const PLOT: &str = "barcode.svg";
    pub const REFERENCE_DISTANCES: &str = "reference_distances.csv";
    pub const REFERENCE_SERIES: &str = "reference_series.csv";
    pub const REFERENCE_BARCODE: &str = "reference_barcode.csv";
    pub const REFERENCE_PLOT: &str = "reference_barcode.svg";
    pub const ACE_SCORES: &str = "ace_scores.hscb";
    pub const ACE_SUMMARY: &str = "ace_summary.csv";
    pub const ACE_TARGET: &str = "target.csv";
    pub const MANIFEST: &str = "manifest.txt";

    pub const ALL: &[&str] = &[
        MOVIE,
        MASK,
        DISTANCES,
        SERIES,
        BARCODE,
        COMPONENTS,
        PLOT,
        REFERENCE_DISTANCES,
        REFERENCE_SERIES,
        REFERENCE_BARCODE,
        REFERENCE_PLOT,
        ACE_SCORES,
        ACE_SUMMARY,
        ACE_TARGET,
        MANIFEST,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// An HSCB movie on disk.
    Movie(PathBuf),
    /// A movie generated from the scenario keys of the configuration.
    Synthetic(Box<PlumeScenario>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesMode {
    /// One point per frame from a fixed patch.
    PatchSeries(PatchSpec),
    /// One point per window position within `frame`; `reference_frame`
    /// optionally repeats the processing on a second frame for comparison.
    SlidingWindow {
        window: SlidingWindow,
        frame: usize,
        reference_frame: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMax {
    MaxDistance,
    Value(f64),
}

impl ScaleMax {
    pub fn resolve(self, max_distance: f64) -> f64 {
        match self {
            ScaleMax::MaxDistance => max_distance,
            ScaleMax::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneratePolicy {
    Abort,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AceTarget {
    File(PathBuf),
    /// Background mean plus the scenario's plume amplitude spectrum.
    Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AceSettings {
    pub target: AceTarget,
    pub model_frames: Range<usize>,
    pub threshold: f64,
    pub shrinkage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: Option<Source>,
    pub series: Option<SeriesMode>,
    pub metric: SubspaceMetric,
    pub scale_max: ScaleMax,
    pub pre_burst: Option<Range<usize>>,
    pub background_removal: bool,
    pub on_degenerate: DegeneratePolicy,
    pub epsilons: Vec<f64>,
    /// Whether the pipeline runs the ACE stage.
    pub ace_enabled: bool,
    /// ACE settings, when enough keys are present to resolve them.
    pub ace: Option<AceSettings>,
    pub distance_matrix: Option<PathBuf>,
    pub barcode: Option<PathBuf>,
    pub output_dir: PathBuf,
    config_path: Option<PathBuf>,
}

/// Loads a configuration from a path, or from a bundled scenario when the
/// argument is `bundled:<name>`.
pub fn load_kv(arg: &str) -> Result<(KvConfig, PathBuf, Option<PathBuf>)> {
    if let Some(name) = arg.strip_prefix(BUNDLED_PREFIX) {
        let text = bundled(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown bundled scenario {name:?} (available: {})",
                BUNDLED.join(", ")
            ))
        })?;
        return Ok((KvConfig::parse(text)?, PathBuf::from("."), None));
    }
    let path = PathBuf::from(arg);
    let cfg = KvConfig::load(&path)?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, base, Some(path)))
}

impl PipelineConfig {
    /// Reads `arg` (a path or `bundled:<name>`); `out` overrides `output_dir`.
    pub fn load(arg: &str, out: Option<&Path>) -> Result<Self> {
        let (cfg, base, path) = load_kv(arg)?;
        let mut parsed = Self::from_kv(&cfg, &base, out)?;
        parsed.config_path = path;
        parsed.check_paths()?;
        Ok(parsed)
    }

    pub fn from_kv(cfg: &KvConfig, base: &Path, out: Option<&Path>) -> Result<Self> {
        reject_unknown_keys(cfg)?;
        let resolve = |p: &str| resolve_path(base, p);

        let has_scenario = SCENARIO_KEYS.iter().any(|k| cfg.contains(k));
        let source = match (cfg.raw("input"), has_scenario) {
            (Some(_), true) => {
                return Err(Error::Config(
                    "both `input` and synthetic scenario keys are present; choose one source"
                        .into(),
                ))
            }
            (Some(p), false) => Some(Source::Movie(resolve(p))),
            (None, true) => Some(Source::Synthetic(Box::new(PlumeScenario::from_config(
                cfg,
            )?))),
            (None, false) => None,
        };

        let pre_burst = cfg
            .get_list::<usize>("pre_burst")?
            .map(|v| half_open("pre_burst", &v))
            .transpose()?;
        let background_removal = cfg.get_bool("background_removal")?.unwrap_or(false);
        if background_removal && pre_burst.is_none() {
            return Err(Error::Config(
                "`background_removal = true` needs `pre_burst`".into(),
            ));
        }

        let on_degenerate = match cfg.raw("on_degenerate").unwrap_or("abort") {
            "abort" => DegeneratePolicy::Abort,
            "skip" => DegeneratePolicy::Skip,
            other => {
                return Err(Error::Config(format!(
                    "invalid value for `on_degenerate`: {other:?} (expected abort or skip)"
                )))
            }
        };

        let scale_max = match cfg.raw("scale_max") {
            None | Some("max") => ScaleMax::MaxDistance,
            Some(_) => {
                let v: f64 = cfg.require("scale_max")?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!(
                        "`scale_max` must be finite and non-negative, got {v}"
                    )));
                }
                ScaleMax::Value(v)
            }
        };

        let epsilons: Vec<f64> = cfg.get_list("epsilons")?.unwrap_or_default();
        if let Some(e) = epsilons.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(Error::Config(format!(
                "`epsilons` must be finite and non-negative, got {e}"
            )));
        }

        let output_dir = match out {
            Some(dir) => dir.to_path_buf(),
            None => resolve(cfg.require_raw("output_dir")?),
        };

        let ace_target = cfg.raw("ace_target").map(resolve);
        let ace_enabled = cfg.get_bool("ace")?.unwrap_or(ace_target.is_some());
        let ace = ace_settings(
            cfg,
            ace_target,
            source.as_ref(),
            pre_burst.as_ref(),
            ace_enabled,
        )?;

        Ok(Self {
            series: series_mode(cfg)?,
            metric: cfg.get_or("metric", SubspaceMetric::MinAngle)?,
            source,
            scale_max,
            pre_burst,
            background_removal,
            on_degenerate,
            epsilons,
            ace_enabled,
            ace,
            distance_matrix: cfg.raw("distance_matrix").map(resolve),
            barcode: cfg.raw("barcode").map(resolve),
            output_dir,
            config_path: None,
        })
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn require_source(&self) -> Result<&Source> {
        self.source.as_ref().ok_or_else(|| {
            Error::Config("missing required key `input` (or synthetic scenario keys)".into())
        })
    }

    pub fn require_scenario(&self) -> Result<&PlumeScenario> {
        match self.require_source()? {
            Source::Synthetic(sc) => Ok(sc),
            Source::Movie(_) => Err(Error::Config(
                "synth needs scenario keys, not `input`".into(),
            )),
        }
    }

    pub fn require_series(&self) -> Result<&SeriesMode> {
        self.series.as_ref().ok_or_else(|| {
            Error::Config(
                "missing required key `patch_rows` (patch-series) or `window_rows` (sliding-window)"
                    .into(),
            )
        })
    }

    pub fn require_ace(&self) -> Result<&AceSettings> {
        self.ace.as_ref().ok_or_else(|| {
            Error::Config("missing required key `ace_target` (or synthetic scenario keys)".into())
        })
    }

    /// Every file this configuration reads.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut paths: Vec<PathBuf> = self.config_path.iter().cloned().collect();
        if let Some(Source::Movie(p)) = &self.source {
            paths.push(p.clone());
        }
        if let Some(AceSettings {
            target: AceTarget::File(p),
            ..
        }) = &self.ace
        {
            paths.push(p.clone());
        }
        paths.extend(self.distance_matrix.iter().cloned());
        paths.extend(self.barcode.iter().cloned());
        paths
    }

    /// Rejects configurations in which an input would be overwritten by an
    /// output. `distance_matrix` and `barcode` may name the files the
    /// pipeline itself emits, because those are read by standalone
    /// subcommands only after the producing stage has finished.
    fn check_paths(&self) -> Result<()> {
        let mut protected: Vec<PathBuf> = self.config_path.iter().cloned().collect();
        if let Some(Source::Movie(p)) = &self.source {
            protected.push(p.clone());
        }
        if let Some(AceSettings {
            target: AceTarget::File(p),
            ..
        }) = &self.ace
        {
            protected.push(p.clone());
        }
        for input in &protected {
            let input_abs = normalize(input);
            for name in outputs::ALL {
                if normalize(&self.output(name)) == input_abs {
                    return Err(Error::Config(format!(
                        "input {} would be overwritten by output `{name}`",
                        input.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn reject_unknown_keys(cfg: &KvConfig) -> Result<()> {
    let known = |k: &str| {
        [SCENARIO_KEYS, PATCH_KEYS, WINDOW_KEYS, PIPELINE_KEYS]
            .iter()
            .any(|set| set.contains(&k))
    };
    match cfg.keys().find(|k| !known(k)) {
        Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

fn series_mode(cfg: &KvConfig) -> Result<Option<SeriesMode>> {
    let has_patch = PATCH_KEYS.iter().any(|k| cfg.contains(k));
    let has_window = WINDOW_KEYS.iter().any(|k| cfg.contains(k));
    let mode = match cfg.raw("mode") {
        Some("patch-series") if has_window => {
            return Err(conflicting_modes(
                "`mode = patch-series` with sliding-window keys",
            ))
        }
        Some("sliding-window") if has_patch => {
            return Err(conflicting_modes(
                "`mode = sliding-window` with patch-series keys",
            ))
        }
        Some("patch-series") => Some(false),
        Some("sliding-window") => Some(true),
        Some(other) => {
            return Err(Error::Config(format!(
                "invalid value for `mode`: {other:?} (expected patch-series or sliding-window)"
            )))
        }
        None if has_patch && has_window => {
            return Err(conflicting_modes(
                "both patch-series and sliding-window keys",
            ))
        }
        None if has_patch => Some(false),
        None if has_window => Some(true),
        None => None,
    };
    let Some(sliding) = mode else {
        return Ok(None);
    };
    let bands: Vec<usize> = cfg.require_list("band_indices")?;
    let wide = cfg.get_bool("allow_wide_patches")?.unwrap_or(false);
    if !sliding {
        let (r0, r1) = inclusive("patch_rows", &cfg.require_list("patch_rows")?)?;
        let (c0, c1) = inclusive("patch_cols", &cfg.require_list("patch_cols")?)?;
        let spec = if wide {
            PatchSpec::new_without_rank_rule(r0, r1, c0, c1, bands)?
        } else {
            PatchSpec::new(r0, r1, c0, c1, bands)?
        };
        return Ok(Some(SeriesMode::PatchSeries(spec)));
    }
    if wide {
        return Err(Error::Config(
            "`allow_wide_patches` applies to patch-series mode only".into(),
        ));
    }
    let (row_start, row_end) = inclusive("window_rows", &cfg.require_list("window_rows")?)?;
    let (col_start, col_end) =
        inclusive("window_col_range", &cfg.require_list("window_col_range")?)?;
    let window = SlidingWindow {
        row_start,
        row_end,
        col_start,
        col_end,
        window_cols: cfg.require("window_cols")?,
        stride: cfg.get_or("stride", 1)?,
        band_indices: bands,
    };
    // Validates the geometry (rank rule, non-empty range) before any work.
    window.specs()?;
    Ok(Some(SeriesMode::SlidingWindow {
        window,
        frame: cfg.require("window_frame")?,
        reference_frame: cfg.get("reference_frame")?,
    }))
}

fn ace_settings(
    cfg: &KvConfig,
    target: Option<PathBuf>,
    source: Option<&Source>,
    pre_burst: Option<&Range<usize>>,
    enabled: bool,
) -> Result<Option<AceSettings>> {
    let target =
        match (target, source) {
            (Some(p), _) => AceTarget::File(p),
            (None, Some(Source::Synthetic(_))) => AceTarget::Scenario,
            (None, _) if enabled => return Err(Error::Config(
                "missing required key `ace_target` (a loaded movie has no known plume spectrum)"
                    .into(),
            )),
            (None, _) => return Ok(None),
        };
    let model_frames = match (cfg.get_list::<usize>("ace_model_frames")?, pre_burst) {
        (Some(v), _) => half_open("ace_model_frames", &v)?,
        (None, Some(r)) => r.clone(),
        (None, None) if enabled => {
            return Err(Error::Config(
                "missing required key `ace_model_frames` (or `pre_burst`)".into(),
            ))
        }
        (None, None) => return Ok(None),
    };
    let threshold = cfg.get_or("ace_threshold", DEFAULT_THRESHOLD)?;
    let shrinkage = cfg.get_or("shrinkage", DEFAULT_SHRINKAGE)?;
    if !threshold.is_finite() {
        return Err(Error::Config(format!(
            "`ace_threshold` must be finite, got {threshold}"
        )));
    }
    if !shrinkage.is_finite() || shrinkage < 0.0 {
        return Err(Error::Config(format!(
            "`shrinkage` must be finite and non-negative, got {shrinkage}"
        )));
    }
    Ok(Some(AceSettings {
        target,
        model_frames,
        threshold,
        shrinkage,
    }))
}

fn conflicting_modes(detail: &str) -> Error {
    Error::Config(format!(
        "conflicting modes: {detail}; select exactly one of patch-series or sliding-window"
    ))
}

/// `a, b` with `a ≤ b`, both ends included.
fn inclusive(key: &str, v: &[usize]) -> Result<(usize, usize)> {
    match v {
        [a, b] if a <= b => Ok((*a, *b)),
        _ => Err(Error::Config(format!(
            "`{key}` needs two values `first, last` with first <= last"
        ))),
    }
}

/// `a, b` with `a < b`, read as the half-open range `a..b`.
fn half_open(key: &str, v: &[usize]) -> Result<Range<usize>> {
    match v {
        [a, b] if a < b => Ok(*a..*b),
        _ => Err(Error::Config(format!(
            "`{key}` needs two values `start, end` with start < end (end excluded)"
        ))),
    }
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Absolute, lexically normalized form of a path that may not exist yet.
fn normalize(p: &Path) -> PathBuf {
    let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let abs = abs.canonicalize().unwrap_or(abs);
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig> {
        PipelineConfig::from_kv(&KvConfig::parse(text)?, Path::new("/data"), None)
    }

    const PATCH: &str = "input = movie.hscb\noutput_dir = out\npatch_rows = 0, 3\npatch_cols = 0, 7\nband_indices = 0, 1, 2\n";

    #[test]
    fn patch_series_config() {
        let c = parse(PATCH).unwrap();
        assert_eq!(
            c.source,
            Some(Source::Movie(PathBuf::from("/data/movie.hscb")))
        );
        assert_eq!(c.output_dir, PathBuf::from("/data/out"));
        match c.series.unwrap() {
            SeriesMode::PatchSeries(spec) => assert_eq!((spec.n(), spec.k()), (32, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(c.metric, SubspaceMetric::MinAngle);
        assert_eq!(c.scale_max, ScaleMax::MaxDistance);
        assert!(!c.ace_enabled);
    }

    #[test]
    fn conflicting_modes_are_rejected() {
        let text = format!("{PATCH}window_rows = 0, 3\nwindow_col_range = 0, 20\nwindow_cols = 8\nwindow_frame = 0\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("conflicting modes"), "{err}");
        let err = parse(&format!("{PATCH}mode = sliding-window\n")).unwrap_err();
        assert!(err.to_string().contains("conflicting modes"), "{err}");
    }

    #[test]
    fn sliding_window_count() {
        let c = parse(
            "input = m.hscb\noutput_dir = o\nwindow_rows = 125, 128\nwindow_col_range = 190, 245\nwindow_cols = 8\nwindow_frame = 3\nband_indices = 1, 3, 6\n",
        )
        .unwrap();
        match c.series.unwrap() {
            SeriesMode::SlidingWindow {
                window,
                frame,
                reference_frame,
            } => {
                assert_eq!(window.count().unwrap(), 49);
                assert_eq!((frame, reference_frame), (3, None));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_malformed_keys_name_the_key() {
        let err = parse(&format!("{PATCH}scale_mx = 2\n")).unwrap_err();
        assert!(err.to_string().contains("`scale_mx`"), "{err}");
        let err = parse(&format!("{PATCH}metric = cosine\n")).unwrap_err();
        assert!(err.to_string().contains("cosine"), "{err}");
        let err = parse("input = m.hscb\npatch_rows = 0, 3\n").unwrap_err();
        assert!(err.to_string().contains("`output_dir`"), "{err}");
    }

    #[test]
    fn input_and_scenario_are_exclusive() {
        let text = format!("{PATCH}frames = 3\n");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn ranges_are_validated() {
        assert!(parse(&format!("{PATCH}pre_burst = 5, 5\n")).is_err());
        assert!(parse(&format!("{PATCH}background_removal = true\n")).is_err());
        let c = parse(&format!(
            "{PATCH}pre_burst = 0, 5\nbackground_removal = true\n"
        ))
        .unwrap();
        assert_eq!(c.pre_burst, Some(0..5));
    }

    #[test]
    fn ace_on_loaded_movie_needs_target() {
        assert!(parse(&format!("{PATCH}ace = true\npre_burst = 0, 5\n")).is_err());
        let c = parse(&format!("{PATCH}ace_target = t.csv\npre_burst = 0, 5\n")).unwrap();
        assert!(c.ace_enabled);
        let ace = c.ace.unwrap();
        assert_eq!(ace.target, AceTarget::File(PathBuf::from("/data/t.csv")));
        assert_eq!(ace.model_frames, 0..5);
        assert_eq!(ace.threshold, DEFAULT_THRESHOLD);
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in BUNDLED {
            let c =
                PipelineConfig::load(&format!("{BUNDLED_PREFIX}{name}"), Some(Path::new("out")))
                    .unwrap();
            assert!(matches!(c.source, Some(Source::Synthetic(_))), "{name}");
            assert!(c.series.is_some(), "{name}");
        }
    }

    #[test]
    fn outputs_may_not_overwrite_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(
            &cfg,
            "input = movie.hscb\noutput_dir = .\npatch_rows = 0, 3\npatch_cols = 0, 7\nband_indices = 0, 1, 2\n",
        )
        .unwrap();
        let err = PipelineConfig::load(cfg.to_str().unwrap(), None).unwrap_err();
        assert!(err.to_string().contains("overwritten"), "{err}");
    }
}
