//! INI configuration for the pipeline, plus a small typed accessor shared
//! with the scene spec.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::features::CornerParams;
use crate::geometry::RansacParams;
use crate::optflow::FlowParams;
use crate::render::RenderStyle;
use crate::tracker::{BBox, MosseConfig};
use crate::trajectory::DEFAULT_K;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("[{section}] {key}: missing")]
    Missing { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {reason}")]
    Invalid {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Bounds(String),
    #[error("{what} does not exist: {path}")]
    MissingPath { what: &'static str, path: String },
}

/// Typed lookups over a parsed INI document.
pub struct IniDoc(Ini);

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ini::load_from_str(text).map(Self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.0.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
    }

    fn invalid(section: &str, key: &str, value: &str, reason: impl ToString) -> ConfigError {
        ConfigError::Invalid {
            section: section.into(),
            key: key.into(),
            value: value.into(),
            reason: reason.to_string(),
        }
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| Self::invalid(section, key, v, e)),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    /// Comma-separated reals.
    pub fn get_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => parse_reals(v).map(Some).map_err(|e| Self::invalid(section, key, v, e)),
        }
    }

    /// Semicolon-separated groups of comma-separated reals.
    pub fn get_groups(&self, section: &str, key: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(';')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(|g| parse_reals(g).map_err(|e| Self::invalid(section, key, v, e)))
                .collect(),
        }
    }

    pub fn get_box(&self, section: &str, key: &str) -> Result<Option<BBox>, ConfigError> {
        match self.get_list(section, key)? {
            None => Ok(None),
            Some(v) => to_box(&v)
                .map(Some)
                .map_err(|e| Self::invalid(section, key, self.raw(section, key).unwrap_or(""), e)),
        }
    }

    pub fn get_color(&self, section: &str, key: &str, default: [u8; 3]) -> Result<[u8; 3], ConfigError> {
        let Some(v) = self.raw(section, key) else {
            return Ok(default);
        };
        let parts: Result<Vec<u8>, _> = v.split(',').map(|s| s.trim().parse::<u8>()).collect();
        match parts {
            Ok(p) if p.len() == 3 => Ok([p[0], p[1], p[2]]),
            _ => Err(Self::invalid(section, key, v, "expected r,g,b with values 0-255")),
        }
    }
}

fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("not a finite number: {p:?}"))
        })
        .collect()
}

fn to_box(v: &[f64]) -> Result<BBox, String> {
    if v.len() != 4 {
        return Err("expected x,y,w,h".into());
    }
    BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

/// The `[render]` section; missing keys keep their defaults.
pub fn render_style_from_doc(doc: &IniDoc) -> Result<RenderStyle, ConfigError> {
    let mut s = RenderStyle::default();
    s.line_color = doc.get_color("render", "line_color", s.line_color)?;
    s.box_color = doc.get_color("render", "box_color", s.box_color)?;
    s.line_width = doc.get_or("render", "line_width", s.line_width)?;
    s.point_radius = doc.get_or("render", "point_radius", s.point_radius)?;
    s.draw_box = doc.get_or("render", "draw_box", s.draw_box)?;
    s.hide_points_in_box = doc.get_or("render", "hide_points_in_box", s.hide_points_in_box)?;
    if doc.get_or("render", "smooth", false)? {
        s.smooth = Some((
            doc.get_or("render", "smooth_window", 9usize)?,
            doc.get_or("render", "smooth_order", 2usize)?,
        ));
    }
    s.validate().map_err(|e| ConfigError::Bounds(e.to_string()))?;
    Ok(s)
}

/// Where target boxes come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TrackerChoice {
    Mosse,
    TrackFile(PathBuf),
}

/// Where frame-to-frame homographies come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CameraChoice {
    /// Corners, optical flow and RANSAC.
    Estimate,
    /// A `.homog` file with one homography per frame pair.
    HomogFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Write annotated frames in addition to the records.
    pub render_frames: bool,
    pub output_ext: String,
    pub init_box: Option<BBox>,
    pub tracker: TrackerChoice,
    pub mosse: MosseConfig,
    pub camera: CameraChoice,
    pub k: f64,
    pub sharpen: bool,
    pub detector: CornerParams,
    pub flow: FlowParams,
    pub ransac: RansacParams,
    pub ransac_seed: u64,
    pub graphics: Vec<BBox>,
    pub style: RenderStyle,
    pub fps: f64,
}

impl PipelineConfig {
    /// Defaults for everything except the directories.
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            render_frames: true,
            output_ext: "png".into(),
            init_box: None,
            tracker: TrackerChoice::Mosse,
            mosse: MosseConfig::default(),
            camera: CameraChoice::Estimate,
            k: DEFAULT_K,
            sharpen: false,
            detector: CornerParams::default(),
            flow: FlowParams::default(),
            ransac: RansacParams::default(),
            ransac_seed: 0,
            graphics: Vec::new(),
            style: RenderStyle::default(),
            fps: 30.0,
        }
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let doc = IniDoc::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_doc(&doc, base)
    }

    pub fn from_doc(doc: &IniDoc, base: &Path) -> Result<Self, ConfigError> {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let input: String = doc.require("input", "frames")?;
        let output: String = doc.require("output", "dir")?;
        let mut cfg = Self::new(resolve(&input), resolve(&output));
        cfg.render_frames = doc.get_or("output", "render", cfg.render_frames)?;
        cfg.output_ext = doc.get_or("output", "ext", cfg.output_ext)?;
        if !matches!(cfg.output_ext.as_str(), "png" | "ppm") {
            return Err(IniDoc::invalid("output", "ext", &cfg.output_ext, "expected png or ppm"));
        }
        cfg.init_box = doc.get_box("init", "box")?;

        let source: String = doc.get_or("tracker", "source", "mosse".to_string())?;
        cfg.tracker = match source.split_once(':') {
            None if source == "mosse" => TrackerChoice::Mosse,
            Some(("trackfile", p)) if !p.trim().is_empty() => TrackerChoice::TrackFile(resolve(p.trim())),
            _ => return Err(IniDoc::invalid("tracker", "source", &source, "expected mosse or trackfile:<path>")),
        };
        let m = &mut cfg.mosse;
        m.template_size = doc.get_or("tracker", "template_size", m.template_size)?;
        m.learning_rate = doc.get_or("tracker", "learning_rate", m.learning_rate)?;
        m.padding = doc.get_or("tracker", "padding", m.padding)?;
        m.perturbations = doc.get_or("tracker", "perturbations", m.perturbations)?;
        m.psr_threshold = doc.get_or("tracker", "psr_threshold", m.psr_threshold)?;
        m.seed = doc.get_or("tracker", "seed", m.seed)?;

        let camera: String = doc.get_or("camera", "source", "estimate".to_string())?;
        cfg.camera = match camera.split_once(':') {
            None if camera == "estimate" => CameraChoice::Estimate,
            Some(("homogfile", p)) if !p.trim().is_empty() => CameraChoice::HomogFile(resolve(p.trim())),
            _ => return Err(IniDoc::invalid("camera", "source", &camera, "expected estimate or homogfile:<path>")),
        };

        cfg.k = doc.get_or("trajectory", "k", cfg.k)?;
        cfg.sharpen = doc.get_or("preprocess", "sharpen", cfg.sharpen)?;

        let d = &mut cfg.detector;
        d.max_corners = doc.get_or("detector", "max_corners", d.max_corners)?;
        d.quality_level = doc.get_or("detector", "quality_level", d.quality_level)?;
        d.min_distance = doc.get_or("detector", "min_distance", d.min_distance)?;
        d.window = doc.get_or("detector", "window", d.window)?;
        d.min_response = doc.get_or("detector", "min_response", d.min_response)?;

        let f = &mut cfg.flow;
        f.window = doc.get_or("flow", "window", f.window)?;
        f.pyramid_levels = doc.get_or("flow", "levels", f.pyramid_levels)?;
        f.max_iters = doc.get_or("flow", "max_iters", f.max_iters)?;
        f.eps = doc.get_or("flow", "eps", f.eps)?;
        f.fb_thresh = doc.get_or("flow", "fb_thresh", f.fb_thresh)?;
        f.min_eigen = doc.get_or("flow", "min_eigen", f.min_eigen)?;

        let r = &mut cfg.ransac;
        r.max_iters = doc.get_or("ransac", "max_iters", r.max_iters)?;
        r.inlier_thresh = doc.get_or("ransac", "threshold", r.inlier_thresh)?;
        r.confidence = doc.get_or("ransac", "confidence", r.confidence)?;
        cfg.ransac_seed = doc.get_or("ransac", "seed", cfg.ransac_seed)?;

        cfg.graphics = doc
            .get_groups("graphics", "rects")?
            .iter()
            .map(|g| to_box(g).map_err(|e| IniDoc::invalid("graphics", "rects", doc.raw("graphics", "rects").unwrap_or(""), e)))
            .collect::<Result<_, _>>()?;

        cfg.style = render_style_from_doc(doc)?;
        cfg.fps = doc.get_or("timing", "fps", cfg.fps)?;

        cfg.validate()?;
        Ok(cfg)
    }

    /// Parameter bounds of every module involved.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bounds = |e: String| ConfigError::Bounds(e);
        self.detector.validate().map_err(|e| bounds(e.to_string()))?;
        self.flow.validate().map_err(|e| bounds(e.to_string()))?;
        self.mosse.validate().map_err(|e| bounds(e.to_string()))?;
        self.style.validate().map_err(|e| bounds(e.to_string()))?;
        let r = &self.ransac;
        if r.max_iters == 0 || !(r.inlier_thresh > 0.0) || !(r.confidence > 0.0 && r.confidence < 1.0) {
            return Err(bounds("ransac needs max_iters >= 1, threshold > 0, confidence in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(bounds(format!("trajectory k = {} outside [0, 1]", self.k)));
        }
        if !(self.fps > 0.0) {
            return Err(bounds("fps must be > 0".into()));
        }
        if self.tracker == TrackerChoice::Mosse && self.init_box.is_none() {
            return Err(ConfigError::Missing {
                section: "init".into(),
                key: "box".into(),
            });
        }
        Ok(())
    }

    /// Every input path named by the config must exist when a run starts.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let need = |what: &'static str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    what,
                    path: p.display().to_string(),
                })
            }
        };
        need("input directory", &self.input_dir)?;
        if let TrackerChoice::TrackFile(p) = &self.tracker {
            need("track file", p)?;
        }
        if let CameraChoice::HomogFile(p) = &self.camera {
            need("homography file", p)?;
        }
        Ok(())
    }
}
