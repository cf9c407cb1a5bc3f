//! The online loop: for every new frame, get the target box, estimate the
//! camera homography from the previous frame, carry the trajectory over and
//! append the new anchor, then emit that frame's outputs before reading the
//! next one.

use std::cell::RefCell;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::Instant;

use log::{debug, warn};
use serde::Serialize;
use thiserror::Error;

use crate::config::{CameraChoice, ConfigError, PipelineConfig, TrackerChoice};
use crate::features::{detect_corners, CornerParams, ExclusionMask};
use crate::geometry::{ransac_homography, write_homog, Homography, RansacParams};
use crate::image::{build_pyramid, frame_file_name, load_color, save_color, sharpen, to_gray, ColorFrame, GrayFrame, ImageError};
use crate::metrics::{files, RunInfo};
use crate::optflow::{track_points_prepared, FlowParams, FlowPyramid};
use crate::render::{render_frame, RenderStyle};
use crate::tracker::{track_source_from_file, BBox, BoxSource, MosseSource, TrackerError};
use crate::trajectory::{read_records_json, read_records_text, Trajectory, TrajectoryError, TrajectoryRecord};
use crate::FormatError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("{path}: {err}")]
    Format { path: String, err: FormatError },
    #[error("no frames found in {0}")]
    NoFrames(String),
    #[error("frame {t} is {got_w}x{got_h}, expected {w}x{h}")]
    FrameSize {
        t: usize,
        w: usize,
        h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("no homography for frame pair {0}")]
    MissingHomography(usize),
}

impl PipelineError {
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Per-frame diagnostics; timings in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FrameMeta {
    pub frame: usize,
    pub corner_count: usize,
    pub valid_matches: usize,
    pub inliers: usize,
    pub ransac_fallback: bool,
    pub psr: Option<f64>,
    pub low_confidence: bool,
    pub track_ms: f64,
    pub detect_ms: f64,
    pub pyramid_ms: f64,
    pub flow_ms: f64,
    pub ransac_ms: f64,
    /// Pyramid, detection, flow and RANSAC together.
    pub geometry_ms: f64,
    pub render_ms: f64,
    /// Whole frame including reading and writing.
    pub total_ms: f64,
}

/// Everything produced for one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub record: TrajectoryRecord,
    pub bbox: BBox,
    /// Map from the previous frame; `None` for frame 0.
    pub homography: Option<Homography>,
    pub meta: FrameMeta,
    pub rendered: Option<ColorFrame>,
}

/// Ordered frame access.
pub trait FrameSource {
    /// Frame `t`, or `None` past the end.
    fn frame(&mut self, t: usize) -> Result<Option<ColorFrame>, PipelineError>;
}

/// Receives each frame's outputs as soon as they exist.
pub trait RecordSink {
    fn emit(&mut self, out: &FrameOutput) -> Result<(), PipelineError>;
    fn finish(&mut self, _info: &RunInfo) -> Result<(), PipelineError> {
        Ok(())
    }
}

/// Interleaving of frame reads and record emissions, for checking that the
/// loop never looks ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessEvent {
    Open(usize),
    Emit(usize),
}

pub type AccessLog = Rc<RefCell<Vec<AccessEvent>>>;

/// `%06d.png` or `%06d.ppm` files in one directory, frames `0..count`.
pub struct DirFrameSource {
    dir: PathBuf,
    ext: String,
    count: usize,
    log: Option<AccessLog>,
}

impl DirFrameSource {
    /// Scans `dir` for numbered frames; the highest index fixes the count,
    /// so a gap surfaces as a missing file when reached.
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
        let mut best: Option<(usize, String)> = None;
        for entry in entries {
            let entry = entry.map_err(|e| io_error(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some((stem, ext)) = name.split_once('.') else {
                continue;
            };
            if stem.len() != 6 || !stem.bytes().all(|b| b.is_ascii_digit()) || !matches!(ext, "png" | "ppm") {
                continue;
            }
            let idx: usize = stem.parse().expect("six digits");
            let better = match &best {
                None => true,
                Some((b, e)) => idx > *b || (idx == *b && ext == "png" && e != "png"),
            };
            if better {
                best = Some((idx, ext.to_string()));
            }
        }
        let (last, ext) = best.ok_or_else(|| PipelineError::NoFrames(dir.display().to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            ext,
            count: last + 1,
            log: None,
        })
    }

    pub fn with_log(mut self, log: AccessLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn ext(&self) -> &str {
        &self.ext
    }
}

impl FrameSource for DirFrameSource {
    fn frame(&mut self, t: usize) -> Result<Option<ColorFrame>, PipelineError> {
        if t >= self.count {
            return Ok(None);
        }
        if let Some(log) = &self.log {
            log.borrow_mut().push(AccessEvent::Open(t));
        }
        let path = self.dir.join(frame_file_name(t, &self.ext));
        if !path.exists() {
            return Err(io_error(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "missing frame file")));
        }
        Ok(Some(load_color(&path)?))
    }
}

/// Frames already in memory.
pub struct VecFrameSource {
    frames: Vec<ColorFrame>,
    pub log: Option<AccessLog>,
}

impl VecFrameSource {
    pub fn new(frames: Vec<ColorFrame>) -> Self {
        Self { frames, log: None }
    }
}

impl FrameSource for VecFrameSource {
    fn frame(&mut self, t: usize) -> Result<Option<ColorFrame>, PipelineError> {
        if let Some(log) = &self.log {
            if t < self.frames.len() {
                log.borrow_mut().push(AccessEvent::Open(t));
            }
        }
        Ok(self.frames.get(t).cloned())
    }
}

/// Keeps every output in memory.
#[derive(Default)]
pub struct MemorySink {
    pub outputs: Vec<FrameOutput>,
    pub info: Option<RunInfo>,
    pub log: Option<AccessLog>,
}

impl RecordSink for MemorySink {
    fn emit(&mut self, out: &FrameOutput) -> Result<(), PipelineError> {
        if let Some(log) = &self.log {
            log.borrow_mut().push(AccessEvent::Emit(out.record.frame));
        }
        self.outputs.push(out.clone());
        Ok(())
    }

    fn finish(&mut self, info: &RunInfo) -> Result<(), PipelineError> {
        self.info = Some(*info);
        Ok(())
    }
}

struct OutFile {
    path: PathBuf,
    w: BufWriter<File>,
}

impl OutFile {
    fn create(path: PathBuf) -> Result<Self, PipelineError> {
        let f = File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok(Self {
            w: BufWriter::new(f),
            path,
        })
    }

    fn write(&mut self, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), PipelineError> {
        f(&mut self.w).and_then(|_| self.w.flush()).map_err(|e| io_error(&self.path, e))
    }
}

/// Writes the record files of a run directory, one flushed line per frame.
pub struct FileSink {
    dir: PathBuf,
    traj_text: OutFile,
    traj_json: OutFile,
    homog: OutFile,
    boxes: OutFile,
    meta: csv::Writer<File>,
    meta_path: PathBuf,
    frames_dir: Option<PathBuf>,
    ext: String,
    log: Option<AccessLog>,
}

pub const TRAJECTORY_TEXT: &str = "trajectory.traj";
pub const RENDER_DIR: &str = "frames";

impl FileSink {
    /// `render_ext` set means annotated frames go to `dir/frames`.
    pub fn create(dir: &Path, render_ext: Option<&str>) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let frames_dir = match render_ext {
            Some(_) => {
                let d = dir.join(RENDER_DIR);
                std::fs::create_dir_all(&d).map_err(|e| io_error(&d, e))?;
                Some(d)
            }
            None => None,
        };
        let meta_path = dir.join(files::PRED_METADATA);
        let meta = csv::Writer::from_path(&meta_path).map_err(|e| io_error(&meta_path, e.into()))?;
        Ok(Self {
            traj_text: OutFile::create(dir.join(TRAJECTORY_TEXT))?,
            traj_json: OutFile::create(dir.join(files::PRED_TRAJECTORY))?,
            homog: OutFile::create(dir.join(files::PRED_HOMOG))?,
            boxes: OutFile::create(dir.join(files::PRED_BOXES))?,
            meta,
            meta_path,
            frames_dir,
            ext: render_ext.unwrap_or("png").to_string(),
            dir: dir.to_path_buf(),
            log: None,
        })
    }

    pub fn with_log(mut self, log: AccessLog) -> Self {
        self.log = Some(log);
        self
    }
}

impl RecordSink for FileSink {
    fn emit(&mut self, out: &FrameOutput) -> Result<(), PipelineError> {
        let rec = &out.record;
        self.traj_text.write(|w| writeln!(w, "{}", rec.to_text_line()))?;
        self.traj_json.write(|w| {
            serde_json::to_writer(&mut *w, rec)?;
            writeln!(w)
        })?;
        if let Some(h) = &out.homography {
            self.homog.write(|w| write_homog(w, std::slice::from_ref(h)))?;
        }
        let b = out.bbox;
        self.boxes.write(|w| writeln!(w, "{},{},{},{},{}", rec.frame, b.x, b.y, b.w, b.h))?;
        let meta_err = |e: csv::Error| io_error(&self.meta_path, e.into());
        self.meta.serialize(out.meta).map_err(meta_err)?;
        self.meta.flush().map_err(|e| io_error(&self.meta_path, e))?;
        if let (Some(dir), Some(img)) = (&self.frames_dir, &out.rendered) {
            save_color(&dir.join(frame_file_name(rec.frame, &self.ext)), img)?;
        }
        if let Some(log) = &self.log {
            log.borrow_mut().push(AccessEvent::Emit(rec.frame));
        }
        Ok(())
    }

    fn finish(&mut self, info: &RunInfo) -> Result<(), PipelineError> {
        let path = self.dir.join(files::PRED_RUN_INFO);
        let json = serde_json::to_string_pretty(info).expect("plain struct serializes");
        std::fs::write(&path, json + "\n").map_err(|e| io_error(&path, e))
    }
}

/// Where homographies come from.
pub enum CameraSource {
    Estimate,
    /// Known maps, element `t-1` for the pair `(t-1, t)`.
    Given(Vec<Homography>),
}

/// Settings of the camera-motion stage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct GeometryParams {
    pub detector: CornerParams,
    pub flow: FlowParams,
    pub ransac: RansacParams,
    pub seed: u64,
    pub sharpen: bool,
}


/// One frame prepared for the camera-motion stage.
pub struct PreparedFrame {
    pub pyramid: FlowPyramid,
}

impl PreparedFrame {
    /// The (optionally sharpened) frame corners are detected on.
    pub fn gray(&self) -> &GrayFrame {
        self.pyramid.base()
    }
}

pub fn prepare_frame(gray: &GrayFrame, params: &GeometryParams) -> Result<PreparedFrame, ImageError> {
    let pyramid = if params.sharpen {
        build_pyramid(&sharpen(gray)?, params.flow.pyramid_levels)
    } else {
        build_pyramid(gray, params.flow.pyramid_levels)
    };
    Ok(PreparedFrame {
        pyramid: FlowPyramid::from_pyramid(pyramid),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraEstimate {
    pub homography: Homography,
    pub corner_count: usize,
    pub valid_matches: usize,
    pub inliers: usize,
    /// Identity was substituted for a failed estimate.
    pub fallback: bool,
    pub detect_ms: f64,
    pub flow_ms: f64,
    pub ransac_ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Corners on the previous frame away from `prev_mask`, tracked into the
/// next frame; matches landing in `next_mask` are dropped before RANSAC.
/// Failures yield the identity with `fallback` set.
pub fn estimate_camera(
    prev: &PreparedFrame,
    next: &PreparedFrame,
    prev_mask: &ExclusionMask,
    next_mask: &ExclusionMask,
    params: &GeometryParams,
    seed: u64,
) -> CameraEstimate {
    let mut est = CameraEstimate {
        homography: Homography::identity(),
        corner_count: 0,
        valid_matches: 0,
        inliers: 0,
        fallback: true,
        detect_ms: 0.0,
        flow_ms: 0.0,
        ransac_ms: 0.0,
    };
    let t0 = Instant::now();
    let corners = detect_corners(prev.gray(), prev_mask, &params.detector);
    est.detect_ms = ms_since(t0);
    let corners = match corners {
        Ok(c) => c,
        Err(e) => {
            debug!("corner detection failed: {e}");
            return est;
        }
    };
    est.corner_count = corners.len();

    let t1 = Instant::now();
    let mut matches = track_points_prepared(&prev.pyramid, &next.pyramid, &corners.points, &params.flow);
    for m in &mut matches {
        if m.valid && next_mask.contains(m.dst) {
            m.valid = false;
        }
    }
    est.flow_ms = ms_since(t1);
    est.valid_matches = matches.iter().filter(|m| m.valid).count();

    let t2 = Instant::now();
    let fit = ransac_homography(&matches, &params.ransac, seed);
    est.ransac_ms = ms_since(t2);
    match fit {
        Ok(r) => {
            est.homography = r.homography;
            est.inliers = r.inlier_count;
            est.fallback = false;
        }
        Err(e) => debug!("homography estimation failed: {e}"),
    }
    est
}

/// Settings the loop itself needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSettings {
    pub k: f64,
    pub geometry: GeometryParams,
    pub graphics: Vec<BBox>,
    /// `None` disables rendering.
    pub style: Option<RenderStyle>,
    pub fps: f64,
}

impl LoopSettings {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        Self {
            k: cfg.k,
            geometry: GeometryParams {
                detector: cfg.detector,
                flow: cfg.flow,
                ransac: cfg.ransac,
                seed: cfg.ransac_seed,
                sharpen: cfg.sharpen,
            },
            graphics: cfg.graphics.clone(),
            style: cfg.render_frames.then_some(cfg.style),
            fps: cfg.fps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub fallbacks: usize,
    pub low_confidence: usize,
    pub total_seconds: f64,
}

/// Exclusion regions grown by `margin` on every side, so that no flow
/// window reaches into them.
pub fn exclusion_mask(b: &BBox, graphics: &[BBox], margin: f64, w: usize, h: usize) -> ExclusionMask {
    let grow = |r: &BBox| BBox {
        x: r.x - margin,
        y: r.y - margin,
        w: r.w + 2.0 * margin,
        h: r.h + 2.0 * margin,
    };
    ExclusionMask::new(graphics.iter().chain([b]).map(grow), w, h)
}

/// The online loop over any frame source, box source and sink.
pub fn run_loop(
    settings: &LoopSettings,
    frames: &mut dyn FrameSource,
    boxes: &mut dyn BoxSource,
    camera: &CameraSource,
    sink: &mut dyn RecordSink,
) -> Result<RunSummary, PipelineError> {
    let start = Instant::now();
    let params = &settings.geometry;
    let frame_t0 = Instant::now();
    let first = frames.frame(0)?.ok_or_else(|| PipelineError::NoFrames("frame source".into()))?;
    let (w, h) = (first.width(), first.height());
    let (wf, hf) = (w as f64, h as f64);
    let gray = to_gray(&first);

    let t_track = Instant::now();
    let mut bbox = boxes.initial(&gray)?;
    let track_ms = ms_since(t_track);
    let mut traj = Trajectory::start(wf, hf, &bbox, settings.k)?;
    debug_assert!(traj.check_invariants().is_ok());

    let estimate = matches!(camera, CameraSource::Estimate);
    let margin = (params.flow.window / 2) as f64;
    let mut prepared = if estimate { Some(prepare_frame(&gray, params)?) } else { None };

    let t_render = Instant::now();
    let rendered = match &settings.style {
        Some(style) => Some(render_frame(&first, &traj, Some(&bbox), style)?),
        None => None,
    };
    let mut summary = RunSummary {
        frames: 1,
        fallbacks: 0,
        low_confidence: 0,
        total_seconds: 0.0,
    };
    let mut meta = FrameMeta {
        frame: 0,
        track_ms,
        render_ms: ms_since(t_render),
        ..Default::default()
    };
    meta.total_ms = ms_since(frame_t0);
    sink.emit(&FrameOutput {
        record: traj.record(),
        bbox,
        homography: None,
        meta,
        rendered,
    })?;

    let mut t = 1;
    loop {
        let frame_t0 = Instant::now();
        let Some(frame) = frames.frame(t)? else {
            break;
        };
        if frame.width() != w || frame.height() != h {
            return Err(PipelineError::FrameSize {
                t,
                w,
                h,
                got_w: frame.width(),
                got_h: frame.height(),
            });
        }
        let gray = to_gray(&frame);
        let mut meta = FrameMeta {
            frame: t,
            ..Default::default()
        };

        let t_track = Instant::now();
        let obs = boxes.next(t, &gray)?;
        meta.track_ms = ms_since(t_track);
        meta.psr = obs.psr;
        meta.low_confidence = obs.low_confidence;
        let prev_box = bbox;
        bbox = obs.bbox;

        let hmg = match camera {
            CameraSource::Given(hs) => *hs.get(t - 1).ok_or(PipelineError::MissingHomography(t))?,
            CameraSource::Estimate => {
                let t_pyr = Instant::now();
                let next = prepare_frame(&gray, params)?;
                meta.pyramid_ms = ms_since(t_pyr);
                let prev = prepared.as_ref().expect("prepared when estimating");
                let est = estimate_camera(
                    prev,
                    &next,
                    &exclusion_mask(&prev_box, &settings.graphics, margin, w, h),
                    &exclusion_mask(&bbox, &settings.graphics, margin, w, h),
                    params,
                    params.seed.wrapping_add(t as u64),
                );
                meta.corner_count = est.corner_count;
                meta.valid_matches = est.valid_matches;
                meta.inliers = est.inliers;
                meta.ransac_fallback = est.fallback;
                meta.detect_ms = est.detect_ms;
                meta.flow_ms = est.flow_ms;
                meta.ransac_ms = est.ransac_ms;
                meta.geometry_ms = meta.pyramid_ms + est.detect_ms + est.flow_ms + est.ransac_ms;
                prepared = Some(next);
                est.homography
            }
        };
        if meta.ransac_fallback {
            warn!("frame {t}: camera estimate failed, using identity");
            summary.fallbacks += 1;
        }
        if meta.low_confidence {
            summary.low_confidence += 1;
        }

        traj = traj.advance(&hmg, &bbox, settings.k)?;
        debug_assert!(traj.check_invariants().is_ok());

        let t_render = Instant::now();
        let rendered = match &settings.style {
            Some(style) => Some(render_frame(&frame, &traj, Some(&bbox), style)?),
            None => None,
        };
        meta.render_ms = ms_since(t_render);
        meta.total_ms = ms_since(frame_t0);
        sink.emit(&FrameOutput {
            record: traj.record(),
            bbox,
            homography: Some(hmg),
            meta,
            rendered,
        })?;
        summary.frames += 1;
        t += 1;
    }

    summary.total_seconds = start.elapsed().as_secs_f64();
    sink.finish(&RunInfo {
        frames: summary.frames,
        fps: settings.fps,
        total_seconds: summary.total_seconds,
    })?;
    Ok(summary)
}

/// Runs a full configuration: frames from the input directory, records
/// and annotated frames to the output directory.
pub fn run(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    run_logged(cfg, None)
}

pub fn run_logged(cfg: &PipelineConfig, log: Option<AccessLog>) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    cfg.check_paths()?;
    let mut frames = DirFrameSource::open(&cfg.input_dir)?;
    let mut boxes: Box<dyn BoxSource> = match &cfg.tracker {
        TrackerChoice::Mosse => Box::new(MosseSource::new(
            cfg.init_box.expect("validated: mosse needs an init box"),
            cfg.mosse,
        )),
        TrackerChoice::TrackFile(p) => Box::new(track_source_from_file(p)?),
    };
    let camera = match &cfg.camera {
        CameraChoice::Estimate => CameraSource::Estimate,
        CameraChoice::HomogFile(p) => {
            let f = File::open(p).map_err(|e| io_error(p, e))?;
            let hs = crate::geometry::read_homog(std::io::BufReader::new(f)).map_err(|err| PipelineError::Format {
                path: p.display().to_string(),
                err,
            })?;
            CameraSource::Given(hs)
        }
    };
    let settings = LoopSettings::from_config(cfg);
    let ext = if cfg.render_frames { Some(cfg.output_ext.as_str()) } else { None };
    let mut sink = FileSink::create(&cfg.output_dir, ext)?;
    if let Some(log) = log {
        frames = frames.with_log(log.clone());
        sink = sink.with_log(log);
    }
    run_loop(&settings, &mut frames, boxes.as_mut(), &camera, &mut sink)
}

/// Draws stored trajectory records onto a frame directory. Frames without a
/// record are copied unchanged.
pub fn render_records(
    records: &[TrajectoryRecord],
    boxes: Option<&[(usize, BBox)]>,
    frames_dir: &Path,
    out_dir: &Path,
    style: &RenderStyle,
) -> Result<usize, PipelineError> {
    let mut src = DirFrameSource::open(frames_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let ext = src.ext().to_string();
    let mut t = 0;
    while let Some(frame) = src.frame(t)? {
        let rec = records.iter().find(|r| r.frame == t);
        let bbox = boxes.and_then(|bs| bs.iter().find(|(i, _)| *i == t).map(|(_, b)| *b));
        let out = match rec {
            Some(r) => {
                let traj = Trajectory::from_parts(r.frame, frame.width() as f64, frame.height() as f64, r.points.clone())?;
                render_frame(&frame, &traj, bbox.as_ref(), style)?
            }
            None => frame,
        };
        save_color(&out_dir.join(frame_file_name(t, &ext)), &out)?;
        t += 1;
    }
    Ok(t)
}

/// [`render_records`] on files: `records` is a `.jsonl` or text `.traj`
/// record file, `boxes` an optional track file.
pub fn render_files(
    records: &Path,
    boxes: Option<&Path>,
    frames_dir: &Path,
    out_dir: &Path,
    style: &RenderStyle,
) -> Result<usize, PipelineError> {
    let file = File::open(records).map_err(|e| io_error(records, e))?;
    let reader = std::io::BufReader::new(file);
    let format_err = |err| PipelineError::Format {
        path: records.display().to_string(),
        err,
    };
    let recs = if records.extension().is_some_and(|e| e == "jsonl") {
        read_records_json(reader).map_err(format_err)?
    } else {
        // The text format carries no frame size; clipping bounds come from
        // the frames themselves.
        let first = DirFrameSource::open(frames_dir)?.frame(0)?.ok_or_else(|| PipelineError::NoFrames(frames_dir.display().to_string()))?;
        read_records_text(reader, first.width() as f64, first.height() as f64).map_err(format_err)?
    };
    let boxes = match boxes {
        Some(p) => Some(track_source_from_file(p)?.boxes().collect::<Vec<_>>()),
        None => None,
    };
    render_records(&recs, boxes.as_deref(), frames_dir, out_dir, style)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::synthgen::{CameraSpec, SceneSpec, SyntheticScene, TargetSpec, TextureSpec};
    use crate::tracker::TrackFile;

    fn scene(camera: CameraSpec) -> SyntheticScene {
        SyntheticScene::new(SceneSpec {
            width: 320,
            height: 240,
            frames: 15,
            texture: TextureSpec {
                blob_count: 150,
                blob_scale: 6.0,
                ..SceneSpec::default().texture
            },
            camera,
            target: TargetSpec {
                width: 24.0,
                height: 40.0,
                waypoints: vec![Point2::new(120.0, 120.0), Point2::new(220.0, 140.0)],
                speed: 2.0,
                intensity: 1.0,
            },
            ..SceneSpec::default()
        })
        .unwrap()
    }

    fn settings() -> LoopSettings {
        LoopSettings {
            k: 0.9,
            geometry: GeometryParams::default(),
            graphics: Vec::new(),
            style: None,
            fps: 30.0,
        }
    }

    fn frames_of(s: &SyntheticScene) -> Vec<ColorFrame> {
        (0..s.frames()).map(|t| s.render_frame(t)).collect()
    }

    #[test]
    fn oracle_inputs_reproduce_reference() {
        let s = scene(CameraSpec {
            translation: (1.5, 0.5),
            rotation_deg: 0.2,
            zoom: 1.002,
            jitter: 1e-5,
        });
        let gt = s.ground_truth().unwrap();
        let mut frames = VecFrameSource::new(frames_of(&s));
        let mut boxes = TrackFile::from_boxes(gt.boxes.clone());
        let mut sink = MemorySink::default();
        let camera = CameraSource::Given(gt.homographies.clone());
        run_loop(&settings(), &mut frames, &mut boxes, &camera, &mut sink).unwrap();
        let recs: Vec<_> = sink.outputs.iter().map(|o| o.record.clone()).collect();
        assert_eq!(recs, gt.reference);
    }

    #[test]
    fn estimated_camera_close_to_truth() {
        let s = scene(CameraSpec {
            translation: (2.0, -1.0),
            rotation_deg: 0.2,
            zoom: 1.001,
            jitter: 0.0,
        });
        let gt = s.ground_truth().unwrap();
        let mut frames = VecFrameSource::new(frames_of(&s));
        let mut boxes = TrackFile::from_boxes(gt.boxes.clone());
        let mut sink = MemorySink::default();
        let summary = run_loop(&settings(), &mut frames, &mut boxes, &CameraSource::Estimate, &mut sink).unwrap();
        assert_eq!(summary.fallbacks, 0);
        for (o, r) in sink.outputs.iter().zip(&gt.reference) {
            for q in &r.points {
                let p = o.record.points.iter().find(|p| p.origin_frame == q.origin_frame).unwrap();
                assert!(p.point().distance(&q.point()) < 0.5, "frame {} origin {} err {} meta {:?}", r.frame, q.origin_frame, p.point().distance(&q.point()), o.meta);
            }
        }
    }

    #[test]
    fn never_reads_ahead() {
        let s = scene(CameraSpec {
            translation: (1.0, 0.0),
            rotation_deg: 0.0,
            zoom: 1.0,
            jitter: 0.0,
        });
        let log: AccessLog = Default::default();
        let mut frames = VecFrameSource::new(frames_of(&s));
        frames.log = Some(log.clone());
        let mut boxes = TrackFile::from_boxes(s.boxes().to_vec());
        let mut sink = MemorySink {
            log: Some(log.clone()),
            ..Default::default()
        };
        run_loop(&settings(), &mut frames, &mut boxes, &CameraSource::Estimate, &mut sink).unwrap();
        let events = log.borrow();
        let expect: Vec<AccessEvent> = (0..15).flat_map(|t| [AccessEvent::Open(t), AccessEvent::Emit(t)]).collect();
        assert_eq!(*events, expect);
    }

    #[test]
    fn degenerate_frames_fall_back() {
        let flat = ColorFrame::filled(64, 48, [128, 128, 128]).unwrap();
        let mut noise = flat.clone();
        noise.set_pixel(20, 20, [255, 255, 255]);
        let frames = vec![flat.clone(), flat.clone(), noise, flat];
        let b = BBox::new(10.0, 10.0, 16.0, 16.0).unwrap();
        let mut src = VecFrameSource::new(frames);
        let mut mosse = MosseSource::new(b, Default::default());
        let mut sink = MemorySink::default();
        let summary = run_loop(&settings(), &mut src, &mut mosse, &CameraSource::Estimate, &mut sink).unwrap();
        assert_eq!(summary.frames, 4);
        assert_eq!(summary.fallbacks, 3);
        assert!(sink.outputs.iter().skip(1).all(|o| o.meta.ransac_fallback));
        assert!(sink.outputs.iter().all(|o| o.record.points.len() == o.record.frame + 1));
    }

    #[test]
    fn noise_frames_run_to_completion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<ColorFrame> = (0..5)
            .map(|_| {
                let mut f = ColorFrame::filled(96, 72, [0, 0, 0]).unwrap();
                for y in 0..72 {
                    for x in 0..96 {
                        let v: u8 = rng.gen();
                        f.set_pixel(x, y, [v, v, v]);
                    }
                }
                f
            })
            .collect();
        let b = BBox::new(30.0, 20.0, 20.0, 24.0).unwrap();
        let mut src = VecFrameSource::new(frames);
        let mut mosse = MosseSource::new(b, Default::default());
        let mut sink = MemorySink::default();
        let summary = run_loop(&settings(), &mut src, &mut mosse, &CameraSource::Estimate, &mut sink).unwrap();
        assert_eq!(summary.frames, 5);
        for o in &sink.outputs {
            assert!(o.record.points.len() <= o.record.frame + 1);
            assert!(o.record.points.iter().all(|p| p.point().x.is_finite() && p.point().y.is_finite()));
        }
    }

    #[test]
    fn given_homographies_must_cover_clip() {
        let frames = vec![ColorFrame::filled(32, 32, [0, 0, 0]).unwrap(); 3];
        let b = BBox::new(4.0, 4.0, 8.0, 8.0).unwrap();
        let mut boxes = TrackFile::from_boxes(vec![b; 3]);
        let camera = CameraSource::Given(vec![Homography::identity()]);
        let err = run_loop(&settings(), &mut VecFrameSource::new(frames), &mut boxes, &camera, &mut MemorySink::default());
        assert!(matches!(err, Err(PipelineError::MissingHomography(2))));
    }
}
