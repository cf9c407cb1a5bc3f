//! Target motion: bounding boxes, the MOSSE correlation-filter tracker and
//! per-frame box files, all behind the [`BoxSource`] contract.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::geometry::Point2;
use crate::image::GrayFrame;
use crate::FormatError;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("invalid box {0}")]
    InvalidBox(String),
    #[error("box {bbox} is outside the {width}x{height} frame or too small")]
    BoxOutOfBounds { bbox: BBox, width: usize, height: usize },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("track file line {}: {}", .0.line, .0.message)]
    Parse(FormatError),
    #[error("no box for frame {0}")]
    MissingFrame(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("tracker used before initialization")]
    NotInitialized,
}

/// Axis-aligned box: left, top, width, height in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, TrackerError> {
        let b = Self { x, y, w, h };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(TrackerError::InvalidBox(b.to_string()))
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn from_center(c: Point2, w: f64, h: f64) -> Self {
        Self {
            x: c.x - 0.5 * w,
            y: c.y - 0.5 * h,
            w,
            h,
        }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains_strict(&self, p: Point2) -> bool {
        p.x > self.x && p.x < self.x + self.w && p.y > self.y && p.y < self.y + self.h
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Intersection with the frame rectangle, `None` if empty.
    pub fn clip_to(&self, width: f64, height: f64) -> Option<Self> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width);
        let y1 = (self.y + self.h).min(height);
        (x1 > x0 && y1 > y0).then_some(Self {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    /// Shifts the box (size unchanged) so it lies inside the frame where
    /// possible; boxes larger than the frame are pinned to the origin.
    pub fn shifted_into(&self, width: f64, height: f64) -> Self {
        Self {
            x: self.x.min(width - self.w).max(0.0),
            y: self.y.min(height - self.h).max(0.0),
            ..*self
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        if self == other {
            return 1.0;
        }
        let ix = ((self.x + self.w).min(other.x + other.w) - self.x.max(other.x)).max(0.0);
        let iy = ((self.y + self.h).min(other.y + other.h) - self.y.max(other.y)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).min(1.0)
        }
    }

    fn within_frame(&self, width: usize, height: usize) -> bool {
        const TOL: f64 = 1e-9;
        self.x >= -TOL
            && self.y >= -TOL
            && self.x + self.w <= width as f64 + TOL
            && self.y + self.h <= height as f64 + TOL
    }
}

/// One tracker answer for a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObservation {
    pub bbox: BBox,
    /// Peak-to-sidelobe ratio when the source is a correlation tracker.
    pub psr: Option<f64>,
    /// The source did not trust its own estimate and repeated the last box.
    pub low_confidence: bool,
}

/// Anything that yields the target box frame by frame, in stream order.
pub trait BoxSource {
    /// Box for frame 0; called once before any `next`.
    fn initial(&mut self, frame: &GrayFrame) -> Result<BBox, TrackerError>;
    /// Box for frame `t >= 1`.
    fn next(&mut self, t: usize, frame: &GrayFrame) -> Result<BoxObservation, TrackerError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosseConfig {
    /// Side of the square correlation window; a power of two.
    pub template_size: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Correlation window extent relative to the box.
    pub padding: f64,
    pub perturbations: usize,
    pub psr_threshold: f64,
    pub seed: u64,
}

impl Default for MosseConfig {
    fn default() -> Self {
        Self {
            template_size: 64,
            learning_rate: 0.125,
            regularization: 1e-5,
            padding: 2.0,
            perturbations: 8,
            psr_threshold: 5.0,
            seed: 0,
        }
    }
}

impl MosseConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !self.template_size.is_power_of_two() || self.template_size < 8 {
            return Err(TrackerError::InvalidConfig("template_size must be a power of two >= 8"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(TrackerError::InvalidConfig("learning_rate must lie in (0, 1)"));
        }
        if !(self.padding >= 1.0) || !(self.regularization >= 0.0) {
            return Err(TrackerError::InvalidConfig("padding must be >= 1 and regularization >= 0"));
        }
        Ok(())
    }
}

type C64 = Complex<f64>;

const REFINE_STEPS: usize = 2;
const REFINE_TOL: f64 = 0.05;

#[derive(Clone)]
struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn transpose(&self, buf: &mut [C64]) {
        let n = self.n;
        for r in 0..n {
            for c in (r + 1)..n {
                buf.swap(r * n + c, c * n + r);
            }
        }
    }

    fn run(&self, buf: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        fft.process(buf);
        self.transpose(buf);
        fft.process(buf);
        self.transpose(buf);
    }

    fn forward(&self, buf: &mut [C64]) {
        self.run(buf, &self.forward);
    }

    fn inverse(&self, buf: &mut [C64]) {
        self.run(buf, &self.inverse);
        let s = 1.0 / (self.n * self.n) as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// MOSSE correlation-filter state. Translation only: the box size set at
/// initialization never changes.
#[derive(Clone)]
pub struct MosseTracker {
    cfg: MosseConfig,
    fft: Fft2,
    window: Vec<f64>,
    target: Vec<C64>,
    num: Vec<C64>,
    den: Vec<C64>,
    last_box: BBox,
    psr: f64,
    frame_w: usize,
    frame_h: usize,
}

impl fmt::Debug for MosseTracker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MosseTracker")
            .field("cfg", &self.cfg)
            .field("last_box", &self.last_box)
            .field("psr", &self.psr)
            .finish()
    }
}

/// Affine sampling transform of a patch about its center.
#[derive(Clone, Copy)]
struct Affine2 {
    a: [f64; 4],
}

impl Affine2 {
    const IDENTITY: Affine2 = Affine2 { a: [1.0, 0.0, 0.0, 1.0] };
}

impl MosseTracker {
    pub fn last_box(&self) -> BBox {
        self.last_box
    }

    pub fn psr(&self) -> f64 {
        self.psr
    }

    pub fn config(&self) -> &MosseConfig {
        &self.cfg
    }

    fn sample_patch(&self, g: &GrayFrame, b: &BBox, warp: Affine2) -> Vec<f64> {
        let n = self.cfg.template_size;
        let half = (n / 2) as f64;
        let sx = b.w * self.cfg.padding / n as f64;
        let sy = b.h * self.cfg.padding / n as f64;
        let c = b.center();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let v = i as f64 - half;
            for j in 0..n {
                let u = j as f64 - half;
                let wu = warp.a[0] * u + warp.a[1] * v;
                let wv = warp.a[2] * u + warp.a[3] * v;
                out.push(g.sample(c.x + wu * sx, c.y + wv * sy) as f64);
            }
        }
        out
    }

    /// Log transform, normalization to zero mean and unit variance, then
    /// the Hann window.
    fn preprocess(&self, patch: &[f64]) -> Vec<C64> {
        let logs: Vec<f64> = patch.iter().map(|v| (1.0 + 255.0 * v).ln()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv_std = if var > 1e-12 { 1.0 / var.sqrt() } else { 0.0 };
        logs.iter()
            .zip(&self.window)
            .map(|(v, w)| C64::new((v - mean) * inv_std * w, 0.0))
            .collect()
    }

    fn spectrum(&self, g: &GrayFrame, b: &BBox, warp: Affine2) -> Vec<C64> {
        let mut buf = self.preprocess(&self.sample_patch(g, b, warp));
        self.fft.forward(&mut buf);
        buf
    }

    fn accumulate(&mut self, spec: &[C64], rate: f64) {
        for ((num, den), (f, g)) in self
            .num
            .iter_mut()
            .zip(self.den.iter_mut())
            .zip(spec.iter().zip(&self.target))
        {
            *num = *num * (1.0 - rate) + g * f.conj() * rate;
            *den = *den * (1.0 - rate) + f * f.conj() * rate;
        }
    }

    /// Correlation response of the current filter on the window at `b`.
    pub fn response(&self, g: &GrayFrame, b: &BBox) -> Vec<f64> {
        let spec = self.spectrum(g, b, Affine2::IDENTITY);
        let eps = self.cfg.regularization;
        let mut buf: Vec<C64> = spec
            .iter()
            .zip(self.num.iter().zip(&self.den))
            .map(|(f, (a, d))| f * (a / (d + eps)))
            .collect();
        self.fft.inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Peak location of the response at `b`, as a box shift in pixels, plus
    /// the PSR of that response.
    fn locate(&self, g: &GrayFrame, b: &BBox) -> (f64, f64, f64) {
        let n = self.cfg.template_size;
        let resp = self.response(g, b);
        let (peak_idx, peak) = resp
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let (pi, pj) = (peak_idx / n, peak_idx % n);
        let at = |i: usize, j: usize| resp[(i % n) * n + (j % n)];
        let dj = quadratic_peak(at(pi, pj + n - 1), peak, at(pi, pj + 1));
        let di = quadratic_peak(at(pi + n - 1, pj), peak, at(pi + 1, pj));
        // The desired response peaks at the window center.
        let half = (n / 2) as f64;
        let sx = b.w * self.cfg.padding / n as f64;
        let sy = b.h * self.cfg.padding / n as f64;
        (
            (pj as f64 + dj - half) * sx,
            (pi as f64 + di - half) * sy,
            psr(&resp, n, pi, pj),
        )
    }

    /// Advances the tracker one frame; returns the new box and its PSR.
    /// Below the PSR threshold the previous box is returned unchanged.
    pub fn update(&mut self, g: &GrayFrame) -> (BBox, f64) {
        let (fw, fh) = (self.frame_w as f64, self.frame_h as f64);
        let mut b = self.last_box;
        let (dx, dy, first_psr) = self.locate(g, &b);
        self.psr = first_psr;
        if self.is_low_confidence() {
            // Treated as a miss: keep the last box, leave the filter alone.
            return (self.last_box, self.psr);
        }
        b = b.translated(dx, dy).shifted_into(fw, fh);
        // The window taper biases the peak toward the old center; re-centering
        // and searching again removes most of that lag.
        for _ in 0..REFINE_STEPS {
            let (dx, dy, _) = self.locate(g, &b);
            let step = b.translated(dx, dy).shifted_into(fw, fh);
            let moved = (step.x - b.x).hypot(step.y - b.y);
            b = step;
            if moved < REFINE_TOL {
                break;
            }
        }
        self.last_box = b;

        let spec = self.spectrum(g, &b, Affine2::IDENTITY);
        self.accumulate(&spec, self.cfg.learning_rate);
        (self.last_box, self.psr)
    }

    pub fn is_low_confidence(&self) -> bool {
        self.psr < self.cfg.psr_threshold
    }
}

fn quadratic_peak(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom >= 0.0 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Peak-to-sidelobe ratio; the sidelobe excludes an 11x11 window around
/// the peak (circularly).
fn psr(resp: &[f64], n: usize, pi: usize, pj: usize) -> f64 {
    let peak = resp[pi * n + pj];
    let circ = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(n - d)
    };
    let (mut sum, mut sum2, mut count) = (0.0, 0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if circ(i, pi) <= 5 && circ(j, pj) <= 5 {
                continue;
            }
            let v = resp[i * n + j];
            sum += v;
            sum2 += v * v;
            count += 1;
        }
    }
    if count == 0 {
        return 0.0;
    }
    let mean = sum / count as f64;
    let std = (sum2 / count as f64 - mean * mean).max(0.0).sqrt();
    if std <= 1e-12 {
        return 0.0;
    }
    ((peak - mean) / std).max(0.0)
}

/// Builds the tracker on the first frame from the target box.
pub fn tracker_init(g: &GrayFrame, b0: BBox, cfg: &MosseConfig) -> Result<MosseTracker, TrackerError> {
    cfg.validate()?;
    if !b0.is_valid() || b0.area() < 16.0 || !b0.within_frame(g.width(), g.height()) {
        return Err(TrackerError::BoxOutOfBounds {
            bbox: b0,
            width: g.width(),
            height: g.height(),
        });
    }
    let n = cfg.template_size;
    let hann: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin().powi(2))
        .collect();
    let window = (0..n * n).map(|k| hann[k / n] * hann[k % n]).collect();

    let fft = Fft2::new(n);
    let sigma = n as f64 / 16.0;
    let half = (n / 2) as f64;
    let mut target: Vec<C64> = (0..n * n)
        .map(|k| {
            let (i, j) = ((k / n) as f64 - half, (k % n) as f64 - half);
            C64::new((-(i * i + j * j) / (2.0 * sigma * sigma)).exp(), 0.0)
        })
        .collect();
    fft.forward(&mut target);

    let mut t = MosseTracker {
        cfg: *cfg,
        fft,
        window,
        target,
        num: vec![C64::new(0.0, 0.0); n * n],
        den: vec![C64::new(0.0, 0.0); n * n],
        last_box: b0,
        psr: 0.0,
        frame_w: g.width(),
        frame_h: g.height(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = cfg.perturbations.max(1);
    for _ in 0..count {
        let angle: f64 = rng.gen_range(-0.1..0.1);
        let scale: f64 = rng.gen_range(0.95..1.05);
        let shear: f64 = rng.gen_range(-0.03..0.03);
        let (s, c) = angle.sin_cos();
        let warp = Affine2 {
            a: [scale * c, -scale * s + shear, scale * s, scale * c],
        };
        let spec = t.spectrum(g, &b0, warp);
        for ((num, den), (f, gt)) in t
            .num
            .iter_mut()
            .zip(t.den.iter_mut())
            .zip(spec.iter().zip(&t.target))
        {
            *num += gt * f.conj();
            *den += f * f.conj();
        }
    }
    let resp = t.response(g, &b0);
    let (pk, _) = resp
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    t.psr = psr(&resp, n, pk / n, pk % n);
    Ok(t)
}

/// Advances `state` on the next frame.
pub fn tracker_update(state: &mut MosseTracker, g: &GrayFrame) -> (BBox, f64) {
    state.update(g)
}

/// The live MOSSE tracker as a [`BoxSource`].
#[derive(Debug)]
pub struct MosseSource {
    cfg: MosseConfig,
    init_box: BBox,
    tracker: Option<MosseTracker>,
}

impl MosseSource {
    pub fn new(init_box: BBox, cfg: MosseConfig) -> Self {
        Self {
            cfg,
            init_box,
            tracker: None,
        }
    }
}

impl BoxSource for MosseSource {
    fn initial(&mut self, frame: &GrayFrame) -> Result<BBox, TrackerError> {
        let t = tracker_init(frame, self.init_box, &self.cfg)?;
        self.tracker = Some(t);
        Ok(self.init_box)
    }

    fn next(&mut self, _t: usize, frame: &GrayFrame) -> Result<BoxObservation, TrackerError> {
        let tracker = self.tracker.as_mut().ok_or(TrackerError::NotInitialized)?;
        let (bbox, psr) = tracker.update(frame);
        Ok(BoxObservation {
            bbox,
            psr: Some(psr),
            low_confidence: tracker.is_low_confidence(),
        })
    }
}

/// Per-frame boxes read from a track file (external trackers, ground truth).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackFile {
    boxes: BTreeMap<usize, BBox>,
}

impl TrackFile {
    pub fn from_boxes(boxes: impl IntoIterator<Item = BBox>) -> Self {
        Self {
            boxes: boxes.into_iter().enumerate().collect(),
        }
    }

    pub fn parse<R: BufRead>(r: R) -> Result<Self, TrackerError> {
        let mut boxes = BTreeMap::new();
        for (i, line) in r.lines().enumerate() {
            let lineno = i + 1;
            let err = |m: String| TrackerError::Parse(FormatError::new(lineno, m));
            let line = line.map_err(|e| err(e.to_string()))?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, got {}", fields.len())));
            }
            let idx: usize = fields[0].parse().map_err(|e| err(format!("frame index: {e}")))?;
            let mut v = [0.0f64; 4];
            for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|e| err(format!("{f:?}: {e}")))?;
            }
            let b = BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| err(e.to_string()))?;
            if boxes.insert(idx, b).is_some() {
                return Err(err(format!("duplicate frame index {idx}")));
            }
        }
        Ok(Self { boxes })
    }

    pub fn get(&self, t: usize) -> Result<BBox, TrackerError> {
        self.boxes.get(&t).copied().ok_or(TrackerError::MissingFrame(t))
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> impl Iterator<Item = (usize, BBox)> + '_ {
        self.boxes.iter().map(|(&k, &v)| (k, v))
    }
}

/// Opens a track file: `frame_index,x,y,w,h` per line, `#` comments.
pub fn track_source_from_file(path: &Path) -> Result<TrackFile, TrackerError> {
    let f = std::fs::File::open(path).map_err(|source| TrackerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TrackFile::parse(std::io::BufReader::new(f))
}

/// Writes boxes in track-file format with round-trip precision.
pub fn write_track<W: Write>(mut w: W, boxes: &[BBox]) -> std::io::Result<()> {
    for (t, b) in boxes.iter().enumerate() {
        writeln!(w, "{t},{},{},{},{}", b.x, b.y, b.w, b.h)?;
    }
    Ok(())
}

impl BoxSource for TrackFile {
    fn initial(&mut self, _frame: &GrayFrame) -> Result<BBox, TrackerError> {
        self.get(0)
    }

    fn next(&mut self, t: usize, _frame: &GrayFrame) -> Result<BoxObservation, TrackerError> {
        Ok(BoxObservation {
            bbox: self.get(t)?,
            psr: None,
            low_confidence: false,
        })
    }
}
