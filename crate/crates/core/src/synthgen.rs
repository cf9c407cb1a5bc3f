//! Synthetic scenes with exactly known camera motion and target boxes:
//! a textured canvas seen through a chain of homographies, a textured
//! target patch, and the reference trajectories those imply.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, IniDoc};
use crate::features::{detect_corners, CornerParams, ExclusionMask, FeatureError};
use crate::geometry::{write_homog, Homography, Point2};
use crate::image::{frame_file_name, save_color, to_gray, ColorFrame, GrayFrame, ImageError};
use crate::metrics::files;
use crate::tracker::{write_track, BBox};
use crate::trajectory::{write_records_json, write_records_text, Trajectory, TrajectoryError, TrajectoryRecord, DEFAULT_K};

/// Scenes detecting fewer corners than this are tagged unsuitable.
pub const SUITABLE_CORNERS: f64 = 800.0;
/// Bound on the per-frame perspective terms.
pub const MAX_JITTER: f64 = 5e-5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("length mismatch: {boxes} boxes need {expected} homographies, got {got}")]
    LengthMismatch { boxes: usize, expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureSpec {
    /// Gaussian blobs per frame-sized area of canvas.
    pub blob_count: usize,
    /// Mean blob standard deviation, pixels.
    pub blob_scale: f64,
    /// Standard deviation of the band-limited noise, intensity units.
    pub noise_sigma: f64,
    /// Scales all texture around mid-gray.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    /// Camera pan per frame; image content moves the opposite way.
    pub translation: (f64, f64),
    pub rotation_deg: f64,
    /// Scale factor per frame about the frame center.
    pub zoom: f64,
    /// Amplitude of the random per-frame perspective terms.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// Box size in image pixels, fixed for the whole clip.
    pub width: f64,
    pub height: f64,
    /// Path of the box center in frame-0 (world) coordinates.
    pub waypoints: Vec<Point2>,
    /// World pixels per frame along the path; the target stops at the end.
    pub speed: f64,
    /// Pattern amplitude around mid-gray, in (0, 1].
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    /// Anchor fraction used for the reference trajectories.
    pub k: f64,
    pub texture: TextureSpec,
    pub camera: CameraSpec,
    pub target: TargetSpec,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            frames: 100,
            fps: 30.0,
            seed: 0,
            k: DEFAULT_K,
            texture: TextureSpec {
                blob_count: 400,
                blob_scale: 12.0,
                noise_sigma: 0.08,
                contrast: 1.0,
            },
            camera: CameraSpec {
                translation: (2.0, 0.5),
                rotation_deg: 0.1,
                zoom: 1.001,
                jitter: 1e-5,
            },
            target: TargetSpec {
                width: 40.0,
                height: 80.0,
                waypoints: vec![Point2::new(500.0, 420.0), Point2::new(900.0, 300.0)],
                speed: 3.0,
                intensity: 1.0,
            },
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        let (tx, c, t) = (&self.texture, &self.camera, &self.target);
        if self.frames < 2 {
            return bad("frames must be >= 2");
        }
        if self.width < 32 || self.height < 32 {
            return bad("frames must be at least 32x32");
        }
        if !(self.fps > 0.0) || !(0.0..=1.0).contains(&self.k) {
            return bad("fps must be > 0 and k in [0, 1]");
        }
        if !(tx.contrast > 0.0 && tx.contrast <= 1.0) {
            return bad("contrast must lie in (0, 1]");
        }
        if !(tx.blob_scale > 0.0) || !(tx.noise_sigma >= 0.0) {
            return bad("blob_scale must be > 0 and noise_sigma >= 0");
        }
        let motion = [c.translation.0, c.translation.1, c.rotation_deg, c.zoom, c.jitter, t.speed];
        if motion.iter().any(|v| !v.is_finite()) {
            return bad("motion magnitudes must be finite");
        }
        if !(c.zoom > 0.0) || !(0.0..=MAX_JITTER).contains(&c.jitter) {
            return bad("zoom must be > 0 and jitter in [0, 5e-5]");
        }
        if !(t.width >= 1.0 && t.height >= 1.0) || t.speed < 0.0 || !(t.intensity > 0.0 && t.intensity <= 1.0) {
            return bad("target needs size >= 1, speed >= 0, intensity in (0, 1]");
        }
        if t.waypoints.is_empty() || t.waypoints.iter().any(|p| !p.is_finite()) {
            return bad("target needs at least one finite waypoint");
        }
        Ok(())
    }

    pub fn from_doc(doc: &IniDoc) -> Result<Self, SynthError> {
        let d = Self::default();
        let translation = match doc.get_list("camera", "translation")? {
            None => d.camera.translation,
            Some(v) if v.len() == 2 => (v[0], v[1]),
            Some(_) => return Err(SynthError::InvalidSpec("camera translation needs tx,ty".into())),
        };
        let groups = doc.get_groups("target", "waypoints")?;
        let waypoints = if groups.is_empty() {
            d.target.waypoints.clone()
        } else {
            groups
                .iter()
                .map(|g| match g[..] {
                    [x, y] => Ok(Point2::new(x, y)),
                    _ => Err(SynthError::InvalidSpec("waypoints are x,y pairs".into())),
                })
                .collect::<Result<_, _>>()?
        };
        let spec = Self {
            width: doc.get_or("scene", "width", d.width)?,
            height: doc.get_or("scene", "height", d.height)?,
            frames: doc.get_or("scene", "frames", d.frames)?,
            fps: doc.get_or("scene", "fps", d.fps)?,
            seed: doc.get_or("scene", "seed", d.seed)?,
            k: doc.get_or("scene", "k", d.k)?,
            texture: TextureSpec {
                blob_count: doc.get_or("texture", "blob_count", d.texture.blob_count)?,
                blob_scale: doc.get_or("texture", "blob_scale", d.texture.blob_scale)?,
                noise_sigma: doc.get_or("texture", "noise_sigma", d.texture.noise_sigma)?,
                contrast: doc.get_or("texture", "contrast", d.texture.contrast)?,
            },
            camera: CameraSpec {
                translation,
                rotation_deg: doc.get_or("camera", "rotation_deg", d.camera.rotation_deg)?,
                zoom: doc.get_or("camera", "zoom", d.camera.zoom)?,
                jitter: doc.get_or("camera", "jitter", d.camera.jitter)?,
            },
            target: TargetSpec {
                width: doc.get_or("target", "width", d.target.width)?,
                height: doc.get_or("target", "height", d.target.height)?,
                waypoints,
                speed: doc.get_or("target", "speed", d.target.speed)?,
                intensity: doc.get_or("target", "intensity", d.target.intensity)?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::from_doc(&IniDoc::load(path)?)
    }

    /// INI text that [`SceneSpec::from_doc`] reads back to the same spec.
    pub fn to_ini(&self) -> String {
        let (tx, c, t) = (&self.texture, &self.camera, &self.target);
        let waypoints: Vec<String> = t.waypoints.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
        format!(
            "[scene]\nwidth = {}\nheight = {}\nframes = {}\nfps = {}\nseed = {}\nk = {}\n\n\
             [texture]\nblob_count = {}\nblob_scale = {}\nnoise_sigma = {}\ncontrast = {}\n\n\
             [camera]\ntranslation = {},{}\nrotation_deg = {}\nzoom = {}\njitter = {}\n\n\
             [target]\nwidth = {}\nheight = {}\nwaypoints = {}\nspeed = {}\nintensity = {}\n",
            self.width,
            self.height,
            self.frames,
            self.fps,
            self.seed,
            self.k,
            tx.blob_count,
            tx.blob_scale,
            tx.noise_sigma,
            tx.contrast,
            c.translation.0,
            c.translation.1,
            c.rotation_deg,
            c.zoom,
            c.jitter,
            t.width,
            t.height,
            waypoints.join("; "),
            t.speed,
            t.intensity,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Maps frame `t-1` to frame `t`, for `t = 1..frames`.
    pub homographies: Vec<Homography>,
    pub boxes: Vec<BBox>,
    pub reference: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suitability {
    /// Mean detected corners over the sampled frames.
    pub corner_count: f64,
    pub suitable: bool,
}

/// Replays the online trajectory update with known boxes and homographies.
pub fn reference_from_gt(
    boxes: &[BBox],
    homographies: &[Homography],
    width: f64,
    height: f64,
    k: f64,
) -> Result<Vec<TrajectoryRecord>, SynthError> {
    if boxes.is_empty() || homographies.len() + 1 != boxes.len() {
        return Err(SynthError::LengthMismatch {
            boxes: boxes.len(),
            expected: boxes.len().saturating_sub(1),
            got: homographies.len(),
        });
    }
    let mut traj = Trajectory::start(width, height, &boxes[0], k)?;
    let mut out = Vec::with_capacity(boxes.len());
    out.push(traj.record());
    for (b, h) in boxes[1..].iter().zip(homographies) {
        traj = traj.advance(h, b, k)?;
        out.push(traj.record());
    }
    Ok(out)
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f32> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32).collect();
    let s: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable blur with clamped borders.
fn blur(data: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for (i, kv) in kernel.iter().enumerate() {
            let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
            let src = &tmp[yy * w..(yy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Canvas three frames wide and high; world point (0, 0) sits at canvas
/// pixel (width, height).
fn build_canvas(spec: &SceneSpec) -> GrayFrame {
    let (cw, ch) = (3 * spec.width, 3 * spec.height);
    let tx = &spec.texture;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut acc = vec![0f32; cw * ch];

    for _ in 0..9 * tx.blob_count {
        let cx = rng.gen_range(0.0..cw as f64);
        let cy = rng.gen_range(0.0..ch as f64);
        let sigma = tx.blob_scale * rng.gen_range(0.5..1.5);
        let amp = rng.gen_range(0.1..0.3) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let r = 3.0 * sigma;
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(cw - 1);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(ch - 1);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in y0..=y1 {
            let dy2 = (y as f64 - cy).powi(2);
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + dy2;
                acc[y * cw + x] += (amp * (-d2 * inv).exp()) as f32;
            }
        }
    }

    if tx.noise_sigma > 0.0 {
        let white: Vec<f32> = (0..cw * ch).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
        let kernel = gaussian_kernel(1.0);
        // Blurred unit white noise has this standard deviation.
        let gain = kernel.iter().map(|v| v * v).sum::<f32>();
        let norm = tx.noise_sigma as f32 / gain;
        for (a, n) in acc.iter_mut().zip(blur(&white, cw, ch, &kernel)) {
            *a += n * norm;
        }
    }

    let c = tx.contrast as f32;
    GrayFrame::from_fn(cw, ch, |x, y| 0.5 + c * acc[y * cw + x]).expect("canvas dimensions are positive")
}

fn similarity_about(c: Point2, zoom: f64, rot_deg: f64) -> [f64; 9] {
    let (s, r) = (zoom, rot_deg.to_radians());
    let (a, b) = (s * r.cos(), s * r.sin());
    [a, -b, c.x - a * c.x + b * c.y, b, a, c.y - b * c.x - a * c.y, 0.0, 0.0, 1.0]
}

/// Frame-to-frame camera maps for `t = 1..frames`.
fn camera_steps(spec: &SceneSpec) -> Result<Vec<Homography>, SynthError> {
    let cam = &spec.camera;
    let c = Point2::new(spec.width as f64 / 2.0, spec.height as f64 / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let singular = |_| SynthError::InvalidSpec("camera motion is singular".into());
    let sim = Homography::from_rows(similarity_about(c, cam.zoom, cam.rotation_deg)).map_err(singular)?;
    let shift = Homography::translation(-cam.translation.0, -cam.translation.1);
    let to_c = Homography::translation(c.x, c.y);
    let from_c = Homography::translation(-c.x, -c.y);
    (1..spec.frames)
        .map(|_| {
            let jx = cam.jitter * rng.gen_range(-1.0..=1.0);
            let jy = cam.jitter * rng.gen_range(-1.0..=1.0);
            let p = Homography::from_rows([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, jx, jy, 1.0]).map_err(singular)?;
            Ok(shift.compose(&sim).compose(&to_c.compose(&p).compose(&from_c)))
        })
        .collect()
}

fn path_point(waypoints: &[Point2], s: f64) -> Point2 {
    let mut left = s;
    for w in waypoints.windows(2) {
        let len = w[0].distance(&w[1]);
        if left <= len && len > 0.0 {
            let f = left / len;
            return Point2::new(w[0].x + f * (w[1].x - w[0].x), w[0].y + f * (w[1].y - w[0].y));
        }
        left -= len;
    }
    *waypoints.last().expect("validated non-empty")
}

/// Target pattern in [-1, 1] over box-relative coordinates in [0, 1].
fn target_pattern(u: f64, v: f64) -> f64 {
    use std::f64::consts::TAU;
    let a = (TAU * (2.0 * u + 0.1)).sin() * (TAU * (2.5 * v + 0.2)).cos();
    let b = (TAU * (1.3 * u - 0.7 * v)).sin();
    (1.4 * a + 0.6 * b).clamp(-1.0, 1.0)
}

/// Horizontal (or vertical) fraction of the pixel centered at `i` covered by
/// the interval `[lo, hi]`.
fn coverage(i: usize, lo: f64, hi: f64) -> f64 {
    let (a, b) = (i as f64 - 0.5, i as f64 + 0.5);
    (b.min(hi) - a.max(lo)).clamp(0.0, 1.0)
}

/// A generated scene; frames are rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    spec: SceneSpec,
    canvas: GrayFrame,
    steps: Vec<Homography>,
    /// Frame `t` to world.
    to_world: Vec<Homography>,
    boxes: Vec<BBox>,
}

impl SyntheticScene {
    pub fn new(spec: SceneSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let steps = camera_steps(&spec)?;
        let (w, h) = (spec.width as f64, spec.height as f64);
        let mut cumulative = Homography::identity();
        let mut to_world = vec![Homography::identity()];
        let mut boxes = Vec::with_capacity(spec.frames);
        for t in 0..spec.frames {
            if t > 0 {
                cumulative = steps[t - 1].compose(&cumulative);
                to_world.push(cumulative.inverse());
            }
            let inv = &to_world[t];
            let corners = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)];
            for (x, y) in corners {
                let p = inv
                    .apply(Point2::new(x, y))
                    .map_err(|_| SynthError::InvalidSpec(format!("frame {t} corner maps to infinity")))?;
                if !(p.x > -w + 1.0 && p.x < 2.0 * w - 2.0 && p.y > -h + 1.0 && p.y < 2.0 * h - 2.0) {
                    return Err(SynthError::InvalidSpec(format!("camera leaves the canvas at frame {t}")));
                }
            }
            let world = path_point(&spec.target.waypoints, spec.target.speed * t as f64);
            let c = cumulative
                .apply(world)
                .map_err(|_| SynthError::InvalidSpec(format!("target maps to infinity at frame {t}")))?;
            let b = BBox::from_center(c, spec.target.width, spec.target.height);
            if b.x < 0.0 || b.y < 0.0 || b.x + b.w > w || b.y + b.h > h {
                return Err(SynthError::InvalidSpec(format!("target box {b} leaves the frame at frame {t}")));
            }
            boxes.push(b);
        }
        Ok(Self {
            canvas: build_canvas(&spec),
            spec,
            steps,
            to_world,
            boxes,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn frames(&self) -> usize {
        self.spec.frames
    }

    pub fn homographies(&self) -> &[Homography] {
        &self.steps
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    /// Frame `t` before quantization.
    pub fn render_gray(&self, t: usize) -> GrayFrame {
        let (w, h) = (self.spec.width, self.spec.height);
        let inv = self.to_world[t].coeffs();
        let (ox, oy) = (w as f64, h as f64);
        let mut data = vec![0f32; w * h];
        for y in 0..h {
            let yf = y as f64;
            for x in 0..w {
                let xf = x as f64;
                let s = inv[6] * xf + inv[7] * yf + inv[8];
                let wx = (inv[0] * xf + inv[1] * yf + inv[2]) / s;
                let wy = (inv[3] * xf + inv[4] * yf + inv[5]) / s;
                data[y * w + x] = self.canvas.sample(wx + ox, wy + oy);
            }
        }

        let b = self.boxes[t];
        let amp = self.spec.target.intensity;
        let x0 = (b.x - 0.5).floor().max(0.0) as usize;
        let x1 = ((b.x + b.w + 0.5).ceil() as usize).min(w - 1);
        let y0 = (b.y - 0.5).floor().max(0.0) as usize;
        let y1 = ((b.y + b.h + 0.5).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            let cy = coverage(y, b.y, b.y + b.h);
            let v = ((y as f64 - b.y) / b.h).clamp(0.0, 1.0);
            for x in x0..=x1 {
                let alpha = cy * coverage(x, b.x, b.x + b.w);
                if alpha <= 0.0 {
                    continue;
                }
                let u = ((x as f64 - b.x) / b.w).clamp(0.0, 1.0);
                let tex = 0.5 + 0.5 * amp * target_pattern(u, v);
                let px = &mut data[y * w + x];
                *px = ((1.0 - alpha) * *px as f64 + alpha * tex) as f32;
            }
        }
        GrayFrame::from_fn(w, h, |x, y| data[y * w + x]).expect("frame dimensions validated")
    }

    /// Frame `t` as an 8-bit gray RGB image.
    pub fn render_frame(&self, t: usize) -> ColorFrame {
        let g = self.render_gray(t);
        let data = g
            .data()
            .iter()
            .flat_map(|&v| {
                let q = (v * 255.0).round().clamp(0.0, 255.0) as u8;
                [q, q, q]
            })
            .collect();
        ColorFrame::new(self.spec.width, self.spec.height, data).expect("frame dimensions validated")
    }

    pub fn ground_truth(&self) -> Result<GroundTruth, SynthError> {
        let reference = reference_from_gt(
            &self.boxes,
            &self.steps,
            self.spec.width as f64,
            self.spec.height as f64,
            self.spec.k,
        )?;
        Ok(GroundTruth {
            homographies: self.steps.clone(),
            boxes: self.boxes.clone(),
            reference,
        })
    }

    /// Corner count with default detector settings on the first, middle and
    /// last frames, target masked out.
    pub fn suitability(&self) -> Suitability {
        let n = self.frames();
        let mut sample = vec![0, n / 2, n - 1];
        sample.dedup();
        let total: usize = sample
            .iter()
            .map(|&t| {
                let g = to_gray(&self.render_frame(t));
                let mask = ExclusionMask::new([self.boxes[t]], g.width(), g.height());
                match detect_corners(&g, &mask, &CornerParams::default()) {
                    Ok(c) => c.len(),
                    Err(FeatureError::NoFeatures) => 0,
                    Err(_) => 0,
                }
            })
            .sum();
        let corner_count = total as f64 / sample.len() as f64;
        Suitability {
            corner_count,
            suitable: corner_count >= SUITABLE_CORNERS,
        }
    }
}

/// Eager variant: every frame plus the ground truth.
pub fn generate(spec: SceneSpec) -> Result<(Vec<ColorFrame>, GroundTruth), SynthError> {
    let scene = SyntheticScene::new(spec)?;
    let frames = (0..scene.frames()).map(|t| scene.render_frame(t)).collect();
    Ok((frames, scene.ground_truth()?))
}

/// File names inside a scene directory.
pub const FRAMES_DIR: &str = "frames";
pub const SPEC_FILE: &str = "spec.ini";
pub const REFERENCE_TEXT: &str = "reference.traj";
pub const SUITABILITY_FILE: &str = "suitability.json";

#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub frames_dir: PathBuf,
    pub homographies: PathBuf,
    pub boxes: PathBuf,
    pub reference: PathBuf,
    pub suitability: Suitability,
}

fn create(path: &Path) -> Result<BufWriter<File>, SynthError> {
    File::create(path).map(BufWriter::new).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn finish(path: &Path, r: std::io::Result<()>) -> Result<(), SynthError> {
    r.map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes frames and ground truth into `dir`; `ext` is `png` or `ppm`.
pub fn write_scene(scene: &SyntheticScene, dir: &Path, ext: &str) -> Result<SceneFiles, SynthError> {
    let frames_dir = dir.join(FRAMES_DIR);
    finish(&frames_dir, std::fs::create_dir_all(&frames_dir))?;
    for t in 0..scene.frames() {
        save_color(&frames_dir.join(frame_file_name(t, ext)), &scene.render_frame(t))?;
    }
    let gt = scene.ground_truth()?;

    let homog = dir.join(files::REF_HOMOG);
    let mut w = create(&homog)?;
    finish(&homog, write_homog(&mut w, &gt.homographies).and_then(|_| w.flush()))?;

    let boxes = dir.join(files::REF_BOXES);
    let mut w = create(&boxes)?;
    finish(&boxes, write_track(&mut w, &gt.boxes).and_then(|_| w.flush()))?;

    let reference = dir.join(files::REF_TRAJECTORY);
    let mut w = create(&reference)?;
    finish(&reference, write_records_json(&mut w, &gt.reference).and_then(|_| w.flush()))?;

    let text = dir.join(REFERENCE_TEXT);
    let mut w = create(&text)?;
    finish(&text, write_records_text(&mut w, &gt.reference).and_then(|_| w.flush()))?;

    let spec = dir.join(SPEC_FILE);
    finish(&spec, std::fs::write(&spec, scene.spec().to_ini()))?;

    let suitability = scene.suitability();
    let path = dir.join(SUITABILITY_FILE);
    let json = serde_json::to_string_pretty(&suitability).expect("plain struct serializes");
    finish(&path, std::fs::write(&path, json + "\n"))?;

    Ok(SceneFiles {
        frames_dir,
        homographies: homog,
        boxes,
        reference,
        suitability,
    })
}
