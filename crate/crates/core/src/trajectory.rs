//! Anchor points and the per-frame trajectory: propagation through the
//! camera homography, clipping to the frame, appending the current anchor.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Homography, Point2};
use crate::tracker::BBox;
use crate::FormatError;

/// Default vertical anchor fraction (feet / snow contact).
pub const DEFAULT_K: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("anchor fraction k = {0} outside [0, 1]")]
    InvalidK(f64),
    #[error("point ({x}, {y}) outside the {w}x{h} frame")]
    OutOfBounds { x: f64, y: f64, w: f64, h: f64 },
    #[error("frame {0} already has an anchor")]
    DuplicateOrigin(usize),
    #[error("invalid smoothing parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid trajectory: {0}")]
    Invalid(String),
}

/// Anchor point of a box: horizontal center, `k` of the way down.
pub fn extract_anchor(b: &BBox, k: f64) -> Result<Point2, TrajectoryError> {
    if !(0.0..=1.0).contains(&k) {
        return Err(TrajectoryError::InvalidK(k));
    }
    Ok(Point2::new(b.x + 0.5 * b.w, b.y + k * b.h))
}

/// Clamps into the half-open frame `[0, w) x [0, h)`.
pub fn clamp_to_frame(p: Point2, w: f64, h: f64) -> Point2 {
    Point2::new(p.x.clamp(0.0, w.next_down()), p.y.clamp(0.0, h.next_down()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajPoint {
    #[serde(rename = "origin")]
    pub origin_frame: usize,
    #[serde(flatten)]
    pub p: Point2Serde,
}

/// Serde view of a point (`x`, `y` fields).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2Serde {
    pub x: f64,
    pub y: f64,
}

impl From<Point2> for Point2Serde {
    fn from(p: Point2) -> Self {
        Self { x: p.x, y: p.y }
    }
}

impl From<Point2Serde> for Point2 {
    fn from(p: Point2Serde) -> Self {
        Point2::new(p.x, p.y)
    }
}

impl TrajPoint {
    pub fn new(origin_frame: usize, p: Point2) -> Self {
        Self {
            origin_frame,
            p: p.into(),
        }
    }

    pub fn point(&self) -> Point2 {
        self.p.into()
    }
}

/// Anchor points of frames `0..=t` that are still visible, in the
/// coordinates of frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<TrajPoint>,
    frame_index: usize,
    frame_w: f64,
    frame_h: f64,
}

impl Trajectory {
    /// Empty trajectory at frame 0.
    pub fn new(frame_w: f64, frame_h: f64) -> Self {
        Self {
            points: Vec::new(),
            frame_index: 0,
            frame_w,
            frame_h,
        }
    }

    /// Rebuilds a trajectory from stored points, checking its invariants.
    pub fn from_parts(
        frame_index: usize,
        frame_w: f64,
        frame_h: f64,
        points: Vec<TrajPoint>,
    ) -> Result<Self, TrajectoryError> {
        let t = Self {
            points,
            frame_index,
            frame_w,
            frame_h,
        };
        t.check_invariants()?;
        Ok(t)
    }

    pub fn points(&self) -> &[TrajPoint] {
        &self.points
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn frame_size(&self) -> (f64, f64) {
        (self.frame_w, self.frame_h)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x < self.frame_w && p.y >= 0.0 && p.y < self.frame_h
    }

    /// Every point in bounds, origins strictly increasing and not in the future.
    pub fn check_invariants(&self) -> Result<(), TrajectoryError> {
        for tp in &self.points {
            let p = tp.point();
            if !p.is_finite() || !self.contains_point(p) {
                return Err(TrajectoryError::Invalid(format!("point {p:?} out of frame")));
            }
            if tp.origin_frame > self.frame_index {
                return Err(TrajectoryError::Invalid(format!("origin {} in the future", tp.origin_frame)));
            }
        }
        if self.points.windows(2).any(|w| w[0].origin_frame >= w[1].origin_frame) {
            return Err(TrajectoryError::Invalid("origins not strictly increasing".into()));
        }
        Ok(())
    }

    /// Maps every point into the next frame; points leaving the frame (or
    /// the projective chart) are dropped for good.
    pub fn propagate(&self, h: &Homography, new_w: f64, new_h: f64) -> Trajectory {
        let mut next = Trajectory {
            points: Vec::with_capacity(self.points.len() + 1),
            frame_index: self.frame_index + 1,
            frame_w: new_w,
            frame_h: new_h,
        };
        for tp in &self.points {
            if let Ok(q) = h.apply(tp.point()) {
                if q.is_finite() && next.contains_point(q) {
                    next.points.push(TrajPoint::new(tp.origin_frame, q));
                }
            }
        }
        next
    }

    /// Appends the current frame's anchor.
    pub fn append_current(&mut self, p: Point2) -> Result<(), TrajectoryError> {
        if !p.is_finite() || !self.contains_point(p) {
            return Err(TrajectoryError::OutOfBounds {
                x: p.x,
                y: p.y,
                w: self.frame_w,
                h: self.frame_h,
            });
        }
        if self.points.last().is_some_and(|l| l.origin_frame >= self.frame_index) {
            return Err(TrajectoryError::DuplicateOrigin(self.frame_index));
        }
        self.points.push(TrajPoint::new(self.frame_index, p));
        Ok(())
    }

    /// Frame 0: a trajectory holding only the clamped anchor of `b0`.
    pub fn start(frame_w: f64, frame_h: f64, b0: &BBox, k: f64) -> Result<Trajectory, TrajectoryError> {
        let mut traj = Trajectory::new(frame_w, frame_h);
        traj.append_current(clamp_to_frame(extract_anchor(b0, k)?, frame_w, frame_h))?;
        Ok(traj)
    }

    /// One online step: propagate by `h`, then append the clamped anchor of
    /// the current box.
    pub fn advance(&self, h: &Homography, b: &BBox, k: f64) -> Result<Trajectory, TrajectoryError> {
        let (w, hgt) = (self.frame_w, self.frame_h);
        let mut next = self.propagate(h, w, hgt);
        next.append_current(clamp_to_frame(extract_anchor(b, k)?, w, hgt))?;
        Ok(next)
    }

    pub fn record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            frame: self.frame_index,
            width: self.frame_w,
            height: self.frame_h,
            points: self.points.clone(),
        }
    }
}

/// Savitzky-Golay weights for the center sample of a window of
/// half-width `half` and polynomial degree `order`.
fn savgol_weights(half: usize, order: usize) -> Vec<f64> {
    let n = 2 * half + 1;
    let deg = order.min(n - 1);
    let v = DMatrix::from_fn(n, deg + 1, |i, j| (i as f64 - half as f64).powi(j as i32));
    let vt = v.transpose();
    let normal = &vt * &v;
    let inv = normal.try_inverse().expect("Vandermonde normal matrix of distinct nodes");
    // The fitted polynomial at offset 0 is its constant term.
    let row = inv.row(0) * vt;
    row.iter().copied().collect()
}

/// Display-only smoothing of a trajectory polyline. Windows shrink
/// symmetrically near the ends; trajectories shorter than `window` pass
/// through unchanged.
pub fn smooth_for_render(points: &[Point2], window: usize, poly_order: usize) -> Result<Vec<Point2>, TrajectoryError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(TrajectoryError::InvalidParams("window must be odd"));
    }
    if poly_order >= window {
        return Err(TrajectoryError::InvalidParams("poly_order must be below window"));
    }
    let n = points.len();
    if n < window {
        return Ok(points.to_vec());
    }
    let half = window / 2;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; half + 1];
    let xs = DVector::from_iterator(n, points.iter().map(|p| p.x));
    let ys = DVector::from_iterator(n, points.iter().map(|p| p.y));
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let hw = half.min(i).min(n - 1 - i);
        let weights = cache[hw].get_or_insert_with(|| savgol_weights(hw, poly_order));
        let lo = i - hw;
        let (mut x, mut y) = (0.0, 0.0);
        for (k, wgt) in weights.iter().enumerate() {
            x += wgt * xs[lo + k];
            y += wgt * ys[lo + k];
        }
        out.push(Point2::new(x, y));
    }
    Ok(out)
}

/// One frame of trajectory output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub frame: usize,
    pub width: f64,
    pub height: f64,
    pub points: Vec<TrajPoint>,
}

impl TrajectoryRecord {
    pub fn to_trajectory(&self) -> Result<Trajectory, TrajectoryError> {
        Trajectory::from_parts(self.frame, self.width, self.height, self.points.clone())
    }

    /// `frame (origin:x:y);(origin:x:y)...` with three decimals.
    pub fn to_text_line(&self) -> String {
        let mut s = self.frame.to_string();
        for (i, tp) in self.points.iter().enumerate() {
            s.push(if i == 0 { ' ' } else { ';' });
            let _ = write!(s, "({}:{:.3}:{:.3})", tp.origin_frame, tp.p.x, tp.p.y);
        }
        s
    }
}

pub fn write_records_text<W: Write>(mut w: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_text_line())?;
    }
    Ok(())
}

/// Parses the text variant. Frame sizes are not part of it and come from
/// the caller.
pub fn read_records_text<R: BufRead>(r: R, width: f64, height: f64) -> Result<Vec<TrajectoryRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let err = |m: String| FormatError::new(lineno, m);
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (frame, rest) = line.split_once(' ').unwrap_or((line, ""));
        let frame: usize = frame.parse().map_err(|e| err(format!("frame index: {e}")))?;
        let mut points = Vec::new();
        for item in rest.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let inner = item
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| err(format!("malformed point {item:?}")))?;
            let parts: Vec<&str> = inner.split(':').collect();
            if parts.len() != 3 {
                return Err(err(format!("malformed point {item:?}")));
            }
            let origin = parts[0].parse().map_err(|e| err(format!("origin: {e}")))?;
            let x: f64 = parts[1].parse().map_err(|e| err(format!("x: {e}")))?;
            let y: f64 = parts[2].parse().map_err(|e| err(format!("y: {e}")))?;
            points.push(TrajPoint::new(origin, Point2::new(x, y)));
        }
        out.push(TrajectoryRecord {
            frame,
            width,
            height,
            points,
        });
    }
    Ok(out)
}

/// Structured variant: one JSON object per line.
pub fn write_records_json<W: Write>(mut w: W, records: &[TrajectoryRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records_json<R: BufRead>(r: R) -> Result<Vec<TrajectoryRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| FormatError::new(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::new(lineno, e.to_string()))?);
    }
    Ok(out)
}
