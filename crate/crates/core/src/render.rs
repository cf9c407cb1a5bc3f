//! Trajectory overlay: anti-aliased polyline, point dots and the current
//! box outline, drawn on a copy of the frame.

use crate::geometry::Point2;
use crate::image::ColorFrame;
use crate::tracker::BBox;
use crate::trajectory::{smooth_for_render, Trajectory, TrajectoryError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    pub line_color: [u8; 3],
    pub box_color: [u8; 3],
    pub line_width: f64,
    pub point_radius: f64,
    pub draw_box: bool,
    /// Savitzky-Golay (window, order) applied for display only.
    pub smooth: Option<(usize, usize)>,
    /// Leave out points that fall inside the current box.
    pub hide_points_in_box: bool,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            line_color: [30, 110, 255],
            box_color: [255, 200, 0],
            line_width: 2.0,
            point_radius: 2.0,
            draw_box: true,
            smooth: None,
            hide_points_in_box: true,
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.line_width >= 1.0) || !(self.point_radius >= 0.0) {
            return Err("line_width must be >= 1 and point_radius >= 0");
        }
        if let Some((w, o)) = self.smooth {
            if w == 0 || w % 2 == 0 || o >= w {
                return Err("smoothing window must be odd and larger than the order");
            }
        }
        Ok(())
    }
}

/// Per-pixel coverage in [0, 1], combined by maximum so overlapping
/// primitives do not darken twice.
struct Coverage {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl Coverage {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    /// Pixels whose centers lie within `half + 0.5` of the segment get
    /// coverage falling off linearly over the last pixel.
    fn segment(&mut self, a: Point2, b: Point2, half: f64) {
        let reach = half + 0.5;
        let x0 = (a.x.min(b.x) - reach).floor().max(0.0);
        let x1 = (a.x.max(b.x) + reach).ceil().min(self.w as f64 - 1.0);
        let y0 = (a.y.min(b.y) - reach).floor().max(0.0);
        let y1 = (a.y.max(b.y) + reach).ceil().min(self.h as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            return;
        }
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let (px, py) = (x as f64 - a.x, y as f64 - a.y);
                let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let d = (px - t * dx).hypot(py - t * dy);
                let c = (reach - d).clamp(0.0, 1.0) as f32;
                let slot = &mut self.data[y * self.w + x];
                *slot = slot.max(c);
            }
        }
    }

    fn dot(&mut self, c: Point2, radius: f64) {
        self.segment(c, c, radius);
    }

    fn blend(&self, f: &mut ColorFrame, color: [u8; 3]) {
        for y in 0..self.h {
            for x in 0..self.w {
                let a = self.data[y * self.w + x];
                if a <= 0.0 {
                    continue;
                }
                let src = f.pixel(x, y);
                let mut out = [0u8; 3];
                for k in 0..3 {
                    let v = src[k] as f32 * (1.0 - a) + color[k] as f32 * a;
                    out[k] = v.round().clamp(0.0, 255.0) as u8;
                }
                f.set_pixel(x, y, out);
            }
        }
    }
}

/// Runs of consecutive points that survive the box filter; a hidden point
/// breaks the polyline.
fn visible_runs(points: &[Point2], bbox: Option<&BBox>, hide: bool) -> Vec<Vec<Point2>> {
    let mut runs = Vec::new();
    let mut cur = Vec::new();
    for &p in points {
        if hide && bbox.is_some_and(|b| b.contains(p)) {
            if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(p);
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// Draws `traj` (and `bbox` when enabled) on a copy of `f`.
pub fn render_frame(
    f: &ColorFrame,
    traj: &Trajectory,
    bbox: Option<&BBox>,
    style: &RenderStyle,
) -> Result<ColorFrame, TrajectoryError> {
    let raw: Vec<Point2> = traj.points().iter().map(|p| p.point()).collect();
    let points = match style.smooth {
        Some((window, order)) => smooth_for_render(&raw, window, order)?,
        None => raw,
    };
    let mut out = f.clone();
    let (w, h) = (f.width(), f.height());

    if style.draw_box {
        if let Some(b) = bbox {
            let mut cov = Coverage::new(w, h);
            let c = [
                Point2::new(b.x, b.y),
                Point2::new(b.x + b.w, b.y),
                Point2::new(b.x + b.w, b.y + b.h),
                Point2::new(b.x, b.y + b.h),
            ];
            for i in 0..4 {
                cov.segment(c[i], c[(i + 1) % 4], 0.5);
            }
            cov.blend(&mut out, style.box_color);
        }
    }

    let mut cov = Coverage::new(w, h);
    let half = 0.5 * style.line_width;
    for run in visible_runs(&points, bbox, style.hide_points_in_box) {
        for seg in run.windows(2) {
            cov.segment(seg[0], seg[1], half);
        }
        if style.point_radius > 0.0 {
            for &p in &run {
                cov.dot(p, style.point_radius);
            }
        }
    }
    cov.blend(&mut out, style.line_color);
    Ok(out)
}
