//! Pyramidal Lucas-Kanade tracking of sparse points with a
//! forward-backward consistency gate.

use wide::f32x8;

use crate::geometry::{Correspondence, Point2};
use crate::image::{scaled_gradients, Field, GrayFrame, Pyramid};

/// Converts a window-averaged eigenvalue computed on `[0, 1]` intensities
/// with unit-scaled derivatives into OpenCV's convention (8-bit intensities,
/// Scharr derivatives scaled by 32, result divided by 2^20).
pub const EIGEN_UNIT: f64 = 255.0 * 255.0 * 32.0 * 32.0 / 1_048_576.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    /// Integration window side (odd).
    pub window: usize,
    pub pyramid_levels: usize,
    pub max_iters: usize,
    /// Convergence threshold on the update step, pixels.
    pub eps: f64,
    /// Maximum distance between a point and its forward-backward track.
    pub fb_thresh: f64,
    /// Minimum eigenvalue of the window-averaged gradient matrix at level 0,
    /// in OpenCV `minEigThreshold` units (see [`EIGEN_UNIT`]).
    pub min_eigen: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            window: 21,
            pyramid_levels: 3,
            max_iters: 30,
            eps: 0.01,
            fb_thresh: 1.0,
            min_eigen: 1e-4,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.window < 5 || self.window.is_multiple_of(2) {
            return Err("flow window must be odd and >= 5");
        }
        if self.max_iters == 0 || self.pyramid_levels == 0 {
            return Err("flow max_iters and pyramid_levels must be >= 1");
        }
        if !(self.eps > 0.0) || !(self.fb_thresh > 0.0) {
            return Err("flow eps and fb_thresh must be > 0");
        }
        Ok(())
    }
}

/// A pyramid with per-level spatial derivatives (intensity per pixel).
#[derive(Debug, Clone)]
pub struct FlowPyramid {
    levels: Vec<GrayFrame>,
    gx: Vec<Field>,
    gy: Vec<Field>,
}

impl FlowPyramid {
    pub fn new(pyr: &Pyramid) -> Self {
        Self::from_pyramid(pyr.clone())
    }

    pub fn from_pyramid(pyr: Pyramid) -> Self {
        let levels = pyr.into_levels();
        let mut gx = Vec::with_capacity(levels.len());
        let mut gy = Vec::with_capacity(levels.len());
        for level in &levels {
            let (dx, dy) = scaled_gradients(level, 0.125).expect("pyramid levels are at least 16 px");
            gx.push(dx);
            gy.push(dy);
        }
        Self { levels, gx, gy }
    }

    /// Level 0, the full-resolution image.
    pub fn base(&self) -> &GrayFrame {
        &self.levels[0]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

const LANES: usize = 8;

/// Row stride of window buffers: the window side rounded up to whole lanes.
/// Padding entries stay zero in the gradient buffers, so they drop out of
/// every sum.
fn stride_for(side: usize) -> usize {
    side.div_ceil(LANES) * LANES
}

#[inline(always)]
fn load(s: &[f32]) -> f32x8 {
    f32x8::from(<[f32; LANES]>::try_from(&s[..LANES]).expect("slice of LANES elements"))
}

/// `f64::floor` for the finite, in-image coordinates seen here; the
/// baseline x86-64 target has no rounding instruction, so the std version
/// is a library call.
#[inline(always)]
fn floor(v: f64) -> f64 {
    let t = v as i64 as f64;
    if t > v {
        t - 1.0
    } else {
        t
    }
}

/// Bilinear weights of the fractional part of `(cx, cy)` and the integer
/// top-left corner of the `(2r+1)^2` window.
fn window_setup(cx: f64, cy: f64, r: usize) -> ([f32; 4], isize, isize) {
    let fx0 = floor(cx);
    let fy0 = floor(cy);
    let ax = (cx - fx0) as f32;
    let ay = (cy - fy0) as f32;
    let wts = [(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay];
    (wts, fx0 as isize - r as isize, fy0 as isize - r as isize)
}

/// Image rows covering a window whose top-left sample is `(x0, y0)`:
/// `side + 1` rows of `stride_for(side) + 1` pixels, returned with their
/// pitch. Inside the image this is a view; near the border the rows are
/// copied into `patch` with replicated edges.
fn window_source<'a>(
    data: &'a [f32],
    w: usize,
    h: usize,
    x0: isize,
    y0: isize,
    side: usize,
    patch: &'a mut Vec<f32>,
) -> (&'a [f32], usize) {
    let (cols, rows) = (stride_for(side) + 1, side + 1);
    if x0 >= 0 && y0 >= 0 && x0 as usize + cols <= w && y0 as usize + rows <= h {
        return (&data[y0 as usize * w + x0 as usize..], w);
    }
    // Columns [0, lo) lie left of the image, [hi, cols) right of it.
    let lo = (-x0).clamp(0, cols as isize) as usize;
    let hi = (w as isize - x0).clamp(0, cols as isize) as usize;
    patch.resize(rows * cols, 0.0);
    for (j, dst) in patch.chunks_exact_mut(cols).enumerate() {
        let row = &data[(y0 + j as isize).clamp(0, h as isize - 1) as usize * w..][..w];
        dst[..lo].fill(row[0]);
        if hi > lo {
            let sx = (x0 + lo as isize) as usize;
            dst[lo..hi].copy_from_slice(&row[sx..sx + hi - lo]);
        }
        dst[hi..].fill(row[w - 1]);
    }
    (&patch[..], cols)
}

/// Samples a `(2r+1)^2` window centered at `(cx, cy)` bilinearly into rows
/// of [`stride_for`]; padding entries are set to zero. All samples share
/// the same fractional offset, so the weights are computed once.
#[allow(clippy::too_many_arguments)]
fn sample_window(data: &[f32], w: usize, h: usize, cx: f64, cy: f64, r: usize, out: &mut [f32], patch: &mut Vec<f32>) {
    let ([w00, w01, w10, w11], x0, y0) = window_setup(cx, cy, r);
    let side = 2 * r + 1;
    let stride = stride_for(side);
    let (src, pitch) = window_source(data, w, h, x0, y0, side, patch);
    let (v00, v01, v10, v11) = (f32x8::splat(w00), f32x8::splat(w01), f32x8::splat(w10), f32x8::splat(w11));
    // Clears the padding lanes of the last chunk in each row.
    let last = stride - LANES;
    let keep = f32x8::from(std::array::from_fn::<f32, LANES, _>(|k| {
        f32::from_bits(if last + k < side { u32::MAX } else { 0 })
    }));
    for j in 0..side {
        let row0 = &src[j * pitch..][..stride + 1];
        let row1 = &src[(j + 1) * pitch..][..stride + 1];
        let dst = &mut out[j * stride..][..stride];
        for o in (0..stride).step_by(LANES) {
            let mut v = v00 * load(&row0[o..]) + v01 * load(&row0[o + 1..]) + v10 * load(&row1[o..]) + v11 * load(&row1[o + 1..]);
            if o == last {
                v &= keep;
            }
            dst[o..o + LANES].copy_from_slice(&v.to_array());
        }
    }
}

fn lane_sum(v: f32x8) -> f64 {
    v.to_array().iter().map(|&x| x as f64).sum()
}

/// Gradient-weighted sums of `tpl - cur` over the window, where `cur` is
/// the window of `data` at `(cx, cy)` sampled as in [`sample_window`].
/// Padding lanes of `cur` hold real pixels, but the zero gradients there
/// keep them out of the sums.
#[allow(clippy::too_many_arguments)]
fn mismatch_at(
    data: &[f32],
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    r: usize,
    tpl: &[f32],
    ix: &[f32],
    iy: &[f32],
    patch: &mut Vec<f32>,
) -> (f64, f64) {
    let ([w00, w01, w10, w11], x0, y0) = window_setup(cx, cy, r);
    let side = 2 * r + 1;
    let stride = stride_for(side);
    let (src, pitch) = window_source(data, w, h, x0, y0, side, patch);
    let (v00, v01, v10, v11) = (f32x8::splat(w00), f32x8::splat(w01), f32x8::splat(w10), f32x8::splat(w11));
    let mut ax = f32x8::ZERO;
    let mut ay = f32x8::ZERO;
    for j in 0..side {
        let row0 = &src[j * pitch..][..stride + 1];
        let row1 = &src[(j + 1) * pitch..][..stride + 1];
        let base = j * stride;
        for o in (0..stride).step_by(LANES) {
            let v = v00 * load(&row0[o..]) + v01 * load(&row0[o + 1..]) + v10 * load(&row1[o..]) + v11 * load(&row1[o + 1..]);
            let d = load(&tpl[base + o..]) - v;
            ax += d * load(&ix[base + o..]);
            ay += d * load(&iy[base + o..]);
        }
    }
    (lane_sum(ax), lane_sum(ay))
}

/// Window sums of `ix^2`, `ix*iy` and `iy^2`.
fn tensor(ix: &[f32], iy: &[f32]) -> (f64, f64, f64) {
    let mut a = f32x8::ZERO;
    let mut b = f32x8::ZERO;
    let mut c = f32x8::ZERO;
    for (gx, gy) in ix.chunks_exact(LANES).zip(iy.chunks_exact(LANES)) {
        let (gx, gy) = (load(gx), load(gy));
        a += gx * gx;
        b += gx * gy;
        c += gy * gy;
    }
    (lane_sum(a), lane_sum(b), lane_sum(c))
}

struct Scratch {
    tpl: Vec<f32>,
    ix: Vec<f32>,
    iy: Vec<f32>,
    patch: Vec<f32>,
}

impl Scratch {
    fn new(side: usize) -> Self {
        let n = side * stride_for(side);
        Self {
            tpl: vec![0.0; n],
            ix: vec![0.0; n],
            iy: vec![0.0; n],
            patch: Vec::with_capacity((side + 1) * (stride_for(side) + 1)),
        }
    }
}

fn in_bounds(p: Point2, w: usize, h: usize) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= (w - 1) as f64 && p.y <= (h - 1) as f64
}

/// Bounds test at a pyramid level, expressed in level-0 pixels so that
/// flooring of level sizes does not reject points near the right or
/// bottom edge.
fn in_level_bounds(pl: Point2, scale: f64, w0: usize, h0: usize) -> bool {
    in_bounds(Point2::new(pl.x * scale, pl.y * scale), w0, h0)
}

/// Tracks one point from `src` into `dst`, coarse to fine. `guess` is an
/// initial level-0 displacement. Returns the level-0 displacement and the
/// window-averaged minimum eigenvalue at level 0.
fn lk_point(
    src: &FlowPyramid,
    dst: &FlowPyramid,
    levels: usize,
    p: Point2,
    guess: Point2,
    params: &FlowParams,
    s: &mut Scratch,
) -> Option<(Point2, f64)> {
    let r = params.window / 2;
    let area = ((2 * r + 1) * (2 * r + 1)) as f64;
    let top = levels - 1;
    let top_scale = (1usize << top) as f64;
    let mut g = Point2::new(guess.x / top_scale, guess.y / top_scale);
    let mut min_eig = 0.0;
    let eps2 = params.eps * params.eps;
    let (w0, h0) = (src.levels[0].width(), src.levels[0].height());

    for lvl in (0..levels).rev() {
        let scale = (1usize << lvl) as f64;
        let img = &src.levels[lvl];
        let (w, h) = (img.width(), img.height());
        let pl = Point2::new(p.x / scale, p.y / scale);
        if !in_level_bounds(pl, scale, w0, h0) {
            return None;
        }
        sample_window(img.data(), w, h, pl.x, pl.y, r, &mut s.tpl, &mut s.patch);
        sample_window(&src.gx[lvl].data, w, h, pl.x, pl.y, r, &mut s.ix, &mut s.patch);
        sample_window(&src.gy[lvl].data, w, h, pl.x, pl.y, r, &mut s.iy, &mut s.patch);
        let (a, b, c) = tensor(&s.ix, &s.iy);
        let det = a * c - b * b;
        let half = 0.5 * (a - c);
        let lambda = (0.5 * (a + c) - (half * half + b * b).sqrt()) / area;
        if lvl == 0 {
            min_eig = lambda;
        }
        if det <= 1e-12 * area * area || lambda <= 1e-9 {
            return None;
        }

        let target = &dst.levels[lvl];
        let mut nu = Point2::new(0.0, 0.0);
        let mut prev_step = Point2::new(0.0, 0.0);
        for it in 0..params.max_iters {
            let q = Point2::new(pl.x + g.x + nu.x, pl.y + g.y + nu.y);
            if !in_level_bounds(q, scale, w0, h0) {
                return None;
            }
            let (ex, ey) = mismatch_at(target.data(), w, h, q.x, q.y, r, &s.tpl, &s.ix, &s.iy, &mut s.patch);
            let step_x = (c * ex - b * ey) / det;
            let step_y = (a * ey - b * ex) / det;
            // A step that undoes the previous one means the iteration is
            // bouncing around the optimum: settle halfway and stop.
            if it > 0 && (step_x + prev_step.x).abs() < params.eps && (step_y + prev_step.y).abs() < params.eps {
                nu.x += 0.5 * step_x;
                nu.y += 0.5 * step_y;
                break;
            }
            nu.x += step_x;
            nu.y += step_y;
            if step_x * step_x + step_y * step_y < eps2 {
                break;
            }
            prev_step = Point2::new(step_x, step_y);
        }
        let total = Point2::new(g.x + nu.x, g.y + nu.y);
        if lvl > 0 {
            g = Point2::new(2.0 * total.x, 2.0 * total.y);
        } else {
            g = total;
        }
    }
    let q = Point2::new(p.x + g.x, p.y + g.y);
    let (w, h) = (dst.levels[0].width(), dst.levels[0].height());
    if !in_bounds(q, w, h) || !g.is_finite() {
        return None;
    }
    Some((g, min_eig))
}

/// Tracks `pts` from `prev` into `next`; the output order matches `pts`.
pub fn track_points_prepared(
    prev: &FlowPyramid,
    next: &FlowPyramid,
    pts: &[Point2],
    params: &FlowParams,
) -> Vec<Correspondence> {
    let levels = params.pyramid_levels.min(prev.len()).min(next.len()).max(1);
    let mut scratch = Scratch::new(2 * (params.window / 2) + 1);
    let zero = Point2::new(0.0, 0.0);
    // Visit points in row-major order for cache locality; results go back
    // in input order.
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by_key(|&i| (pts[i].y.max(0.0) as u64 / 16, pts[i].x.max(0.0) as u64));
    let mut out = vec![Correspondence::invalid(zero); pts.len()];
    for i in order {
        out[i] = track_one(prev, next, levels, pts[i], params, &mut scratch);
    }
    out
}

fn track_one(
    prev: &FlowPyramid,
    next: &FlowPyramid,
    levels: usize,
    p: Point2,
    params: &FlowParams,
    scratch: &mut Scratch,
) -> Correspondence {
    let Some((d, min_eig)) = lk_point(prev, next, levels, p, Point2::new(0.0, 0.0), params, scratch) else {
        return Correspondence::invalid(p);
    };
    if min_eig * EIGEN_UNIT <= params.min_eigen {
        return Correspondence::invalid(p);
    }
    let q = Point2::new(p.x + d.x, p.y + d.y);
    let back_guess = Point2::new(-d.x, -d.y);
    let consistent = match lk_point(next, prev, levels, q, back_guess, params, scratch) {
        Some((back, _)) => Point2::new(q.x + back.x, q.y + back.y).distance(&p) <= params.fb_thresh,
        None => false,
    };
    Correspondence {
        src: p,
        dst: q,
        valid: consistent,
    }
}

/// Tracks `pts` from the `prev` pyramid into the `next` pyramid.
pub fn track_points(prev: &Pyramid, next: &Pyramid, pts: &[Point2], params: &FlowParams) -> Vec<Correspondence> {
    track_points_prepared(&FlowPyramid::new(prev), &FlowPyramid::new(next), pts, params)
}
