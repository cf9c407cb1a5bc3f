//! Minimum-eigenvalue ("good features to track") corner detection with
//! exclusion regions for the moving target and broadcast graphics.

use thiserror::Error;

use crate::geometry::Point2;
use crate::image::{GrayFrame, ImageError, SobelRows};
use crate::tracker::BBox;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no pixel passes the corner threshold")]
    NoFeatures,
    #[error("invalid detector parameter: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Fraction of the strongest response a corner must reach.
    pub quality_level: f64,
    pub min_distance: f64,
    /// Side of the structure-tensor window (odd).
    pub window: usize,
    /// Absolute floor on the minimum eigenvalue of the window-averaged
    /// structure tensor (derivatives in intensity units per pixel).
    pub min_response: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            max_corners: 1500,
            quality_level: 0.01,
            min_distance: 8.0,
            window: 5,
            min_response: 1e-5,
        }
    }
}

impl CornerParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.quality_level > 0.0 && self.quality_level < 1.0) {
            return Err(FeatureError::InvalidParams("quality_level must lie in (0, 1)"));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(FeatureError::InvalidParams("window must be odd and >= 3"));
        }
        if !(self.min_distance >= 0.0) || !(self.min_response >= 0.0) {
            return Err(FeatureError::InvalidParams("min_distance and min_response must be >= 0"));
        }
        Ok(())
    }
}

/// Regions whose key-points must not be used for camera motion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExclusionMask {
    rects: Vec<BBox>,
}

impl ExclusionMask {
    /// Clips every rect to the frame; rects falling entirely outside are dropped.
    pub fn new(rects: impl IntoIterator<Item = BBox>, width: usize, height: usize) -> Self {
        let rects = rects
            .into_iter()
            .filter_map(|r| r.clip_to(width as f64, height as f64))
            .collect();
        Self { rects }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn rects(&self) -> &[BBox] {
        &self.rects
    }

    /// True when `p` is strictly inside one of the rects.
    pub fn contains(&self, p: Point2) -> bool {
        self.rects.iter().any(|r| r.contains_strict(p))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CornerSet {
    pub points: Vec<Point2>,
    /// Minimum eigenvalue per point, non-increasing.
    pub responses: Vec<f32>,
}

impl CornerSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sobel products of one image row (replicated borders), scaled so a unit
/// ramp has derivative 1.
/// Products of the 1/8-scaled Sobel derivatives for image row `y`.
fn row_products(g: &GrayFrame, y: usize, sobel: &mut SobelRows, grad: &mut [Vec<f32>; 2], out: &mut [Vec<f32>; 3]) {
    let (rm, r0, rp) = g.row_triplet(y);
    let [dx, dy] = grad;
    sobel.apply(rm, r0, rp, 1.0 / 8.0, dx, dy);
    let [xx, xy, yy] = out;
    for ((((a, b), c), &gx), &gy) in xx.iter_mut().zip(xy.iter_mut()).zip(yy.iter_mut()).zip(dx.iter()).zip(dy.iter()) {
        *a = gx * gx;
        *b = gx * gy;
        *c = gy * gy;
    }
}

/// Per-pixel minimum eigenvalue of the window-averaged structure tensor
/// (box window, replicated borders). Rows are streamed through a ring of
/// product rows so only the output is frame-sized.
pub fn min_eigen_response(g: &GrayFrame, window: usize) -> Result<Vec<f32>, ImageError> {
    let (w, h) = (g.width(), g.height());
    if w < 3 || h < 3 {
        return Err(ImageError::ImageTooSmall { width: w, height: h });
    }
    let r = window / 2;
    let side = 2 * r + 1;
    let norm = 1.0 / (side * side) as f32;

    // ring[k] holds the products of image row `k`, indexed modulo `side`.
    let mut ring = vec![[vec![0.0f32; w], vec![0.0f32; w], vec![0.0f32; w]]; side];
    let mut ring_row = vec![usize::MAX; side];
    let pw = w + 2 * r;
    let mut col = [vec![0.0f32; pw], vec![0.0f32; pw], vec![0.0f32; pw]];
    let mut sum = [vec![0.0f32; w], vec![0.0f32; w], vec![0.0f32; w]];
    let mut out = vec![0.0f32; w * h];
    let mut sobel = SobelRows::new(w);
    let mut grad = [vec![0.0f32; w], vec![0.0f32; w]];

    for y in 0..h {
        for dy in 0..side {
            let sy = (y + dy).saturating_sub(r).min(h - 1);
            let slot = sy % side;
            if ring_row[slot] != sy {
                row_products(g, sy, &mut sobel, &mut grad, &mut ring[slot]);
                ring_row[slot] = sy;
            }
        }
        // Vertical sums, padded for the horizontal pass.
        for (ch, colv) in col.iter_mut().enumerate() {
            let acc = &mut colv[r..r + w];
            acc.copy_from_slice(&ring[y.saturating_sub(r) % side][ch]);
            for dy in 1..side {
                let sy = (y + dy).saturating_sub(r).min(h - 1);
                for (a, v) in acc.iter_mut().zip(&ring[sy % side][ch]) {
                    *a += v;
                }
            }
            let (first, last) = (colv[r], colv[r + w - 1]);
            colv[..r].fill(first);
            colv[r + w..].fill(last);
        }
        for (ch, sumv) in sum.iter_mut().enumerate() {
            sumv.copy_from_slice(&col[ch][..w]);
            for k in 1..side {
                for (o, v) in sumv.iter_mut().zip(&col[ch][k..k + w]) {
                    *o += v;
                }
            }
        }
        let dst = &mut out[y * w..(y + 1) * w];
        for (((o, &a), &b), &c) in dst.iter_mut().zip(&sum[0]).zip(&sum[1]).zip(&sum[2]) {
            let (a, b, c) = (a * norm, b * norm, c * norm);
            let half = 0.5 * (a - c);
            *o = (0.5 * (a + c) - (half * half + b * b).sqrt()).max(0.0);
        }
    }
    Ok(out)
}

/// `a.max(b)` for non-NaN inputs, in the form that maps onto vector max.
#[inline(always)]
fn fmax(a: f32, b: f32) -> f32 {
    if a > b {
        a
    } else {
        b
    }
}

fn max_value(v: &[f32]) -> f32 {
    let mut lanes = [0.0f32; 8];
    let chunks = v.chunks_exact(8);
    let tail = chunks.remainder().iter().fold(0.0f32, |m, &x| fmax(m, x));
    for c in chunks {
        for (m, &x) in lanes.iter_mut().zip(c) {
            *m = fmax(*m, x);
        }
    }
    lanes.iter().fold(tail, |m, &x| fmax(m, x))
}

/// Maximum over each pixel and its left and right neighbours, clamped.
fn max3(row: &[f32], out: &mut [f32]) {
    let w = row.len();
    if w == 1 {
        out[0] = row[0];
        return;
    }
    for (((o, &a), &b), &c) in out[1..w - 1].iter_mut().zip(&row[..w - 2]).zip(&row[1..w - 1]).zip(&row[2..]) {
        *o = fmax(fmax(a, b), c);
    }
    out[0] = fmax(row[0], row[1]);
    out[w - 1] = fmax(row[w - 2], row[w - 1]);
}

fn parabolic_offset(left: f32, center: f32, right: f32) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5) as f64
}

/// Detects up to `max_corners` corners on `g`, strongest first, no two
/// closer than `min_distance`, none inside the (window-dilated) mask rects.
pub fn detect_corners(
    g: &GrayFrame,
    mask: &ExclusionMask,
    params: &CornerParams,
) -> Result<CornerSet, FeatureError> {
    params.validate()?;
    let (w, h) = (g.width(), g.height());
    let mut resp = min_eigen_response(g, params.window)?;

    let r = (params.window / 2) as f64;
    for rect in mask.rects() {
        let x0 = (rect.x - r).floor().max(0.0) as usize;
        let y0 = (rect.y - r).floor().max(0.0) as usize;
        let x1 = ((rect.x + rect.w + r).ceil() as usize).min(w - 1);
        let y1 = ((rect.y + rect.h + r).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            resp[y * w + x0..=y * w + x1].fill(0.0);
        }
    }

    let max = max_value(&resp);
    let thresh = (params.quality_level as f32 * max).max(params.min_response as f32);
    if !(max > 0.0) || max < thresh {
        return Err(FeatureError::NoFeatures);
    }

    // Local maxima of the thresholded response: pixels equal to the maximum
    // of their clamped 3x3 neighbourhood. Keys sort by response, then by
    // raster index; responses are positive, so their bits order like them.
    let mut keys: Vec<u64> = Vec::new();
    let mut hmax = [vec![0.0f32; w], vec![0.0f32; w], vec![0.0f32; w]];
    let mut block = vec![0.0f32; w];
    let row = |y: usize| &resp[y * w..][..w];
    // Entering row y, hmax[1] and hmax[2] hold rows y - 1 and y (clamped).
    max3(row(0), &mut hmax[1]);
    let (lo, hi) = hmax.split_at_mut(2);
    hi[0].copy_from_slice(&lo[1]);
    for y in 0..h {
        let next = (y + 1).min(h - 1);
        hmax.rotate_left(1);
        if next == y {
            let (done, last) = hmax.split_at_mut(2);
            last[0].copy_from_slice(&done[1]);
        } else {
            max3(row(next), &mut hmax[2]);
        }
        for (((m, &a), &b), &c) in block.iter_mut().zip(&hmax[0]).zip(&hmax[1]).zip(&hmax[2]) {
            *m = fmax(fmax(a, b), c);
        }
        for (x, (&v, &m)) in row(y).iter().zip(&block).enumerate() {
            if v >= m && v >= thresh && v > 0.0 {
                keys.push(((v.to_bits() as u64) << 32) | (u32::MAX - (y * w + x) as u32) as u64);
            }
        }
    }
    if keys.is_empty() {
        return Err(FeatureError::NoFeatures);
    }
    keys.sort_unstable_by(|a, b| b.cmp(a));
    let candidates = keys.into_iter().map(|k| (f32::from_bits((k >> 32) as u32), (u32::MAX - k as u32) as usize));

    // Greedy min-distance suppression on a bucket grid.
    let cell = params.min_distance.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<Point2>> = vec![Vec::new(); gw * gh];
    let min_d2 = params.min_distance * params.min_distance;
    let mut out = CornerSet::default();
    for (v, idx) in candidates {
        if out.len() >= params.max_corners {
            break;
        }
        let (x, y) = (idx % w, idx / w);
        let dx = if x > 0 && x + 1 < w {
            parabolic_offset(resp[idx - 1], v, resp[idx + 1])
        } else {
            0.0
        };
        let dy = if y > 0 && y + 1 < h {
            parabolic_offset(resp[idx - w], v, resp[idx + w])
        } else {
            0.0
        };
        let p = Point2::new(
            (x as f64 + dx).clamp(0.0, (w - 1) as f64),
            (y as f64 + dy).clamp(0.0, (h - 1) as f64),
        );
        if mask.contains(p) {
            continue;
        }
        let cx = (p.x / cell) as usize;
        let cy = (p.y / cell) as usize;
        let mut clear = true;
        'cells: for ny in cy.saturating_sub(1)..=(cy + 1).min(gh - 1) {
            for nx in cx.saturating_sub(1)..=(cx + 1).min(gw - 1) {
                for q in &grid[ny * gw + nx] {
                    let d2 = (q.x - p.x).powi(2) + (q.y - p.y).powi(2);
                    if d2 < min_d2 {
                        clear = false;
                        break 'cells;
                    }
                }
            }
        }
        if clear {
            grid[cy * gw + cx].push(p);
            out.points.push(p);
            out.responses.push(v);
        }
    }
    if out.is_empty() {
        return Err(FeatureError::NoFeatures);
    }
    Ok(out)
}
