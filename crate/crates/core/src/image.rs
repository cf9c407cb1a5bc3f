//! Frame buffers and the low-level image operations the tracker and the
//! camera-motion estimator share: grayscale conversion, Gaussian pyramids,
//! Sobel gradients and 3x3 sharpening.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("buffer length {got} does not match {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("image {width}x{height} is smaller than 3x3")]
    ImageTooSmall { width: usize, height: usize },
    #[error("intensity out of [0, 1]")]
    OutOfRange,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },
    #[error("{0}: unsupported frame extension (expected png or ppm)")]
    UnsupportedFormat(PathBuf),
}

/// 8-bit RGB frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ColorFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if data.len() != width * height * 3 {
            return Err(ImageError::DataLength {
                expected: width * height * 3,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Grayscale frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::DataLength {
                expected: width * height,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ImageError::OutOfRange);
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a frame from a function of pixel coordinates, clamping to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Rows `y - 1`, `y` and `y + 1`, clamped at the top and bottom.
    pub(crate) fn row_triplet(&self, y: usize) -> (&[f32], &[f32], &[f32]) {
        let (w, h) = (self.width, self.height);
        let row = |k: usize| &self.data[k * w..][..w];
        (row(y.saturating_sub(1)), row(y), row((y + 1).min(h - 1)))
    }

    #[inline]
    fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample with replicated borders.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(xi, yi);
        let b = self.get_clamped(xi + 1, yi);
        let c = self.get_clamped(xi, yi + 1);
        let d = self.get_clamped(xi + 1, yi + 1);
        let top = a + (b - a) * fx;
        let bot = c + (d - c) * fx;
        top + (bot - top) * fy
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// Unbounded real-valued map with the same layout as a frame (gradients,
/// response maps).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Luma conversion (Rec. 601 weights) scaled to `[0, 1]`.
pub fn to_gray(f: &ColorFrame) -> GrayFrame {
    let data = f
        .data
        .chunks_exact(3)
        .map(|p| {
            let v = (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0;
            v.clamp(0.0, 1.0)
        })
        .collect();
    GrayFrame {
        width: f.width,
        height: f.height,
        data,
    }
}

pub const MIN_PYRAMID_DIM: usize = 16;

/// Gaussian pyramid; level 0 is full resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    levels: Vec<GrayFrame>,
}

impl Pyramid {
    pub fn levels(&self) -> &[GrayFrame] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<GrayFrame> {
        self.levels
    }

    pub fn level(&self, k: usize) -> &GrayFrame {
        &self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

const BINOMIAL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn pyr_down(g: &GrayFrame) -> GrayFrame {
    let (w, h) = (g.width, g.height);
    let (nw, nh) = (w / 2, h / 2);
    // Horizontal pass, evaluated only at the even columns kept.
    let mut tmp = vec![0.0f32; nw * h];
    for y in 0..h {
        let row = &g.data[y * w..(y + 1) * w];
        for ox in 0..nw {
            let cx = (2 * ox) as isize;
            let mut acc = 0.0;
            for (k, wgt) in BINOMIAL.iter().enumerate() {
                let sx = (cx + k as isize - 2).clamp(0, w as isize - 1) as usize;
                acc += wgt * row[sx];
            }
            tmp[y * nw + ox] = acc;
        }
    }
    let mut data = vec![0.0f32; nw * nh];
    for oy in 0..nh {
        let cy = (2 * oy) as isize;
        let out = &mut data[oy * nw..(oy + 1) * nw];
        for (k, wgt) in BINOMIAL.iter().enumerate() {
            let sy = (cy + k as isize - 2).clamp(0, h as isize - 1) as usize;
            let src = &tmp[sy * nw..(sy + 1) * nw];
            for (o, s) in out.iter_mut().zip(src) {
                *o += wgt * s;
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    GrayFrame {
        width: nw,
        height: nh,
        data,
    }
}

/// Builds up to `max_levels` levels, stopping before any dimension would
/// drop below 16 pixels.
pub fn build_pyramid(g: &GrayFrame, max_levels: usize) -> Pyramid {
    let mut levels = vec![g.clone()];
    while levels.len() < max_levels.max(1) {
        let last = levels.last().expect("non-empty");
        if last.width / 2 < MIN_PYRAMID_DIM || last.height / 2 < MIN_PYRAMID_DIM {
            break;
        }
        levels.push(pyr_down(last));
    }
    Pyramid { levels }
}

fn check_min_size(width: usize, height: usize) -> Result<(), ImageError> {
    if width < 3 || height < 3 {
        return Err(ImageError::ImageTooSmall { width, height });
    }
    Ok(())
}

/// 3x3 Sobel derivatives with replicated borders (unnormalized: a unit
/// ramp yields 8 per pixel).
pub fn gradients(g: &GrayFrame) -> Result<(Field, Field), ImageError> {
    scaled_gradients(g, 1.0)
}

/// [`gradients`] multiplied by `scale`.
pub fn scaled_gradients(g: &GrayFrame, scale: f32) -> Result<(Field, Field), ImageError> {
    check_min_size(g.width, g.height)?;
    let (w, h) = (g.width, g.height);
    let mut gx = Field::zeros(w, h);
    let mut gy = Field::zeros(w, h);
    let mut tmp = SobelRows::new(w);
    for y in 0..h {
        let (rm, r0, rp) = g.row_triplet(y);
        tmp.apply(rm, r0, rp, scale, &mut gx.data[y * w..][..w], &mut gy.data[y * w..][..w]);
    }
    Ok((gx, gy))
}

/// Scratch rows for a row-at-a-time 3x3 Sobel: the column smoothing and
/// column difference are formed first so that each pass is a plain slice
/// loop.
pub(crate) struct SobelRows {
    smooth: Vec<f32>,
    diff: Vec<f32>,
}

impl SobelRows {
    pub(crate) fn new(w: usize) -> Self {
        Self {
            smooth: vec![0.0; w],
            diff: vec![0.0; w],
        }
    }

    /// Derivatives of the middle row `r0` given its clamped neighbours.
    /// Needs `w >= 2`.
    pub(crate) fn apply(&mut self, rm: &[f32], r0: &[f32], rp: &[f32], scale: f32, gx: &mut [f32], gy: &mut [f32]) {
        let w = r0.len();
        let (sm, df) = (&mut self.smooth[..w], &mut self.diff[..w]);
        for ((((s, d), &a), &b), &c) in sm.iter_mut().zip(df.iter_mut()).zip(rm).zip(r0).zip(rp) {
            *s = a + 2.0 * b + c;
            *d = c - a;
        }
        for ((o, &l), &r) in gx[1..w - 1].iter_mut().zip(&sm[..w - 2]).zip(&sm[2..]) {
            *o = (r - l) * scale;
        }
        gx[0] = (sm[1] - sm[0]) * scale;
        gx[w - 1] = (sm[w - 1] - sm[w - 2]) * scale;
        for (((o, &l), &m), &r) in gy[1..w - 1].iter_mut().zip(&df[..w - 2]).zip(&df[1..w - 1]).zip(&df[2..]) {
            *o = (l + 2.0 * m + r) * scale;
        }
        gy[0] = (3.0 * df[0] + df[1]) * scale;
        gy[w - 1] = (df[w - 2] + 3.0 * df[w - 1]) * scale;
    }
}

/// Convolution with the 3x3 sharpening kernel (center 9, neighbours -1),
/// replicated borders, clamped to `[0, 1]`.
pub fn sharpen(g: &GrayFrame) -> Result<GrayFrame, ImageError> {
    check_min_size(g.width, g.height)?;
    let (w, h) = (g.width, g.height);
    let mut data = vec![0.0f32; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let mut sum = 0.0;
            for yy in [ym, y, yp] {
                for xx in [xm, x, xp] {
                    sum += g.data[yy * w + xx];
                }
            }
            let center = g.data[y * w + x];
            // 9c - (sum of the 8 neighbours) = 10c - sum of the 3x3 block.
            data[y * w + x] = (10.0 * center - sum).clamp(0.0, 1.0);
        }
    }
    Ok(GrayFrame { width: w, height: h, data })
}

/// Frame file name for index `t`, e.g. `000042.png`.
pub fn frame_file_name(t: usize, ext: &str) -> String {
    format!("{t:06}.{ext}")
}

pub fn load_color(path: &Path) -> Result<ColorFrame, ImageError> {
    let img = ::image::open(path).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    ColorFrame::new(w as usize, h as usize, rgb.into_raw())
}

/// Writes PNG or binary PPM depending on the extension.
pub fn save_color(path: &Path, f: &ColorFrame) -> Result<(), ImageError> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => ::image::ImageFormat::Png,
        Some("ppm") => ::image::ImageFormat::Pnm,
        _ => return Err(ImageError::UnsupportedFormat(path.to_path_buf())),
    };
    let buf = ::image::RgbImage::from_raw(f.width as u32, f.height as u32, f.data.clone())
        .expect("length checked at construction");
    buf.save_with_format(path, format).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })
}
