//! Projective geometry: points, homographies, normalized DLT fitting and
//! RANSAC estimation over key-point correspondences.

use std::fmt;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::FormatError;

const MIN_DET: f64 = 1e-12;
const MIN_W: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point maps to infinity (homogeneous scale {0:e})")]
    PointAtInfinity(f64),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("no consensus: {inliers} inliers out of {valid} valid matches")]
    NoConsensus { inliers: usize, valid: usize },
    #[error("singular matrix (|det| = {0:e})")]
    Singular(f64),
    #[error("non-finite coefficient")]
    NonFinite,
}

/// A 2D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A key-point matched between the previous and the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: Point2,
    pub dst: Point2,
    pub valid: bool,
}

impl Correspondence {
    pub fn new(src: Point2, dst: Point2) -> Self {
        let valid = src.is_finite() && dst.is_finite();
        Self { src, dst, valid }
    }

    pub fn invalid(src: Point2) -> Self {
        Self {
            src,
            dst: src,
            valid: false,
        }
    }
}

/// An invertible 3x3 projective map, stored row-major in canonical scale:
/// `m[8] == 1` whenever the unnormalized bottom-right entry is not
/// vanishing, unit Frobenius norm otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [f64; 9],
}

fn mat_mul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = (0..3).map(|k| a[r * 3 + k] * b[k * 3 + c]).sum();
        }
    }
    out
}

fn det3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

fn adjugate(m: &[f64; 9]) -> [f64; 9] {
    [
        m[4] * m[8] - m[5] * m[7],
        m[2] * m[7] - m[1] * m[8],
        m[1] * m[5] - m[2] * m[4],
        m[5] * m[6] - m[3] * m[8],
        m[0] * m[8] - m[2] * m[6],
        m[2] * m[3] - m[0] * m[5],
        m[3] * m[7] - m[4] * m[6],
        m[1] * m[6] - m[0] * m[7],
        m[0] * m[4] - m[1] * m[3],
    ]
}

fn canonical_scale(m: &[f64; 9]) -> Option<[f64; 9]> {
    let s = if m[8].abs() > MIN_W {
        m[8]
    } else {
        m.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    if s == 0.0 || !s.is_finite() {
        return None;
    }
    let mut out = [0.0; 9];
    for (o, v) in out.iter_mut().zip(m) {
        *o = v / s;
    }
    Some(out)
}

impl Homography {
    /// Builds a homography from nine row-major coefficients of any scale.
    pub fn from_rows(m: [f64; 9]) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let m = canonical_scale(&m).ok_or(GeometryError::Singular(0.0))?;
        let det = det3(&m);
        if det.abs() <= MIN_DET {
            return Err(GeometryError::Singular(det));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: [1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0],
        }
    }

    pub fn coeffs(&self) -> &[f64; 9] {
        &self.m
    }

    pub fn det(&self) -> f64 {
        det3(&self.m)
    }

    /// Maps a point through the homography, dividing out the homogeneous scale.
    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        let m = &self.m;
        let u = m[0] * p.x + m[1] * p.y + m[2];
        let v = m[3] * p.x + m[4] * p.y + m[5];
        let s = m[6] * p.x + m[7] * p.y + m[8];
        if s.abs() < MIN_W {
            return Err(GeometryError::PointAtInfinity(s));
        }
        Ok(Point2::new(u / s, v / s))
    }

    pub fn inverse(&self) -> Homography {
        // The adjugate is the inverse up to scale; canonicalization absorbs it.
        let adj = adjugate(&self.m);
        Self {
            m: canonical_scale(&adj).expect("invertible by construction"),
        }
    }

    /// Matrix product `self * rhs`: apply `rhs` first, then `self`.
    pub fn compose(&self, rhs: &Homography) -> Homography {
        let m = mat_mul(&self.m, &rhs.m);
        Self {
            m: canonical_scale(&m).expect("product of invertible maps"),
        }
    }

    /// `next` applied after `self`.
    pub fn then(&self, next: &Homography) -> Homography {
        next.compose(self)
    }

    /// Largest absolute coefficient difference between canonical forms.
    pub fn max_coeff_diff(&self, other: &Homography) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Display for Homography {
    /// Nine whitespace-separated decimals, shortest round-trip form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.m.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            // Normalize negative zero so output stays byte-stable.
            let v = if *v == 0.0 { 0.0 } else { *v };
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Writes one homography per line.
pub fn write_homog<W: Write>(mut w: W, hs: &[Homography]) -> std::io::Result<()> {
    for h in hs {
        writeln!(w, "{h}")?;
    }
    Ok(())
}

/// Reads a `.homog` file; blank lines and `#` comments are skipped.
pub fn read_homog<R: BufRead>(r: R) -> Result<Vec<Homography>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| FormatError::new(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FormatError::new(lineno, e.to_string()))?;
        let m: [f64; 9] = vals
            .try_into()
            .map_err(|v: Vec<f64>| FormatError::new(lineno, format!("expected 9 values, got {}", v.len())))?;
        out.push(Homography::from_rows(m).map_err(|e| FormatError::new(lineno, e.to_string()))?);
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors (as columns of `v`).
fn jacobi_eigen<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|p| ((p + 1)..N).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let diag: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut vals = [0.0; N];
    for (i, val) in vals.iter_mut().enumerate() {
        *val = a[i][i];
    }
    (vals, v)
}

/// Hartley normalization: centroid to origin, mean distance to sqrt(2).
fn normalize_points(pts: &[Point2]) -> Option<([f64; 9], Vec<Point2>)> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 1e-12) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = [s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0];
    let out = pts
        .iter()
        .map(|p| Point2::new(s * (p.x - cx), s * (p.y - cy)))
        .collect();
    Some((t, out))
}

/// Ratio of the minor to the major axis variance of a normalized point set;
/// near zero when all points lie on one line.
fn spread_ratio(pts: &[Point2]) -> f64 {
    let n = pts.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        sxx += p.x * p.x;
        sxy += p.x * p.y;
        syy += p.y * p.y;
    }
    let (a, b, c) = (sxx / n, sxy / n, syy / n);
    let half_tr = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let hi = half_tr + r;
    if hi <= 0.0 {
        0.0
    } else {
        (half_tr - r) / hi
    }
}

/// Least-squares homography from point correspondences by the normalized
/// direct linear transform. Only `valid` matches are used.
pub fn fit_dlt(matches: &[Correspondence]) -> Result<Homography, GeometryError> {
    let valid: Vec<&Correspondence> = matches.iter().filter(|c| c.valid).collect();
    if valid.len() < 4 {
        return Err(GeometryError::DegenerateConfiguration("fewer than 4 valid matches"));
    }
    let src: Vec<Point2> = valid.iter().map(|c| c.src).collect();
    let dst: Vec<Point2> = valid.iter().map(|c| c.dst).collect();
    let (ts, src_n) =
        normalize_points(&src).ok_or(GeometryError::DegenerateConfiguration("coincident source points"))?;
    let (td, dst_n) =
        normalize_points(&dst).ok_or(GeometryError::DegenerateConfiguration("coincident target points"))?;
    if spread_ratio(&src_n) < 1e-10 || spread_ratio(&dst_n) < 1e-10 {
        return Err(GeometryError::DegenerateConfiguration("collinear points"));
    }

    // Normal matrix A^T A of the 2n x 9 algebraic system.
    let mut ata = [[0.0; 9]; 9];
    for (s, d) in src_n.iter().zip(&dst_n) {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r1 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r2 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for i in 0..9 {
            for j in i..9 {
                ata[i][j] += r1[i] * r1[j] + r2[i] * r2[j];
            }
        }
    }
    for i in 0..9 {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }

    let (vals, vecs) = jacobi_eigen(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let largest = vals[order[8]].max(f64::MIN_POSITIVE);
    if vals[order[1]] <= 1e-13 * largest {
        return Err(GeometryError::DegenerateConfiguration("rank-deficient system"));
    }
    let mut hn = [0.0; 9];
    for (k, h) in hn.iter_mut().enumerate() {
        *h = vecs[k][order[0]];
    }

    // Denormalize: H = Td^-1 * Hn * Ts.
    let td_inv = adjugate(&td);
    let m = mat_mul(&mat_mul(&td_inv, &hn), &ts);
    Homography::from_rows(m).map_err(|_| GeometryError::DegenerateConfiguration("singular solution"))
}

/// RANSAC settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub max_iters: usize,
    /// Symmetric transfer error threshold in pixels.
    pub inlier_thresh: f64,
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            inlier_thresh: 3.0,
            confidence: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacEstimate {
    pub homography: Homography,
    /// One flag per input match; invalid matches are never inliers.
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub iterations: usize,
}

/// Mean of the forward and backward reprojection distances.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, c: &Correspondence) -> f64 {
    match (h.apply(c.src), h_inv.apply(c.dst)) {
        (Ok(fwd), Ok(bwd)) => 0.5 * (fwd.distance(&c.dst) + bwd.distance(&c.src)),
        _ => f64::INFINITY,
    }
}

fn consensus(h: &Homography, matches: &[Correspondence], thresh: f64, mask: &mut [bool]) -> usize {
    let h_inv = h.inverse();
    let mut count = 0;
    for (flag, c) in mask.iter_mut().zip(matches) {
        *flag = c.valid && symmetric_transfer_error(h, &h_inv, c) <= thresh;
        count += usize::from(*flag);
    }
    count
}

fn twice_area(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when any three of the four points are (nearly) collinear.
fn sample_degenerate(p: [Point2; 4]) -> bool {
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES.iter().any(|t| {
        let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
        let scale = a.distance(&b).max(a.distance(&c)).max(b.distance(&c));
        twice_area(a, b, c).abs() <= 1e-6 * scale * scale
    })
}

fn adaptive_bound(inlier_ratio: f64, confidence: f64) -> f64 {
    let w4 = inlier_ratio.powi(4);
    if w4 >= 1.0 {
        return 0.0;
    }
    if w4 <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 - confidence).ln() / (1.0 - w4).ln()).ceil()
}

/// Robust homography estimation from possibly contaminated matches.
/// Deterministic for a given `seed`.
pub fn ransac_homography(
    matches: &[Correspondence],
    params: &RansacParams,
    seed: u64,
) -> Result<RansacEstimate, GeometryError> {
    let valid_idx: Vec<usize> = (0..matches.len()).filter(|&i| matches[i].valid).collect();
    let n_valid = valid_idx.len();
    if n_valid < 4 {
        return Err(GeometryError::NoConsensus {
            inliers: 0,
            valid: n_valid,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; matches.len()];
    let mut best: Option<(Homography, Vec<bool>, usize)> = None;
    let mut bound = params.max_iters as f64;
    let mut iterations = 0;

    while (iterations as f64) < bound && iterations < params.max_iters {
        iterations += 1;
        let picks = rand::seq::index::sample(&mut rng, n_valid, 4);
        let sample: Vec<Correspondence> = picks.iter().map(|k| matches[valid_idx[k]]).collect();
        if sample_degenerate([sample[0].src, sample[1].src, sample[2].src, sample[3].src])
            || sample_degenerate([sample[0].dst, sample[1].dst, sample[2].dst, sample[3].dst])
        {
            continue;
        }
        let Ok(h) = fit_dlt(&sample) else { continue };
        let count = consensus(&h, matches, params.inlier_thresh, &mut mask);
        if best.as_ref().is_none_or(|b| count > b.2) {
            best = Some((h, mask.clone(), count));
            bound = adaptive_bound(count as f64 / n_valid as f64, params.confidence)
                .min(params.max_iters as f64);
        }
    }

    let Some((sample_h, sample_mask, best_count)) = best else {
        return Err(GeometryError::NoConsensus {
            inliers: 0,
            valid: n_valid,
        });
    };
    if best_count < 4 || (best_count as f64) < 0.1 * n_valid as f64 {
        return Err(GeometryError::NoConsensus {
            inliers: best_count,
            valid: n_valid,
        });
    }

    let inlier_matches: Vec<Correspondence> = matches
        .iter()
        .zip(&sample_mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| *c)
        .collect();
    let (homography, inliers, inlier_count) = match fit_dlt(&inlier_matches) {
        Ok(h) => {
            let count = consensus(&h, matches, params.inlier_thresh, &mut mask);
            if count >= 4 {
                (h, mask, count)
            } else {
                (sample_h, sample_mask, best_count)
            }
        }
        Err(_) => (sample_h, sample_mask, best_count),
    };
    Ok(RansacEstimate {
        homography,
        inliers,
        inlier_count,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perspective_h() -> Homography {
        Homography::from_rows([1.02, 0.03, 12.5, -0.015, 0.98, -7.25, 1e-4, -2e-4, 1.0]).unwrap()
    }

    fn exact_matches(h: &Homography, pts: &[Point2]) -> Vec<Correspondence> {
        pts.iter()
            .map(|&p| Correspondence::new(p, h.apply(p).unwrap()))
            .collect()
    }

    #[test]
    fn apply_examples() {
        let p = Homography::identity().apply(Point2::new(125.0, 290.0)).unwrap();
        assert_eq!(p, Point2::new(125.0, 290.0));
        let p = Homography::translation(10.0, -5.0).apply(Point2::new(0.0, 0.0)).unwrap();
        assert_eq!(p, Point2::new(10.0, -5.0));
        let h = Homography::from_rows([2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.apply(Point2::new(3.0, 4.0)).unwrap(), Point2::new(6.0, 8.0));
    }

    #[test]
    fn apply_at_infinity() {
        let h = Homography::from_rows([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0]).unwrap();
        assert!(matches!(
            h.apply(Point2::new(-100.0, 3.0)),
            Err(GeometryError::PointAtInfinity(_))
        ));
    }

    #[test]
    fn canonical_scale_and_singular() {
        let h = Homography::from_rows([2.0, 0.0, 4.0, 0.0, 2.0, 6.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(h, Homography::translation(2.0, 3.0));
        // Vanishing bottom-right entry: unit Frobenius norm.
        let h = Homography::from_rows([0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(h, Err(GeometryError::Singular(_))));
        let h = Homography::from_rows([2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let norm: f64 = h.coeffs().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(Homography::from_rows([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn dlt_identity_on_unit_square() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].map(|(x, y)| Point2::new(x, y));
        let h = fit_dlt(&exact_matches(&Homography::identity(), &pts)).unwrap();
        assert!(h.max_coeff_diff(&Homography::identity()) < 1e-9);
    }

    #[test]
    fn dlt_recovers_perspective_map() {
        let h_true = perspective_h();
        let pts: Vec<Point2> = [
            (10.0, 20.0),
            (600.0, 35.0),
            (1200.0, 80.0),
            (40.0, 700.0),
            (640.0, 360.0),
            (1100.0, 650.0),
            (300.0, 500.0),
            (900.0, 200.0),
        ]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
        let h = fit_dlt(&exact_matches(&h_true, &pts)).unwrap();
        assert!(h.max_coeff_diff(&h_true) < 1e-6, "{h} vs {h_true}");
    }

    #[test]
    fn dlt_rejects_small_and_collinear_sets() {
        let h = Homography::identity();
        let three: Vec<Point2> = (0..3).map(|i| Point2::new(i as f64, (i * i) as f64)).collect();
        assert!(matches!(
            fit_dlt(&exact_matches(&h, &three)),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        let line: Vec<Point2> = (0..6).map(|i| Point2::new(i as f64 * 10.0, i as f64 * 5.0 + 1.0)).collect();
        assert!(matches!(
            fit_dlt(&exact_matches(&h, &line)),
            Err(GeometryError::DegenerateConfiguration(_))
        ));
        let same = vec![Correspondence::new(Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)); 5];
        assert!(fit_dlt(&same).is_err());
    }

    #[test]
    fn dlt_ignores_invalid_matches() {
        let h_true = perspective_h();
        let pts: Vec<Point2> = (0..10)
            .map(|i| Point2::new((i * 97 % 640) as f64, (i * 53 % 360) as f64 + 3.0))
            .collect();
        let mut m = exact_matches(&h_true, &pts);
        m.push(Correspondence {
            src: Point2::new(5.0, 5.0),
            dst: Point2::new(900.0, -400.0),
            valid: false,
        });
        assert!(fit_dlt(&m).unwrap().max_coeff_diff(&h_true) < 1e-6);
    }

    #[test]
    fn ransac_exact_inputs() {
        let h_true = perspective_h();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        let pts: Vec<Point2> = (0..100)
            .map(|_| Point2::new(rng.gen_range(0.0..1280.0), rng.gen_range(0.0..720.0)))
            .collect();
        let est = ransac_homography(&exact_matches(&h_true, &pts), &RansacParams::default(), 7).unwrap();
        assert_eq!(est.inlier_count, 100);
        assert!(est.inliers.iter().all(|&b| b));
        assert!(est.homography.max_coeff_diff(&h_true) < 1e-6);
    }

    #[test]
    fn ransac_needs_four_valid() {
        let pts: Vec<Point2> = (0..3).map(|i| Point2::new(i as f64, 2.0 * i as f64 + (i * i) as f64)).collect();
        let m = exact_matches(&Homography::identity(), &pts);
        assert!(matches!(
            ransac_homography(&m, &RansacParams::default(), 0),
            Err(GeometryError::NoConsensus { .. })
        ));
        let mut m = exact_matches(&Homography::identity(), &pts);
        m.push(Correspondence::invalid(Point2::new(9.0, 9.0)));
        assert!(ransac_homography(&m, &RansacParams::default(), 0).is_err());
    }

    #[test]
    fn homog_file_round_trip() {
        let hs = vec![perspective_h(), Homography::identity(), Homography::translation(-2.0, 0.0)];
        let mut buf = Vec::new();
        write_homog(&mut buf, &hs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().nth(2).unwrap(), "1 0 -2 0 1 0 0 0 1");
        assert_eq!(read_homog(&buf[..]).unwrap(), hs);
    }

    #[test]
    fn homog_file_errors_carry_line() {
        let err = read_homog("1 0 0 0 1 0 0 0 1\n# c\n1 2 3\n".as_bytes()).unwrap_err();
        assert_eq!(err.line, 3);
    }

    fn arb_homography() -> impl Strategy<Value = Homography> {
        (
            0.8f64..1.2,
            -0.2f64..0.2,
            -50.0f64..50.0,
            -0.2f64..0.2,
            0.8f64..1.2,
            -50.0f64..50.0,
            -2e-4f64..2e-4,
            -2e-4f64..2e-4,
        )
            .prop_filter_map("invertible", |(a, b, c, d, e, f, g, h)| {
                Homography::from_rows([a, b, c, d, e, f, g, h, 1.0]).ok()
            })
    }

    fn grid_points() -> Vec<Point2> {
        (0..12)
            .map(|i| Point2::new(40.0 + (i % 4) as f64 * 350.0 + (i * 7) as f64, 30.0 + (i / 4) as f64 * 300.0 + (i * 3) as f64))
            .collect()
    }

    proptest! {
        #[test]
        fn inverse_round_trip(h in arb_homography(), x in 0.0f64..1280.0, y in 0.0f64..720.0) {
            let p = Point2::new(x, y);
            let q = h.apply(h.inverse().apply(p).unwrap()).unwrap();
            prop_assert!(q.distance(&p) < 1e-6);
        }

        #[test]
        fn dlt_exact_on_noise_free(h in arb_homography()) {
            let fit = fit_dlt(&exact_matches(&h, &grid_points())).unwrap();
            prop_assert!(fit.max_coeff_diff(&h) < 1e-6, "{} vs {}", fit, h);
        }

        #[test]
        fn dlt_conjugates_under_shift(h in arb_homography(), ox in -300.0f64..300.0, oy in -300.0f64..300.0) {
            let m = exact_matches(&h, &grid_points());
            let shifted: Vec<Correspondence> = m
                .iter()
                .map(|c| Correspondence::new(
                    Point2::new(c.src.x + ox, c.src.y + oy),
                    Point2::new(c.dst.x + ox, c.dst.y + oy),
                ))
                .collect();
            let h1 = fit_dlt(&m).unwrap();
            let h2 = fit_dlt(&shifted).unwrap();
            let t = Homography::translation(ox, oy);
            let conj = t.compose(&h1).compose(&t.inverse());
            for p in [Point2::new(10.0, 10.0), Point2::new(500.0, 300.0), Point2::new(1000.0, 650.0)] {
                let a = h2.apply(p).unwrap();
                let b = conj.apply(p).unwrap();
                prop_assert!(a.distance(&b) < 1e-6);
            }
        }

        #[test]
        fn ransac_is_reproducible(seed in any::<u64>()) {
            let h = perspective_h();
            let mut m = exact_matches(&h, &grid_points());
            m.push(Correspondence::new(Point2::new(3.0, 4.0), Point2::new(700.0, 10.0)));
            let a = ransac_homography(&m, &RansacParams::default(), seed).unwrap();
            let b = ransac_homography(&m, &RansacParams::default(), seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
