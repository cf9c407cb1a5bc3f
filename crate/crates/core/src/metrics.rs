//! Evaluation measures: per-point trajectory error, DTW distance,
//! homography MSE, box-overlap success and timing, plus the clip-level
//! report over prediction and reference directories.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{read_homog, Homography, Point2};
use crate::tracker::{track_source_from_file, BBox, TrackerError};
use crate::trajectory::{read_records_json, TrajectoryRecord};
use crate::FormatError;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("frame count mismatch: {pred} predicted vs {reference} reference")]
    FrameCountMismatch { pred: usize, reference: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("clip mismatch: {0}")]
    ClipMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {err}")]
    Format { path: String, err: FormatError },
    #[error("{0}")]
    Tracker(#[from] TrackerError),
}

/// What a visible reference point contributes when the prediction has
/// already clipped its counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipPenalty {
    /// The frame diagonal.
    #[default]
    Diagonal,
    /// The pair is left out of the frame average.
    Skip,
}

/// Mean distance between the visible reference points of one frame and the
/// predicted points with the same origin; `None` when no pair is scored.
pub fn mppte_frame(pred: &TrajectoryRecord, reference: &TrajectoryRecord, penalty: ClipPenalty) -> Option<f64> {
    let diagonal = reference.width.hypot(reference.height);
    let mut sum = 0.0;
    let mut count = 0usize;
    for q in &reference.points {
        let found = pred
            .points
            .binary_search_by_key(&q.origin_frame, |p| p.origin_frame)
            .ok()
            .map(|i| pred.points[i].point());
        match (found, penalty) {
            (Some(p), _) => sum += p.distance(&q.point()),
            (None, ClipPenalty::Diagonal) => sum += diagonal,
            (None, ClipPenalty::Skip) => continue,
        }
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Clip MPPTE: per-frame values averaged over the scored frames.
pub fn mppte(pred: &[TrajectoryRecord], reference: &[TrajectoryRecord], penalty: ClipPenalty) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::FrameCountMismatch {
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    let values: Vec<f64> = pred
        .iter()
        .zip(reference)
        .filter_map(|(p, r)| mppte_frame(p, r, penalty))
        .collect();
    Ok(mean(&values).unwrap_or(0.0))
}

/// Accumulated Euclidean cost of the optimal warping path between `a` and
/// `b`, both ends matched, steps (1,0), (0,1) and (1,1).
pub fn dtw(a: &[Point2], b: &[Point2]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for pa in a {
        cur[0] = f64::INFINITY;
        for (j, pb) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = pa.distance(pb) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = f64::INFINITY;
    }
    Ok(prev[m])
}

/// Per-frame DTW between predicted and reference point lists, averaged.
pub fn dtw_clip(pred: &[TrajectoryRecord], reference: &[TrajectoryRecord]) -> Result<f64, MetricsError> {
    if pred.len() != reference.len() {
        return Err(MetricsError::FrameCountMismatch {
            pred: pred.len(),
            reference: reference.len(),
        });
    }
    let mut values = Vec::with_capacity(pred.len());
    for (p, r) in pred.iter().zip(reference) {
        let a: Vec<Point2> = p.points.iter().map(|q| q.point()).collect();
        let b: Vec<Point2> = r.points.iter().map(|q| q.point()).collect();
        values.push(dtw(&a, &b)?);
    }
    Ok(mean(&values).unwrap_or(0.0))
}

/// Mean squared coefficient difference of two canonically scaled
/// homographies.
pub fn homography_mse(h: &Homography, h_ref: &Homography) -> f64 {
    h.coeffs()
        .iter()
        .zip(h_ref.coeffs())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / 9.0
}

pub fn homography_mse_clip(h: &[Homography], h_ref: &[Homography]) -> Result<f64, MetricsError> {
    if h.len() != h_ref.len() {
        return Err(MetricsError::LengthMismatch(h.len(), h_ref.len()));
    }
    let values: Vec<f64> = h.iter().zip(h_ref).map(|(a, b)| homography_mse(a, b)).collect();
    Ok(mean(&values).unwrap_or(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Success {
    /// Mean IoU in percent.
    pub auc: f64,
    /// (threshold, fraction of frames with IoU above it) for thresholds
    /// 0, 0.05, ..., 1.
    pub curve: Vec<(f64, f64)>,
}

pub fn success_auc(pred: &[BBox], gt: &[BBox]) -> Result<Success, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), gt.len()));
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(a, b)| a.iou(b)).collect();
    let n = ious.len() as f64;
    let curve = (0..=20)
        .map(|k| {
            let th = k as f64 * 0.05;
            (th, ious.iter().filter(|&&v| v > th).count() as f64 / n)
        })
        .collect();
    Ok(Success {
        auc: 100.0 * ious.iter().sum::<f64>() / n,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub ms: f64,
    pub fps: f64,
    /// Seconds.
    pub delta_t: f64,
}

/// `frame_ms` are per-frame processing times; `total_s` is the whole
/// processing time and `clip_duration_s` the playback length.
pub fn timing(frame_ms: &[f64], total_s: f64, clip_duration_s: f64) -> Option<Timing> {
    let ms = mean(frame_ms)?;
    Some(Timing {
        ms,
        fps: if ms > 0.0 { 1000.0 / ms } else { f64::INFINITY },
        delta_t: (total_s - clip_duration_s).max(0.0),
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// File names shared by the pipeline output and the scene oracle.
pub mod files {
    pub const PRED_TRAJECTORY: &str = "trajectory.jsonl";
    pub const PRED_HOMOG: &str = "homographies.homog";
    pub const PRED_BOXES: &str = "boxes.csv";
    pub const PRED_METADATA: &str = "metadata.csv";
    pub const PRED_RUN_INFO: &str = "run_info.json";
    pub const REF_TRAJECTORY: &str = "reference.jsonl";
    pub const REF_HOMOG: &str = "gt.homog";
    pub const REF_BOXES: &str = "gt_boxes.csv";
}

/// Whole-run facts written next to the per-frame metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub frames: usize,
    pub fps: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEval {
    pub clip_id: String,
    pub mppte: f64,
    pub dtw: f64,
    pub mse: Option<f64>,
    pub auc: Option<f64>,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub penalty: ClipPenalty,
    /// Leave the wall-clock columns out so repeated evaluations compare
    /// byte for byte.
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            penalty: ClipPenalty::Diagonal,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub clips: Vec<ClipEval>,
    pub mppte: f64,
    pub dtw: f64,
    pub homography_mse: Option<f64>,
    pub auc: Option<f64>,
    pub mean_ms_per_frame: Option<f64>,
    pub fps: Option<f64>,
    pub delta_t: Option<f64>,
}

impl EvalReport {
    pub fn from_clips(clips: Vec<ClipEval>) -> Self {
        let avg = |f: &dyn Fn(&ClipEval) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = clips.iter().filter_map(f).collect();
            mean(&v)
        };
        let mppte = avg(&|c| Some(c.mppte)).unwrap_or(0.0);
        let dtw = avg(&|c| Some(c.dtw)).unwrap_or(0.0);
        let homography_mse = avg(&|c| c.mse);
        let auc = avg(&|c| c.auc);
        let mean_ms_per_frame = avg(&|c| c.timing.map(|t| t.ms));
        let delta_t = avg(&|c| c.timing.map(|t| t.delta_t));
        Self {
            mppte,
            dtw,
            homography_mse,
            auc,
            fps: mean_ms_per_frame.map(|ms| 1000.0 / ms),
            mean_ms_per_frame,
            delta_t,
            clips,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["clip_id", "mppte", "dtw", "mse", "auc", "ms", "fps", "delta_t"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.clips {
            out.write_record([
                c.clip_id.clone(),
                c.mppte.to_string(),
                c.dtw.to_string(),
                opt(c.mse),
                opt(c.auc),
                opt(c.timing.map(|t| t.ms)),
                opt(c.timing.map(|t| t.fps)),
                opt(c.timing.map(|t| t.delta_t)),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
        writeln!(w, "clips: {}", self.clips.len())?;
        writeln!(w, "mppte_px: {:.3}", self.mppte)?;
        writeln!(w, "dtw_px: {:.3}", self.dtw)?;
        writeln!(w, "homography_mse: {}", opt(self.homography_mse, 6))?;
        writeln!(w, "auc_percent: {}", opt(self.auc, 1))?;
        writeln!(w, "ms_per_frame: {}", opt(self.mean_ms_per_frame, 2))?;
        writeln!(w, "fps: {}", opt(self.fps, 1))?;
        writeln!(w, "delta_t_s: {}", opt(self.delta_t, 3))?;
        for c in &self.clips {
            writeln!(
                w,
                "  {}: mppte {:.3} dtw {:.3} mse {} auc {}",
                c.clip_id,
                c.mppte,
                c.dtw,
                opt(c.mse, 6),
                opt(c.auc, 1)
            )?;
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, MetricsError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

pub fn load_records(path: &Path) -> Result<Vec<TrajectoryRecord>, MetricsError> {
    read_records_json(open(path)?).map_err(|err| MetricsError::Format {
        path: path.display().to_string(),
        err,
    })
}

pub fn load_homographies(path: &Path) -> Result<Vec<Homography>, MetricsError> {
    read_homog(open(path)?).map_err(|err| MetricsError::Format {
        path: path.display().to_string(),
        err,
    })
}

fn load_boxes(path: &Path) -> Result<Vec<BBox>, MetricsError> {
    let tf = track_source_from_file(path)?;
    Ok(tf.boxes().map(|(_, b)| b).collect())
}

/// Per-frame `total_ms` column of a metadata file.
pub fn load_frame_ms<R: BufRead>(r: R) -> Result<Vec<f64>, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    let col = rd
        .headers()
        .map_err(|e| FormatError::new(1, e.to_string()))?
        .iter()
        .position(|h| h == "total_ms")
        .ok_or_else(|| FormatError::new(1, "no total_ms column"))?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| FormatError::new(i + 2, e.to_string()))?;
        let v = rec
            .get(col)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| FormatError::new(i + 2, "bad total_ms"))?;
        out.push(v);
    }
    Ok(out)
}

fn load_timing(pred_dir: &Path) -> Result<Option<Timing>, MetricsError> {
    let meta = pred_dir.join(files::PRED_METADATA);
    let info = pred_dir.join(files::PRED_RUN_INFO);
    if !meta.exists() || !info.exists() {
        return Ok(None);
    }
    let frame_ms = load_frame_ms(open(&meta)?).map_err(|err| MetricsError::Format {
        path: meta.display().to_string(),
        err,
    })?;
    let run: RunInfo = serde_json::from_reader(open(&info)?).map_err(|e| MetricsError::Format {
        path: info.display().to_string(),
        err: FormatError::new(e.line(), e.to_string()),
    })?;
    let duration = if run.fps > 0.0 { run.frames as f64 / run.fps } else { 0.0 };
    Ok(timing(&frame_ms, run.total_seconds, duration))
}

/// Scores one predicted clip directory against one reference directory.
/// Homography and box scores are reported when both sides have the files.
pub fn evaluate_clip(clip_id: &str, pred_dir: &Path, ref_dir: &Path, opts: &EvalOptions) -> Result<ClipEval, MetricsError> {
    let pred = load_records(&pred_dir.join(files::PRED_TRAJECTORY))?;
    let reference = load_records(&ref_dir.join(files::REF_TRAJECTORY))?;
    let mppte_v = mppte(&pred, &reference, opts.penalty)?;
    let dtw_v = dtw_clip(&pred, &reference)?;

    let (ph, rh) = (pred_dir.join(files::PRED_HOMOG), ref_dir.join(files::REF_HOMOG));
    let mse = if ph.exists() && rh.exists() {
        Some(homography_mse_clip(&load_homographies(&ph)?, &load_homographies(&rh)?)?)
    } else {
        None
    };
    let (pb, rb) = (pred_dir.join(files::PRED_BOXES), ref_dir.join(files::REF_BOXES));
    let auc = if pb.exists() && rb.exists() {
        Some(success_auc(&load_boxes(&pb)?, &load_boxes(&rb)?)?.auc)
    } else {
        None
    };
    let timing = if opts.timing { load_timing(pred_dir)? } else { None };
    Ok(ClipEval {
        clip_id: clip_id.to_string(),
        mppte: mppte_v,
        dtw: dtw_v,
        mse,
        auc,
        timing,
    })
}

fn clip_dirs(root: &Path, marker: &str) -> Result<Vec<(String, PathBuf)>, MetricsError> {
    if root.join(marker).exists() {
        let id = root
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "clip".into());
        return Ok(vec![(id, root.to_path_buf())]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        let path = entry.path();
        if path.is_dir() && path.join(marker).exists() {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

/// Evaluates a prediction tree against a reference tree. Either both
/// roots are single clips, or their clip subdirectories must match by name.
pub fn evaluate_dirs(pred_root: &Path, ref_root: &Path, opts: &EvalOptions) -> Result<EvalReport, MetricsError> {
    let pred = clip_dirs(pred_root, files::PRED_TRAJECTORY)?;
    let refs = clip_dirs(ref_root, files::REF_TRAJECTORY)?;
    if pred.is_empty() || refs.is_empty() {
        return Err(MetricsError::ClipMismatch(format!(
            "no clips found ({} predicted, {} reference)",
            pred.len(),
            refs.len()
        )));
    }
    if pred.len() != refs.len() {
        return Err(MetricsError::ClipMismatch(format!(
            "{} predicted clips vs {} reference clips",
            pred.len(),
            refs.len()
        )));
    }
    let single = pred_root.join(files::PRED_TRAJECTORY).exists() && ref_root.join(files::REF_TRAJECTORY).exists();
    let mut clips = Vec::with_capacity(pred.len());
    for ((pid, pdir), (rid, rdir)) in pred.iter().zip(&refs) {
        if !single && pid != rid {
            return Err(MetricsError::ClipMismatch(format!("clip {pid} has no reference (found {rid})")));
        }
        clips.push(evaluate_clip(rid, pdir, rdir, opts)?);
    }
    Ok(EvalReport::from_clips(clips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::TrajPoint;
    use proptest::prelude::*;

    fn rec(frame: usize, pts: &[(usize, f64, f64)]) -> TrajectoryRecord {
        TrajectoryRecord {
            frame,
            width: 100.0,
            height: 100.0,
            points: pts.iter().map(|&(o, x, y)| TrajPoint::new(o, Point2::new(x, y))).collect(),
        }
    }

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn mppte_identity_and_shift() {
        let r = vec![rec(0, &[(0, 10.0, 10.0)]), rec(1, &[(0, 12.0, 10.0), (1, 20.0, 30.0)])];
        assert_eq!(mppte(&r, &r, ClipPenalty::Diagonal).unwrap(), 0.0);
        let shifted: Vec<_> = r
            .iter()
            .map(|x| {
                let pts: Vec<_> = x.points.iter().map(|q| (q.origin_frame, q.p.x + 3.0, q.p.y + 4.0)).collect();
                rec(x.frame, &pts)
            })
            .collect();
        assert_eq!(mppte(&shifted, &r, ClipPenalty::Diagonal).unwrap(), 5.0);
    }

    #[test]
    fn mppte_penalty_rules() {
        let r = vec![rec(1, &[(0, 0.0, 0.0), (1, 5.0, 5.0)])];
        let pr = vec![rec(1, &[(1, 5.0, 5.0)])];
        let diag = 100f64.hypot(100.0);
        assert!((mppte(&pr, &r, ClipPenalty::Diagonal).unwrap() - diag / 2.0).abs() < 1e-12);
        assert_eq!(mppte(&pr, &r, ClipPenalty::Skip).unwrap(), 0.0);
        // Extra predicted points outside the visible reference set are ignored.
        let extra = vec![rec(1, &[(0, 0.0, 0.0), (1, 5.0, 5.0), (2, 1.0, 1.0)])];
        assert_eq!(mppte(&extra, &r, ClipPenalty::Diagonal).unwrap(), 0.0);
    }

    #[test]
    fn mppte_frame_count() {
        let r = vec![rec(0, &[(0, 1.0, 1.0)])];
        assert!(matches!(
            mppte(&[], &r, ClipPenalty::Diagonal),
            Err(MetricsError::FrameCountMismatch { pred: 0, reference: 1 })
        ));
    }

    #[test]
    fn dtw_examples() {
        let a = [p(0.0, 0.0), p(1.0, 0.0)];
        let b = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)];
        assert_eq!(dtw(&a, &b).unwrap(), 1.0);
        assert_eq!(dtw(&b, &b).unwrap(), 0.0);
        assert!(matches!(dtw(&[], &b), Err(MetricsError::EmptyTrajectory)));
    }

    /// Exhaustive recursion over warping paths.
    fn dtw_brute(a: &[Point2], b: &[Point2], i: usize, j: usize) -> f64 {
        let c = a[i].distance(&b[j]);
        if i == 0 && j == 0 {
            return c;
        }
        let mut best = f64::INFINITY;
        if i > 0 {
            best = best.min(dtw_brute(a, b, i - 1, j));
        }
        if j > 0 {
            best = best.min(dtw_brute(a, b, i, j - 1));
        }
        if i > 0 && j > 0 {
            best = best.min(dtw_brute(a, b, i - 1, j - 1));
        }
        c + best
    }

    fn pts() -> impl Strategy<Value = Vec<Point2>> {
        prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| p(x, y)), 1..7)
    }

    proptest! {
        #[test]
        fn dtw_matches_brute_force(a in pts(), b in pts()) {
            let d = dtw(&a, &b).unwrap();
            let e = dtw_brute(&a, &b, a.len() - 1, b.len() - 1);
            prop_assert!((d - e).abs() < 1e-9);
        }

        #[test]
        fn dtw_symmetric_nonnegative(a in pts(), b in pts()) {
            let d = dtw(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - dtw(&b, &a).unwrap()).abs() < 1e-9);
            prop_assert_eq!(dtw(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn shift_invariance(a in pts(), b in pts(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
            let sh = |v: &[Point2]| v.iter().map(|q| p(q.x + dx, q.y + dy)).collect::<Vec<_>>();
            let d0 = dtw(&a, &b).unwrap();
            let d1 = dtw(&sh(&a), &sh(&b)).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-6);

            let ra = rec(0, &a.iter().enumerate().map(|(i, q)| (i, q.x, q.y)).collect::<Vec<_>>());
            let rb = rec(0, &b.iter().enumerate().map(|(i, q)| (i, q.x, q.y)).collect::<Vec<_>>());
            let sa = rec(0, &sh(&a).iter().enumerate().map(|(i, q)| (i, q.x, q.y)).collect::<Vec<_>>());
            let sb = rec(0, &sh(&b).iter().enumerate().map(|(i, q)| (i, q.x, q.y)).collect::<Vec<_>>());
            let m0 = mppte(&[ra], &[rb], ClipPenalty::Diagonal).unwrap();
            let m1 = mppte(&[sa], &[sb], ClipPenalty::Diagonal).unwrap();
            prop_assert!((m0 - m1).abs() < 1e-6);
        }

        #[test]
        fn auc_bounds(boxes in prop::collection::vec((0.0..50.0f64, 0.0..50.0f64, 1.0..20.0f64, 1.0..20.0f64), 1..10),
                      offs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 10)) {
            let gt: Vec<BBox> = boxes.iter().map(|&(x, y, w, h)| BBox::new(x, y, w, h).unwrap()).collect();
            let pr: Vec<BBox> = gt.iter().zip(&offs).map(|(b, &(dx, dy))| b.translated(dx, dy)).collect();
            let s = success_auc(&pr, &gt).unwrap();
            prop_assert!((0.0..=100.0).contains(&s.auc));
            prop_assert_eq!(success_auc(&gt, &gt).unwrap().auc, 100.0);
        }
    }

    #[test]
    fn homography_mse_examples() {
        let h = Homography::translation(5.0, -2.0);
        assert_eq!(homography_mse(&h, &h), 0.0);
        let g = Homography::translation(8.0, -2.0);
        assert_eq!(homography_mse(&g, &h), 1.0);
    }

    #[test]
    fn auc_examples() {
        let gt = vec![BBox::new(10.0, 10.0, 20.0, 20.0).unwrap(); 5];
        assert_eq!(success_auc(&gt, &gt).unwrap().auc, 100.0);
        let far = vec![BBox::new(100.0, 100.0, 20.0, 20.0).unwrap(); 5];
        let s = success_auc(&far, &gt).unwrap();
        assert_eq!(s.auc, 0.0);
        assert_eq!(s.curve.len(), 21);
        assert!(s.curve.iter().all(|&(_, f)| f == 0.0));
        let half: Vec<_> = gt.iter().map(|b| b.translated(10.0, 0.0)).collect();
        let s = success_auc(&half, &gt).unwrap();
        assert!((s.auc - 100.0 / 3.0).abs() < 1e-9);
        assert!(matches!(success_auc(&gt[..2], &gt), Err(MetricsError::LengthMismatch(2, 5))));
    }

    #[test]
    fn timing_examples() {
        let t = timing(&[50.0; 30], 1.5, 1.0).unwrap();
        assert!((t.delta_t - 0.5).abs() < 1e-12);
        assert_eq!(t.ms, 50.0);
        assert_eq!(t.fps, 20.0);
        assert_eq!(timing(&[10.0; 30], 0.3, 1.0).unwrap().delta_t, 0.0);
        assert!(timing(&[], 1.0, 1.0).is_none());
    }

    #[test]
    fn report_csv_layout() {
        let rep = EvalReport::from_clips(vec![
            ClipEval {
                clip_id: "a".into(),
                mppte: 1.0,
                dtw: 2.0,
                mse: Some(0.5),
                auc: None,
                timing: None,
            },
            ClipEval {
                clip_id: "b".into(),
                mppte: 3.0,
                dtw: 4.0,
                mse: None,
                auc: Some(50.0),
                timing: Some(Timing {
                    ms: 20.0,
                    fps: 50.0,
                    delta_t: 0.0,
                }),
            },
        ]);
        assert_eq!(rep.mppte, 2.0);
        assert_eq!(rep.homography_mse, Some(0.5));
        assert_eq!(rep.fps, Some(50.0));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "clip_id,mppte,dtw,mse,auc,ms,fps,delta_t\na,1,2,0.5,,,,\nb,3,4,,50,20,50,0\n");
    }

    #[test]
    fn frame_ms_column() {
        let text = "frame,corner_count,total_ms\n1,10,2.5\n2,11,3.5\n";
        assert_eq!(load_frame_ms(text.as_bytes()).unwrap(), vec![2.5, 3.5]);
        assert!(load_frame_ms("frame\n1\n".as_bytes()).is_err());
    }
}
