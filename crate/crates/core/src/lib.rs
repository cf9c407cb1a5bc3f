//! Online trajectory overlay for a single target in moving-camera video.
//!
//! Target motion comes from a bounding-box tracker, camera motion from
//! key-point correspondences between consecutive frames fitted with a
//! RANSAC homography. The past anchor points are carried into every new
//! frame through that homography, clipped to the frame, and extended with
//! the current anchor.

// NaN-rejecting comparisons are written as negations on purpose; matrix code
// indexes by row and column.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod features;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod optflow;
pub mod pipeline;
pub mod render;
pub mod synthgen;
pub mod tracker;
pub mod trajectory;

use thiserror::Error;

/// A malformed line in one of the text file formats.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

pub use geometry::{Correspondence, Homography, Point2};
pub use image::{ColorFrame, GrayFrame, Pyramid};
pub use tracker::BBox;
pub use trajectory::Trajectory;
