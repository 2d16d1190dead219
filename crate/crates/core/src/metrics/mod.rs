//! Reconstruction scoring: target masks, point-cloud Chamfer distance, log-CD
//! and aggregate statistics.

pub mod chamfer;
pub mod report;

use rand::Rng;

use crate::em::RoiGrid;
use crate::error::{Error, Result};
use crate::scene_gen::points::Point4;
use crate::scene_gen::{sample_pixel_points, NormStats, PointCloud};

pub use chamfer::{chamfer, chamfer_brute_force, log_cd, KdTree};
pub use report::{aggregate, EvalRecord, MethodSummary, Quartiles, Summary, ViewGridCell};

/// Two-cluster split of pixel magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMask {
    pub mask: Vec<bool>,
    /// Set when all magnitudes are equal and no split exists.
    pub degenerate: bool,
    /// Final cluster centres `(background, target)`.
    pub centroids: (f64, f64),
}

impl TargetMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// 1-D K-means with two clusters seeded at the minimum and maximum; pixels
/// nearer the upper centre form the target.
pub fn kmeans2(values: &[f64]) -> Result<TargetMask> {
    if values.is_empty() {
        return Err(Error::invalid("k-means needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input must be finite"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(TargetMask {
            mask: vec![false; values.len()],
            degenerate: true,
            centroids: (lo, hi),
        });
    }
    let (mut c0, mut c1) = (lo, hi);
    let mut mask: Vec<bool> = Vec::new();
    loop {
        let next: Vec<bool> = values.iter().map(|&v| (v - c1).abs() < (v - c0).abs()).collect();
        if next == mask {
            break;
        }
        mask = next;
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for (&v, &m) in values.iter().zip(&mask) {
            if m {
                s1 += v;
                n1 += 1;
            } else {
                s0 += v;
                n0 += 1;
            }
        }
        // the extreme values always stay with their own seed, so neither
        // cluster empties
        c0 = s0 / n0 as f64;
        c1 = s1 / n1 as f64;
    }
    Ok(TargetMask {
        mask,
        degenerate: false,
        centroids: (c0, c1),
    })
}

/// Intersection over union of two masks (1 when both are empty).
pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Normalized point cloud of a pixel reconstruction: the target pixels found
/// by [`kmeans2`] on the contrast magnitude, sampled like the labels.
///
/// Returns `None` when the magnitude image is constant.
pub fn reconstruction_to_point_cloud<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &RoiGrid,
    eps_r: &[f64],
    sigma: &[f64],
    magnitude: &[f64],
    num_points: usize,
    stats: &NormStats,
) -> Result<Option<PointCloud>> {
    let d = grid.num_pixels();
    if eps_r.len() != d || sigma.len() != d || magnitude.len() != d {
        return Err(Error::ShapeMismatch(format!("images must hold {d} pixels")));
    }
    stats.validate()?;
    let split = kmeans2(magnitude)?;
    if split.degenerate || split.count() == 0 {
        return Ok(None);
    }
    let raw = sample_pixel_points(rng, grid, &split.mask, eps_r, sigma, num_points)?;
    let points: Vec<Point4> = raw.iter().map(|p| stats.normalize(p)).collect();
    Ok(Some(PointCloud::new(points)?))
}
