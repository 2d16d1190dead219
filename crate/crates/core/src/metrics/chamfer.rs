//! Chamfer distance between 4-D point clouds.

use crate::error::{Error, Result};
use crate::par;
use crate::scene_gen::points::Point4;

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
fn dist_sq(a: &Point4, b: &Point4) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// Static kd-tree over a point set, laid out implicitly: the node of a
/// subrange sits at its middle index.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point4>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point4]) -> Self {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build(&mut pts, &mut axes);
        KdTree { points: pts, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest squared distance from `q` to the set (infinite when empty).
    ///
    /// A subtree is skipped only when the squared gap to its splitting plane
    /// already exceeds the best distance; rounding is monotone, so every
    /// skipped point is at least that far and the result equals a linear scan.
    pub fn nearest_dist_sq(&self, q: &Point4) -> f64 {
        let mut best = f64::INFINITY;
        self.search(q, 0, self.points.len(), &mut best);
        best
    }

    fn search(&self, q: &Point4, lo: usize, hi: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d = dist_sq(q, p);
        if d < *best {
            *best = d;
        }
        let axis = self.axes[mid] as usize;
        let gap = q[axis] - p[axis];
        let (near, far) = if gap < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        if gap * gap <= *best {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build(pts: &mut [Point4], axes: &mut [u8]) {
    if pts.len() <= 1 {
        return;
    }
    let axis = widest_axis(pts);
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = pts.split_at_mut(mid);
    let (la, ra) = axes.split_at_mut(mid);
    build(left, la);
    build(&mut rest[1..], &mut ra[1..]);
}

fn widest_axis(pts: &[Point4]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..4 {
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
        if hi - lo > best.1 {
            best = (k, hi - lo);
        }
    }
    best.0
}

fn check(a: &[Point4], b: &[Point4]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Chamfer distance needs two nonempty clouds"));
    }
    if a.iter().chain(b).any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("point clouds must be finite"));
    }
    Ok(())
}

/// Mean nearest-neighbour squared distance from `from` to `to`.
fn directed(from: &[Point4], to: &[Point4]) -> f64 {
    let tree = KdTree::new(to);
    let nearest = par::map_slice(from, |p| tree.nearest_dist_sq(p));
    nearest.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: the mean squared distance from each point of
/// one cloud to its nearest neighbour in the other, summed over both
/// directions.
pub fn chamfer(a: &[Point4], b: &[Point4]) -> Result<f64> {
    check(a, b)?;
    Ok(directed(a, b) + directed(b, a))
}

/// Reference Chamfer distance by exhaustive pairwise scan.
pub fn chamfer_brute_force(a: &[Point4], b: &[Point4]) -> Result<f64> {
    check(a, b)?;
    let directed = |from: &[Point4], to: &[Point4]| {
        from.iter()
            .map(|p| to.iter().map(|q| dist_sq(p, q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(directed(a, b) + directed(b, a))
}

/// `10 log10(cd)` in dB; zero maps to negative infinity.
pub fn log_cd(cd: f64) -> Result<f64> {
    if !(cd >= 0.0) || cd.is_infinite() {
        return Err(Error::invalid(format!("Chamfer distance must be finite and >= 0, got {cd}")));
    }
    Ok(if cd == 0.0 { f64::NEG_INFINITY } else { 10.0 * cd.log10() })
}
