//! Shape-EM point clouds: points `(x, y, eps_r, sigma)` sampled over target
//! pixels and normalized per dimension with dataset-wide statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::em::{RoiGrid, TargetScene};
use crate::error::{Error, Result};

pub type Point4 = [f64; 4];

/// Standard deviations below this are replaced by it.
pub const MIN_STD: f64 = 1e-6;

/// Per-dimension affine normalization `(p - mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Point4,
    pub std: Point4,
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats {
            mean: [0.0; 4],
            std: [1.0; 4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..4 {
            if !(self.mean[k].is_finite() && self.std[k].is_finite() && self.std[k] > 0.0) {
                return Err(Error::invalid(format!(
                    "normalization dimension {k} has mean {} and std {}",
                    self.mean[k], self.std[k]
                )));
            }
        }
        Ok(())
    }

    pub fn normalize(&self, p: &Point4) -> Point4 {
        std::array::from_fn(|k| (p[k] - self.mean[k]) / self.std[k])
    }

    pub fn denormalize(&self, p: &Point4) -> Point4 {
        std::array::from_fn(|k| p[k] * self.std[k] + self.mean[k])
    }
}

/// A cloud of normalized 4-D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point4>,
}

impl PointCloud {
    pub fn new(points: Vec<Point4>) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point4] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point4> {
        self.points
    }

    /// Row-major `M x 4` values.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(4) {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form 4-D points",
                values.len()
            )));
        }
        Self::new(values.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
    }
}

/// `M` raw points spread uniformly over the pixels in `mask`, each jittered
/// uniformly inside its pixel and carrying that pixel's material.
pub fn sample_pixel_points<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &RoiGrid,
    mask: &[bool],
    eps_r: &[f64],
    sigma: &[f64],
    num_points: usize,
) -> Result<Vec<Point4>> {
    let d = grid.num_pixels();
    if mask.len() != d || eps_r.len() != d || sigma.len() != d {
        return Err(Error::ShapeMismatch("mask and images must cover the grid".into()));
    }
    let support: Vec<usize> = (0..d).filter(|&m| mask[m]).collect();
    if support.is_empty() {
        return Err(Error::DegenerateScene("no target pixel to sample from".into()));
    }
    if num_points == 0 {
        return Err(Error::invalid("point count must be positive"));
    }
    let s = grid.pixel_side();
    Ok((0..num_points)
        .map(|_| {
            let m = support[rng.random_range(0..support.len())];
            let c = grid.pixel_center(m);
            let dx = rng.random_range(-0.5..0.5) * s;
            let dy = rng.random_range(-0.5..0.5) * s;
            [c.x + dx, c.y + dy, eps_r[m], sigma[m]]
        })
        .collect())
}

/// Raw (un-normalized) points over the scene's RoI foreground.
pub fn sample_scene_points<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &TargetScene,
    num_points: usize,
) -> Result<Vec<Point4>> {
    sample_pixel_points(
        rng,
        scene.grid(),
        &scene.foreground_mask(),
        scene.eps_r(),
        scene.sigma(),
        num_points,
    )
}

/// Sample and normalize.
pub fn scene_to_point_cloud<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &TargetScene,
    num_points: usize,
    stats: &NormStats,
) -> Result<PointCloud> {
    stats.validate()?;
    let raw = sample_scene_points(rng, scene, num_points)?;
    PointCloud::new(raw.iter().map(|p| stats.normalize(p)).collect())
}

/// Streaming per-dimension mean and population variance.
///
/// Each cloud is reduced on its own and merged with the pairwise update of
/// Chan et al., so the result depends only on the order in which clouds are
/// pushed.
#[derive(Clone, Debug, Default)]
pub struct NormAccumulator {
    count: usize,
    clouds: usize,
    mean: Point4,
    m2: Point4,
}

impl NormAccumulator {
    pub fn push_cloud(&mut self, points: &[Point4]) {
        if points.is_empty() {
            return;
        }
        let n = points.len() as f64;
        let mut mean = [0.0; 4];
        for p in points {
            for k in 0..4 {
                mean[k] += p[k];
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut m2 = [0.0; 4];
        for p in points {
            for k in 0..4 {
                m2[k] += (p[k] - mean[k]).powi(2);
            }
        }
        let total = self.count as f64 + n;
        for k in 0..4 {
            let delta = mean[k] - self.mean[k];
            self.mean[k] += delta * n / total;
            self.m2[k] += m2[k] + delta * delta * self.count as f64 * n / total;
        }
        self.count += points.len();
        self.clouds += 1;
    }

    pub fn num_clouds(&self) -> usize {
        self.clouds
    }

    /// Statistics with every standard deviation floored at [`MIN_STD`].
    pub fn finish(&self) -> Result<NormStats> {
        if self.clouds < 2 {
            return Err(Error::invalid(format!(
                "normalization needs at least 2 scenes, got {}",
                self.clouds
            )));
        }
        let mut std = [0.0; 4];
        for k in 0..4 {
            let s = (self.m2[k] / self.count as f64).sqrt();
            std[k] = if s > MIN_STD {
                s
            } else {
                log::warn!("dimension {k} has std {s:.3e}; using {MIN_STD:e}");
                MIN_STD
            };
        }
        Ok(NormStats {
            mean: self.mean,
            std,
        })
    }
}

/// Mean and population standard deviation over all raw training points.
pub fn compute_norm_stats(clouds: &[Vec<Point4>]) -> Result<NormStats> {
    let mut acc = NormAccumulator::default();
    for c in clouds {
        acc.push_cloud(c);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disk_scene(grid: &RoiGrid, eps: f64, sigma: f64) -> TargetScene {
        let d = grid.num_pixels();
        let mask: Vec<bool> = (0..d).map(|m| grid.pixel_center(m).norm() < 0.1).collect();
        TargetScene::new(
            grid.clone(),
            mask.iter().map(|&f| if f { eps } else { 1.0 }).collect(),
            mask.iter().map(|&f| if f { sigma } else { 0.0 }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn points_stay_inside_target_pixels() {
        let grid = RoiGrid::new(0.5, 16).unwrap();
        let scene = disk_scene(&grid, 1.8, 0.02);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_scene_points(&mut rng, &scene, 1000).unwrap();
        assert_eq!(pts.len(), 1000);
        for p in &pts {
            let (ix, iy) = grid.lattice_index(crate::Point2::new(p[0], p[1]));
            let m = grid.pixel_index(ix, iy).unwrap();
            assert!(scene.is_foreground(m));
            assert_eq!((p[2], p[3]), (1.8, 0.02));
        }
    }

    #[test]
    fn homogeneous_target_shares_material_coordinates() {
        let grid = RoiGrid::new(0.5, 16).unwrap();
        let scene = disk_scene(&grid, 1.8, 0.02);
        let stats = NormStats {
            mean: [0.0, 0.0, 2.0, 0.05],
            std: [0.1, 0.1, 0.3, 0.03],
        };
        let cloud = scene_to_point_cloud(&mut ChaCha8Rng::seed_from_u64(2), &scene, 200, &stats).unwrap();
        let first = cloud.points()[0];
        assert!(cloud.points().iter().all(|p| p[2] == first[2] && p[3] == first[3]));
    }

    #[test]
    fn empty_scene_is_degenerate() {
        let grid = RoiGrid::new(0.5, 8).unwrap();
        let scene = TargetScene::background(grid);
        assert!(matches!(
            sample_scene_points(&mut ChaCha8Rng::seed_from_u64(0), &scene, 10),
            Err(Error::DegenerateScene(_))
        ));
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let clouds: Vec<Vec<Point4>> = (0..5)
            .map(|i| {
                (0..30 + 7 * i)
                    .map(|_| std::array::from_fn(|k| rng.random_range(-1.0..1.0) * (k + 1) as f64 + k as f64))
                    .collect()
            })
            .collect();
        let stats = compute_norm_stats(&clouds).unwrap();
        let all: Vec<&Point4> = clouds.iter().flatten().collect();
        let n = all.len() as f64;
        for k in 0..4 {
            let mean = all.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = all.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n;
            assert!((stats.mean[k] - mean).abs() < 1e-12);
            assert!((stats.std[k] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_is_inflated() {
        let grid = RoiGrid::new(0.5, 16).unwrap();
        let scene = disk_scene(&grid, 1.8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = sample_scene_points(&mut rng, &scene, 100).unwrap();
        let b = sample_scene_points(&mut rng, &scene, 100).unwrap();
        let stats = compute_norm_stats(&[a, b]).unwrap();
        assert_eq!(stats.std[2], MIN_STD);
        assert_eq!(stats.std[3], MIN_STD);
        assert!(stats.std[0] > 0.01);
        assert!(compute_norm_stats(&[vec![[0.0; 4]]]).is_err());
    }

    #[test]
    fn normalized_training_cloud_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let clouds: Vec<Vec<Point4>> = (0..4)
            .map(|_| (0..50).map(|_| std::array::from_fn(|_| rng.random_range(0.0..3.0))).collect())
            .collect();
        let stats = compute_norm_stats(&clouds).unwrap();
        let normalized: Vec<Vec<Point4>> = clouds
            .iter()
            .map(|c| c.iter().map(|p| stats.normalize(p)).collect())
            .collect();
        let again = compute_norm_stats(&normalized).unwrap();
        for k in 0..4 {
            assert!(again.mean[k].abs() < 1e-12);
            assert!((again.std[k] - 1.0).abs() < 1e-12);
        }
    }
}
