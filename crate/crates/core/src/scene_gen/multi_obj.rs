//! Scenes with several separated rectangles and cylinders of independent material.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MaterialRanges, Range};
use crate::em::{RoiGrid, TargetScene};
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Axis-aligned object cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect { center: Point2, width: f64, height: f64 },
    Circle { center: Point2, diameter: f64 },
}

impl Shape {
    pub fn center(&self) -> Point2 {
        match *self {
            Shape::Rect { center, .. } | Shape::Circle { center, .. } => center,
        }
    }

    /// Radius of the smallest centred circle enclosing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Rect { width, height, .. } => 0.5 * width.hypot(height),
            Shape::Circle { diameter, .. } => 0.5 * diameter,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Shape::Rect {
                center,
                width,
                height,
            } => (p.x - center.x).abs() <= 0.5 * width && (p.y - center.y).abs() <= 0.5 * height,
            Shape::Circle { center, diameter } => p.distance(center) <= 0.5 * diameter,
        }
    }
}

/// A shape with its homogeneous material.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub shape: Shape,
    pub eps_r: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiObjConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Rectangle side or circle diameter in metres.
    pub size: Range,
    /// Minimum clearance between bounding circles in metres.
    pub gap: f64,
    /// Placement attempts per object before giving up.
    pub max_attempts: usize,
}

impl Default for MultiObjConfig {
    fn default() -> Self {
        MultiObjConfig {
            min_objects: 2,
            max_objects: 4,
            size: Range::new(0.06, 0.15),
            gap: 0.01,
            max_attempts: 1000,
        }
    }
}

/// Paint `objects` onto the grid; a pixel belongs to the first object whose
/// shape contains its centre.
pub fn rasterize_objects(grid: &RoiGrid, objects: &[PlacedObject]) -> Result<TargetScene> {
    let d = grid.num_pixels();
    let mut eps = vec![1.0; d];
    let mut sigma = vec![0.0; d];
    for m in 0..d {
        let c = grid.pixel_center(m);
        if let Some(o) = objects.iter().find(|o| o.shape.contains(c)) {
            eps[m] = o.eps_r;
            sigma[m] = o.sigma;
        }
    }
    TargetScene::new(grid.clone(), eps, sigma)
}

/// Draw 2-4 (by default) non-overlapping objects inside the RoI.
pub fn gen_multi_obj<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &RoiGrid,
    config: &MultiObjConfig,
    material: &MaterialRanges,
) -> Result<(TargetScene, Vec<PlacedObject>)> {
    config.size.validate("object size")?;
    material.validate()?;
    if config.min_objects == 0 || config.min_objects > config.max_objects {
        return Err(Error::invalid("object count range is empty"));
    }
    let count = rng.random_range(config.min_objects..=config.max_objects);
    let half = 0.5 * grid.side_length();
    let mut objects: Vec<PlacedObject> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..config.max_attempts {
            let shape = if rng.random::<bool>() {
                let width = config.size.sample(rng);
                let height = config.size.sample(rng);
                Shape::Rect {
                    center: Point2::ORIGIN,
                    width,
                    height,
                }
            } else {
                Shape::Circle {
                    center: Point2::ORIGIN,
                    diameter: config.size.sample(rng),
                }
            };
            let r = shape.bounding_radius();
            if r >= half {
                continue;
            }
            let center = Point2::new(
                rng.random_range(-half + r..half - r),
                rng.random_range(-half + r..half - r),
            );
            let shape = match shape {
                Shape::Rect { width, height, .. } => Shape::Rect {
                    center,
                    width,
                    height,
                },
                Shape::Circle { diameter, .. } => Shape::Circle { center, diameter },
            };
            let clear = objects.iter().all(|o| {
                o.shape.center().distance(center) > o.shape.bounding_radius() + r + config.gap
            });
            if clear {
                let (eps_r, sigma) = material.sample(rng);
                objects.push(PlacedObject {
                    shape,
                    eps_r,
                    sigma,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::DegenerateScene(format!(
                "could not place object {} of {count} after {} attempts",
                objects.len() + 1,
                config.max_attempts
            )));
        }
    }
    let scene = rasterize_objects(grid, &objects)?;
    if scene.foreground_count() == 0 {
        return Err(Error::DegenerateScene("objects cover no pixel centre".into()));
    }
    Ok((scene, objects))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn centred_circle_gives_a_disk() {
        let grid = RoiGrid::new(0.5, 32).unwrap();
        let obj = PlacedObject {
            shape: Shape::Circle {
                center: Point2::ORIGIN,
                diameter: 0.2,
            },
            eps_r: 2.0,
            sigma: 0.03,
        };
        let scene = rasterize_objects(&grid, &[obj]).unwrap();
        for m in 0..grid.num_pixels() {
            assert_eq!(scene.is_foreground(m), grid.pixel_center(m).norm() <= 0.1);
        }
    }

    #[test]
    fn objects_never_overlap() {
        let grid = RoiGrid::new(0.5, 64).unwrap();
        let cfg = MultiObjConfig::default();
        let mat = MaterialRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut heterogeneous = 0;
        for _ in 0..1000 {
            let (scene, objects) = gen_multi_obj(&mut rng, &grid, &cfg, &mat).unwrap();
            assert!((2..=4).contains(&objects.len()));
            // pixel-level audit: no pixel centre lies in two shapes, and every
            // shape stays inside the RoI
            for m in 0..grid.num_pixels() {
                let c = grid.pixel_center(m);
                assert!(objects.iter().filter(|o| o.shape.contains(c)).count() <= 1);
            }
            for o in &objects {
                let c = o.shape.center();
                let r = o.shape.bounding_radius();
                assert!(c.x.abs() + r <= 0.25 && c.y.abs() + r <= 0.25);
                assert!(cfg.size.contains(2.0 * r) || matches!(o.shape, Shape::Rect { .. }));
            }
            if objects.windows(2).any(|w| w[0].eps_r != w[1].eps_r) {
                heterogeneous += 1;
            }
            assert!(scene.foreground_count() > 0);
        }
        assert!(heterogeneous > 990);
    }

    #[test]
    fn impossible_packing_is_degenerate() {
        let grid = RoiGrid::new(0.5, 16).unwrap();
        let cfg = MultiObjConfig {
            min_objects: 10,
            max_objects: 10,
            size: Range::new(0.2, 0.2),
            max_attempts: 50,
            ..MultiObjConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_multi_obj(&mut rng, &grid, &cfg, &MaterialRanges::default()),
            Err(Error::DegenerateScene(_))
        ));
    }
}
