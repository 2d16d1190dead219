//! Target scenes, view layouts and point-cloud labels for synthetic datasets.

pub mod clutter;
pub mod digits;
pub mod idx;
pub mod layout;
pub mod multi_obj;
pub mod points;
pub mod raster;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clutter::{gen_clutter, ClutterConfig};
pub use digits::{render_digit, DigitStyle};
pub use idx::{read_idx_images, read_idx_labels};
pub use layout::{sample_view_layout, LayoutRanges};
pub use multi_obj::{gen_multi_obj, rasterize_objects, MultiObjConfig, Shape};
pub use points::{
    compute_norm_stats, sample_pixel_points, sample_scene_points, scene_to_point_cloud,
    NormAccumulator, NormStats, PointCloud,
};
pub use raster::{rasterize_binary_image, rasterize_with_fill, GrayImage};

/// Closed interval for a uniformly drawn quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::invalid(format!(
                "{what} range [{}, {}] is not a valid interval",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }
}

/// Ranges of the homogeneous material assigned to targets and clutter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialRanges {
    pub eps_r: Range,
    /// Conductivity in S/m.
    pub sigma: Range,
}

impl Default for MaterialRanges {
    fn default() -> Self {
        MaterialRanges {
            eps_r: Range::new(1.5, 2.5),
            sigma: Range::new(0.0, 0.1),
        }
    }
}

impl MaterialRanges {
    pub fn validate(&self) -> Result<()> {
        self.eps_r.validate("eps_r")?;
        self.sigma.validate("sigma")?;
        if self.eps_r.min < 1.0 || self.sigma.min < 0.0 {
            return Err(Error::invalid("materials need eps_r >= 1 and sigma >= 0"));
        }
        Ok(())
    }

    /// Draw `(eps_r, sigma)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let e = self.eps_r.sample(rng);
        let s = self.sigma.sample(rng);
        (e, s)
    }
}
