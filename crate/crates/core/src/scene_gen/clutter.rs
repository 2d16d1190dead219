use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MaterialRanges, Range};
use crate::em::ClutterScatterer;
use crate::error::Result;
use crate::geometry::Point2;

/// Placement of circular clutter scatterers around the RoI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterConfig {
    pub diameter: f64,
    /// Range of `|x|` and of `|y|` for scatterer centres, in metres.
    pub band: Range,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        ClutterConfig {
            diameter: 0.05,
            band: Range::new(0.5, 1.0),
        }
    }
}

/// `count` scatterers with both `|x|` and `|y|` uniform in the band and random
/// quadrant signs.
pub fn gen_clutter<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    config: &ClutterConfig,
    material: &MaterialRanges,
) -> Result<Vec<ClutterScatterer>> {
    config.band.validate("clutter band")?;
    material.validate()?;
    let coord = |rng: &mut R| {
        let v = config.band.sample(rng);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    };
    Ok((0..count)
        .map(|_| {
            let x = coord(rng);
            let y = coord(rng);
            let (eps_r, sigma) = material.sample(rng);
            ClutterScatterer {
                center: Point2::new(x, y),
                diameter: config.diameter,
                eps_r,
                sigma,
            }
        })
        .collect())
}
