use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Range;
use crate::em::{PhysicsConfig, ViewLayout};
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Distances and counts for random transceiver placement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutRanges {
    /// BS distance from the origin in metres.
    pub bs_radius: Range,
    /// UE distance from the origin in metres.
    pub ue_radius: Range,
    pub num_rx: usize,
    pub max_bs: usize,
    pub max_ue: usize,
}

impl Default for LayoutRanges {
    fn default() -> Self {
        LayoutRanges {
            bs_radius: Range::new(80.0, 100.0),
            ue_radius: Range::new(4.0, 10.0),
            num_rx: 4,
            max_bs: 16,
            max_ue: 32,
        }
    }
}

impl LayoutRanges {
    pub fn validate(&self) -> Result<()> {
        self.bs_radius.validate("BS radius")?;
        self.ue_radius.validate("UE radius")?;
        if self.bs_radius.min <= 0.0 || self.ue_radius.min <= 0.0 {
            return Err(Error::invalid("transceiver radii must be positive"));
        }
        if self.num_rx == 0 || self.max_bs == 0 || self.max_ue == 0 {
            return Err(Error::invalid("antenna and view counts must be positive"));
        }
        Ok(())
    }
}

/// Random layout: radii uniform in the configured ranges, angles uniform in
/// `[0, 2 pi)`, half-wavelength ULAs facing the origin.
pub fn sample_view_layout<R: Rng + ?Sized>(
    rng: &mut R,
    num_bs: usize,
    num_ue: usize,
    ranges: &LayoutRanges,
    cfg: &PhysicsConfig,
) -> Result<ViewLayout> {
    ranges.validate()?;
    if !(1..=ranges.max_bs).contains(&num_bs) || !(1..=ranges.max_ue).contains(&num_ue) {
        return Err(Error::invalid(format!(
            "view counts ({num_bs}, {num_ue}) outside 1..={} x 1..={}",
            ranges.max_bs, ranges.max_ue
        )));
    }
    let mut draw = |radius: &Range| {
        let r = radius.sample(rng);
        Point2::from_polar(r, rng.random_range(0.0..2.0 * PI))
    };
    let bs: Vec<Point2> = (0..num_bs).map(|_| draw(&ranges.bs_radius)).collect();
    let ue: Vec<Point2> = (0..num_ue).map(|_| draw(&ranges.ue_radius)).collect();
    ViewLayout::ula(bs, ue, ranges.num_rx, 0.5 * cfg.wavelength())
}
