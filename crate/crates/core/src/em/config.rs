use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Carrier, OFDM numerology and vacuum constants.
///
/// The free-space impedance is always derived from the stored permittivity and
/// permeability; it is never a field of its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Carrier frequency `f_c` in Hz.
    pub center_frequency: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
    pub num_subcarriers: usize,
    /// Vacuum permittivity in F/m.
    pub vacuum_permittivity: f64,
    /// Vacuum permeability in H/m.
    pub vacuum_permeability: f64,
    /// Speed of light in m/s.
    pub speed_of_light: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            center_frequency: 3.0e9,
            subcarrier_spacing: 100.0e3,
            num_subcarriers: 8,
            vacuum_permittivity: 8.854_187_812_8e-12,
            vacuum_permeability: 1.256_637_062_12e-6,
            speed_of_light: 299_792_458.0,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers == 0 {
            return Err(Error::invalid("num_subcarriers must be at least 1"));
        }
        let positive = [
            ("center_frequency", self.center_frequency),
            ("subcarrier_spacing", self.subcarrier_spacing),
            ("vacuum_permittivity", self.vacuum_permittivity),
            ("vacuum_permeability", self.vacuum_permeability),
            ("speed_of_light", self.speed_of_light),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.subcarrier_frequency(0) <= 0.0 {
            return Err(Error::invalid("lowest subcarrier frequency is not positive"));
        }
        Ok(())
    }

    /// Characteristic impedance of free space, `sqrt(mu0 / eps0)`.
    pub fn impedance(&self) -> f64 {
        (self.vacuum_permeability / self.vacuum_permittivity).sqrt()
    }

    /// Carrier wavelength.
    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.center_frequency
    }

    /// Frequency of subcarrier `n`; the comb is centred on the carrier.
    pub fn subcarrier_frequency(&self, n: usize) -> f64 {
        let offset = n as f64 - (self.num_subcarriers as f64 - 1.0) / 2.0;
        self.center_frequency + offset * self.subcarrier_spacing
    }

    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        (0..self.num_subcarriers)
            .map(|n| self.subcarrier_frequency(n))
            .collect()
    }

    /// Signal bandwidth `N_c * delta_f`.
    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Conversion factor from conductivity to the imaginary contrast at `f`.
    pub fn conductivity_scale(&self, f: f64) -> f64 {
        1.0 / (2.0 * PI * f * self.vacuum_permittivity)
    }
}

/// Wavenumber `2 pi f / c` in rad/m.
pub fn wavenumber(f: f64, cfg: &PhysicsConfig) -> Result<f64> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::invalid(format!("frequency must be positive, got {f}")));
    }
    Ok(2.0 * PI * f / cfg.speed_of_light)
}

/// Square region of interest centred at the origin, split into
/// `resolution x resolution` square pixels.
///
/// Pixel `m = iy * resolution + ix` has its centre at
/// `((ix + 0.5) s - L/2, (iy + 0.5) s - L/2)`. The same lattice extends past the
/// RoI boundary for clutter cells, addressed with out-of-range indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiGrid {
    side_length: f64,
    resolution: usize,
}

impl RoiGrid {
    pub fn new(side_length: f64, resolution: usize) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        if resolution == 0 {
            return Err(Error::InvalidGrid("resolution must be at least 1".into()));
        }
        let grid = RoiGrid {
            side_length,
            resolution,
        };
        if !(grid.pixel_side() > 0.0) || grid.pixel_side() * 0.5 == grid.pixel_side() {
            return Err(Error::InvalidGrid("pixel centres coincide".into()));
        }
        Ok(grid)
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of pixels `D`.
    pub fn num_pixels(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn pixel_side(&self) -> f64 {
        self.side_length / self.resolution as f64
    }

    /// Radius of the circle with the same area as one pixel.
    pub fn equivalent_radius(&self) -> f64 {
        self.pixel_side() / PI.sqrt()
    }

    /// Centre of the lattice cell `(ix, iy)`, which may lie outside the RoI.
    pub fn lattice_center(&self, ix: i64, iy: i64) -> Point2 {
        let s = self.pixel_side();
        let h = 0.5 * self.side_length;
        Point2::new((ix as f64 + 0.5) * s - h, (iy as f64 + 0.5) * s - h)
    }

    /// Lattice cell containing `p`.
    pub fn lattice_index(&self, p: Point2) -> (i64, i64) {
        let s = self.pixel_side();
        let h = 0.5 * self.side_length;
        (((p.x + h) / s).floor() as i64, ((p.y + h) / s).floor() as i64)
    }

    pub fn pixel_center(&self, m: usize) -> Point2 {
        let (ix, iy) = (m % self.resolution, m / self.resolution);
        self.lattice_center(ix as i64, iy as i64)
    }

    pub fn pixel_centers(&self) -> Vec<Point2> {
        (0..self.num_pixels()).map(|m| self.pixel_center(m)).collect()
    }

    /// Whether `p` lies in the closed RoI square.
    pub fn contains(&self, p: Point2) -> bool {
        let h = 0.5 * self.side_length;
        p.x.abs() <= h && p.y.abs() <= h
    }

    /// Pixel index of the lattice cell if it belongs to the RoI.
    pub fn pixel_index(&self, ix: i64, iy: i64) -> Option<usize> {
        let n = self.resolution as i64;
        ((0..n).contains(&ix) && (0..n).contains(&iy)).then(|| (iy * n + ix) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_at_carrier() {
        let cfg = PhysicsConfig::default();
        let k = wavenumber(3.0e9, &cfg).unwrap();
        // 2 pi 3e9 / 299792458
        assert!((k - 62.875_350_66).abs() < 1e-7, "{k}");
        assert_eq!(wavenumber(6.0e9, &cfg).unwrap(), 2.0 * k);
        assert!(wavenumber(0.0, &cfg).is_err());
        assert!(wavenumber(-1.0, &cfg).is_err());
    }

    #[test]
    fn impedance_is_derived() {
        let mut cfg = PhysicsConfig::default();
        let eta = cfg.impedance();
        assert!((eta - 376.730_313).abs() < 1e-5, "{eta}");
        cfg.vacuum_permeability *= 4.0;
        assert!((cfg.impedance() - 2.0 * eta).abs() < 1e-9);
    }

    #[test]
    fn subcarrier_comb_is_centered() {
        let cfg = PhysicsConfig::default();
        let f = cfg.subcarrier_frequencies();
        assert_eq!(f.len(), 8);
        assert!((f[0] - (3.0e9 - 350e3)).abs() < 1e-3);
        assert!((f[7] - (3.0e9 + 350e3)).abs() < 1e-3);
        assert!(((f[3] + f[4]) / 2.0 - 3.0e9).abs() < 1e-3);
        assert_eq!(cfg.bandwidth(), 800e3);
    }

    #[test]
    fn grid_geometry() {
        let grid = RoiGrid::new(0.5, 64).unwrap();
        assert_eq!(grid.pixel_side(), 0.0078125);
        assert!((grid.equivalent_radius() - 0.004_407_7).abs() < 1e-7);
        let a = grid.equivalent_radius();
        assert!((PI * a * a - grid.pixel_side().powi(2)).abs() < 1e-18);
        for c in grid.pixel_centers() {
            assert!(grid.contains(c));
        }
        let c0 = grid.pixel_center(0);
        assert!((c0.x + 0.25 - 0.00390625).abs() < 1e-15);
        assert_eq!(grid.lattice_index(c0), (0, 0));
        assert_eq!(grid.pixel_index(3, 2), Some(2 * 64 + 3));
        assert_eq!(grid.pixel_index(-1, 2), None);
        assert!(RoiGrid::new(0.5, 0).is_err());
        assert!(RoiGrid::new(-1.0, 4).is_err());
    }
}
