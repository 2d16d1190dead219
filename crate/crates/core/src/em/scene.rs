use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{PhysicsConfig, RoiGrid};
use crate::error::{Error, Result};
use crate::geometry::Point2;

/// A circular scatterer placed outside the RoI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClutterScatterer {
    pub center: Point2,
    pub diameter: f64,
    pub eps_r: f64,
    pub sigma: f64,
}

/// Per-pixel relative permittivity and conductivity over the RoI, plus any
/// clutter scatterers in the surrounding region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScene {
    grid: RoiGrid,
    eps_r: Vec<f64>,
    sigma: Vec<f64>,
    clutter: Vec<ClutterScatterer>,
}

impl TargetScene {
    /// Free space everywhere.
    pub fn background(grid: RoiGrid) -> Self {
        let d = grid.num_pixels();
        TargetScene {
            grid,
            eps_r: vec![1.0; d],
            sigma: vec![0.0; d],
            clutter: Vec::new(),
        }
    }

    pub fn new(grid: RoiGrid, eps_r: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let d = grid.num_pixels();
        if eps_r.len() != d || sigma.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "scene images have {} / {} entries, grid has {d} pixels",
                eps_r.len(),
                sigma.len()
            )));
        }
        check_material(&eps_r, &sigma)?;
        Ok(TargetScene {
            grid,
            eps_r,
            sigma,
            clutter: Vec::new(),
        })
    }

    pub fn with_clutter(mut self, clutter: Vec<ClutterScatterer>) -> Result<Self> {
        for c in &clutter {
            check_material(&[c.eps_r], &[c.sigma])?;
            if !(c.diameter > 0.0 && c.center.is_finite()) {
                return Err(Error::invalid("clutter scatterer needs a positive diameter"));
            }
        }
        self.clutter = clutter;
        Ok(self)
    }

    pub fn grid(&self) -> &RoiGrid {
        &self.grid
    }

    pub fn eps_r(&self) -> &[f64] {
        &self.eps_r
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn clutter(&self) -> &[ClutterScatterer] {
        &self.clutter
    }

    /// RoI-only copy with the clutter removed.
    pub fn without_clutter(&self) -> Self {
        TargetScene {
            clutter: Vec::new(),
            ..self.clone()
        }
    }

    pub fn is_foreground(&self, m: usize) -> bool {
        self.eps_r[m] != 1.0 || self.sigma[m] != 0.0
    }

    pub fn foreground_mask(&self) -> Vec<bool> {
        (0..self.eps_r.len()).map(|m| self.is_foreground(m)).collect()
    }

    pub fn foreground_count(&self) -> usize {
        (0..self.eps_r.len()).filter(|&m| self.is_foreground(m)).count()
    }

    /// True when neither the RoI nor the clutter region scatters.
    pub fn is_empty(&self) -> bool {
        self.foreground_count() == 0 && self.clutter.is_empty()
    }

    /// Every lattice cell with non-vacuum material, RoI pixels first, then the
    /// clutter cells whose centres fall inside a clutter disk.
    pub fn cells(&self) -> ScatteringCells {
        let mut cells = ScatteringCells::default();
        let n = self.grid.resolution();
        for m in (0..self.eps_r.len()).filter(|&m| self.is_foreground(m)) {
            cells.push((m % n) as i64, (m / n) as i64, self.eps_r[m], self.sigma[m]);
        }
        let mut seen = std::collections::HashSet::new();
        let s = self.grid.pixel_side();
        for c in &self.clutter {
            let r = 0.5 * c.diameter;
            let (cx, cy) = self.grid.lattice_index(c.center);
            let reach = (r / s).ceil() as i64 + 1;
            let mut any = false;
            for iy in cy - reach..=cy + reach {
                for ix in cx - reach..=cx + reach {
                    let p = self.grid.lattice_center(ix, iy);
                    if p.distance(c.center) <= r
                        && self.grid.pixel_index(ix, iy).is_none()
                        && seen.insert((ix, iy))
                    {
                        cells.push(ix, iy, c.eps_r, c.sigma);
                        any = true;
                    }
                }
            }
            // A disk smaller than the lattice pitch still occupies its own cell.
            if !any && self.grid.pixel_index(cx, cy).is_none() && seen.insert((cx, cy)) {
                cells.push(cx, cy, c.eps_r, c.sigma);
            }
        }
        cells
    }
}

fn check_material(eps_r: &[f64], sigma: &[f64]) -> Result<()> {
    if let Some(e) = eps_r.iter().find(|e| !(e.is_finite() && **e >= 1.0)) {
        return Err(Error::invalid(format!("relative permittivity must be >= 1, got {e}")));
    }
    if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::invalid(format!("conductivity must be >= 0, got {s}")));
    }
    Ok(())
}

/// Material cells on the (possibly extended) RoI lattice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScatteringCells {
    pub ix: Vec<i64>,
    pub iy: Vec<i64>,
    pub eps_r: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ScatteringCells {
    fn push(&mut self, ix: i64, iy: i64, eps_r: f64, sigma: f64) {
        self.ix.push(ix);
        self.iy.push(iy);
        self.eps_r.push(eps_r);
        self.sigma.push(sigma);
    }

    pub fn len(&self) -> usize {
        self.ix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ix.is_empty()
    }

    pub fn centers(&self, grid: &RoiGrid) -> Vec<Point2> {
        self.ix
            .iter()
            .zip(&self.iy)
            .map(|(&ix, &iy)| grid.lattice_center(ix, iy))
            .collect()
    }

    pub fn contrast(&self, f: f64, cfg: &PhysicsConfig) -> Vec<Complex64> {
        let scale = cfg.conductivity_scale(f);
        self.eps_r
            .iter()
            .zip(&self.sigma)
            .map(|(&e, &s)| Complex64::new(e - 1.0, s * scale))
            .collect()
    }

    /// Largest lattice offset along either axis between two cells.
    pub fn max_offset(&self) -> usize {
        let span = |v: &[i64]| match (v.iter().min(), v.iter().max()) {
            (Some(lo), Some(hi)) => (hi - lo) as usize,
            _ => 0,
        };
        span(&self.ix).max(span(&self.iy))
    }
}

/// Pixel contrast `(eps_r - 1) + j sigma / (2 pi f eps0)` over the RoI.
pub fn contrast(scene: &TargetScene, f: f64, cfg: &PhysicsConfig) -> Vec<Complex64> {
    let scale = cfg.conductivity_scale(f);
    scene
        .eps_r
        .iter()
        .zip(&scene.sigma)
        .map(|(&e, &s)| Complex64::new(e - 1.0, s * scale))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RoiGrid {
        RoiGrid::new(0.5, 8).unwrap()
    }

    #[test]
    fn contrast_values() {
        let cfg = PhysicsConfig::default();
        let mut eps = vec![1.0; 64];
        let mut sigma = vec![0.0; 64];
        eps[5] = 1.5;
        sigma[5] = 0.05;
        let scene = TargetScene::new(grid(), eps, sigma).unwrap();
        let chi = contrast(&scene, 3.0e9, &cfg);
        assert_eq!(chi[0], Complex64::new(0.0, 0.0));
        assert!((chi[5].re - 0.5).abs() < 1e-15);
        assert!((chi[5].im - 0.2996).abs() < 1e-4, "{}", chi[5].im);
        let chi2 = contrast(&scene, 6.0e9, &cfg);
        assert!((chi2[5].im - 0.5 * chi[5].im).abs() < 1e-15);
    }

    #[test]
    fn material_validation() {
        assert!(TargetScene::new(grid(), vec![0.9; 64], vec![0.0; 64]).is_err());
        assert!(TargetScene::new(grid(), vec![1.0; 64], vec![-0.1; 64]).is_err());
        assert!(TargetScene::new(grid(), vec![1.0; 63], vec![0.0; 64]).is_err());
        let bg = TargetScene::background(grid());
        assert!(bg.is_empty());
        assert!(bg.cells().is_empty());
    }

    #[test]
    fn clutter_cells_lie_outside_roi() {
        let g = RoiGrid::new(0.5, 32).unwrap();
        let scene = TargetScene::background(g.clone())
            .with_clutter(vec![ClutterScatterer {
                center: Point2::new(0.7, -0.8),
                diameter: 0.05,
                eps_r: 2.0,
                sigma: 0.01,
            }])
            .unwrap();
        let cells = scene.cells();
        assert!(!cells.is_empty());
        for c in cells.centers(&g) {
            assert!(!g.contains(c));
            assert!(c.distance(Point2::new(0.7, -0.8)) <= 0.025);
        }
        assert!(!scene.is_empty());
    }
}
