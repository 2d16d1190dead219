//! Discretized 2-D TM Green's function kernels.

use faer::Mat;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::config::{wavenumber, PhysicsConfig, RoiGrid};
use super::layout::ViewLayout;
use super::scene::ScatteringCells;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::special::{hankel1_0, hankel1_1, j1};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Kernel prefactors for one frequency on one lattice.
#[derive(Clone, Copy, Debug)]
pub struct Kernels {
    pub frequency: f64,
    pub wavenumber: f64,
    pub radius: f64,
    /// `(j k pi a / 2) J1(k a)`: equal-area quadrature weight of a pixel.
    pub weight: Complex64,
    /// `(j k pi a / 2) H1(k a) - 1`: self-interaction of a pixel.
    pub self_term: Complex64,
    /// `j k eta * j / 4`: line-source prefactor of the incident field.
    pub source: Complex64,
}

impl Kernels {
    pub fn new(grid: &RoiGrid, f: f64, cfg: &PhysicsConfig) -> Result<Self> {
        let k = wavenumber(f, cfg)?;
        let a = grid.equivalent_radius();
        let ka = k * a;
        let pref = J * (k * PI * a / 2.0);
        Ok(Kernels {
            frequency: f,
            wavenumber: k,
            radius: a,
            weight: pref * j1(ka),
            self_term: pref * hankel1_1(ka) - 1.0,
            source: J * (k * cfg.impedance()) * (J * 0.25),
        })
    }

    /// Interaction between two distinct pixels (or a pixel and a receiver)
    /// separated by `dist`.
    pub fn interaction(&self, dist: f64) -> Complex64 {
        self.weight * hankel1_0(self.wavenumber * dist)
    }

    /// Incident field at distance `dist` from a unit line source.
    pub fn incident(&self, dist: f64) -> Complex64 {
        self.source * hankel1_0(self.wavenumber * dist)
    }
}

/// Interaction values indexed by lattice offset `(|dx|, |dy|)`.
///
/// Every pair of cells on the same lattice shares one of these values, so a
/// table of `(extent + 1)^2` Hankel evaluations covers any cell set.
#[derive(Clone, Debug)]
pub struct LatticeGreen {
    extent: usize,
    table: Vec<Complex64>,
    diagonal: Complex64,
}

impl LatticeGreen {
    pub fn new(kernels: &Kernels, spacing: f64, extent: usize) -> Self {
        let w = extent + 1;
        let mut table = vec![kernels.self_term; w * w];
        for dy in 0..w {
            for dx in dy..w {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let d = spacing * ((dx * dx + dy * dy) as f64).sqrt();
                let v = kernels.interaction(d);
                table[dy * w + dx] = v;
                table[dx * w + dy] = v;
            }
        }
        LatticeGreen {
            extent,
            table,
            diagonal: kernels.self_term,
        }
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn diagonal(&self) -> Complex64 {
        self.diagonal
    }

    pub fn entry(&self, dx: i64, dy: i64) -> Complex64 {
        let (dx, dy) = (dx.unsigned_abs() as usize, dy.unsigned_abs() as usize);
        assert!(dx <= self.extent && dy <= self.extent, "offset outside table");
        self.table[dy * (self.extent + 1) + dx]
    }

    /// Interaction matrix among `cells`.
    pub fn matrix(&self, cells: &ScatteringCells) -> Mat<Complex64> {
        let s = cells.len();
        Mat::from_fn(s, s, |i, j| self.entry(cells.ix[i] - cells.ix[j], cells.iy[i] - cells.iy[j]))
    }
}

/// Discretized Green's matrix over every RoI pixel at one frequency.
#[derive(Clone, Debug)]
pub struct GreenOperator {
    pub frequency: f64,
    pub wavenumber: f64,
    pub matrix: Mat<Complex64>,
}

/// Full `D x D` Green's matrix of the RoI grid at frequency `f`.
pub fn green_matrix(grid: &RoiGrid, f: f64, cfg: &PhysicsConfig) -> Result<GreenOperator> {
    let kern = Kernels::new(grid, f, cfg)?;
    let n = grid.resolution();
    let table = LatticeGreen::new(&kern, grid.pixel_side(), n - 1);
    let d = grid.num_pixels();
    let matrix = Mat::from_fn(d, d, |i, j| {
        let (ix, iy) = ((i % n) as i64, (i / n) as i64);
        let (jx, jy) = ((j % n) as i64, (j / n) as i64);
        table.entry(ix - jx, iy - jy)
    });
    Ok(GreenOperator {
        frequency: f,
        wavenumber: kern.wavenumber,
        matrix,
    })
}

fn check_outside(grid: &RoiGrid, p: Point2, what: &str) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::invalid(format!("{what} position is not finite")));
    }
    if grid.contains(p) {
        return Err(Error::invalid(format!(
            "{what} at ({}, {}) lies inside the RoI",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Incident field induced at every RoI pixel by a unit pilot from a UE at `p`.
pub fn incident_channel(
    grid: &RoiGrid,
    p: Point2,
    f: f64,
    cfg: &PhysicsConfig,
) -> Result<Vec<Complex64>> {
    check_outside(grid, p, "UE")?;
    let kern = Kernels::new(grid, f, cfg)?;
    Ok(grid
        .pixel_centers()
        .into_iter()
        .map(|r| kern.incident(r.distance(p)))
        .collect())
}

/// Pixel-to-antenna channel of base station `b`: `N_r x D`.
pub fn rx_channel(
    grid: &RoiGrid,
    layout: &ViewLayout,
    b: usize,
    f: f64,
    cfg: &PhysicsConfig,
) -> Result<Mat<Complex64>> {
    if b >= layout.num_bs() {
        return Err(Error::invalid(format!("BS index {b} out of range")));
    }
    let antennas = layout.antennas(b);
    for &a in antennas {
        check_outside(grid, a, "BS antenna")?;
    }
    let kern = Kernels::new(grid, f, cfg)?;
    let centers = grid.pixel_centers();
    Ok(receive_matrix(&kern, antennas, &centers))
}

/// `sources x points` incident-field matrix, transposed to `points x sources`.
pub(crate) fn incident_matrix(kern: &Kernels, points: &[Point2], sources: &[Point2]) -> Mat<Complex64> {
    Mat::from_fn(points.len(), sources.len(), |i, u| {
        kern.incident(points[i].distance(sources[u]))
    })
}

/// `receivers x points` re-radiation matrix.
pub(crate) fn receive_matrix(kern: &Kernels, receivers: &[Point2], points: &[Point2]) -> Mat<Complex64> {
    Mat::from_fn(receivers.len(), points.len(), |r, m| {
        kern.interaction(receivers[r].distance(points[m]))
    })
}
