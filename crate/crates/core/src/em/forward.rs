//! Method-of-moments forward model: total field, scattering operator and CSI.

use faer::Mat;
use num_complex::Complex64;

use super::config::{PhysicsConfig, RoiGrid};
use super::green::{incident_matrix, receive_matrix, GreenOperator, Kernels, LatticeGreen};
use super::layout::{ChannelSet, ViewChannel, ViewLayout};
use super::scene::{ScatteringCells, TargetScene};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::lu_solve;
use crate::par;

/// How the total field inside the scatterer is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScatteringModel {
    /// Solve the discretized Lippmann-Schwinger system.
    Full,
    /// First-order Born: total field replaced by the incident field.
    Born,
}

/// `X = diag(chi) [I - G diag(chi)]^{-1}` over the full RoI.
pub fn scattering_operator(g: &GreenOperator, chi: &[Complex64]) -> Result<Mat<Complex64>> {
    let d = g.matrix.nrows();
    if chi.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "contrast has {} entries, Green's matrix is {d}x{d}",
            chi.len()
        )));
    }
    let system = Mat::from_fn(d, d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - g.matrix[(i, j)] * chi[j]
    });
    let inv = lu_solve(system.as_ref(), Mat::<Complex64>::identity(d, d).as_ref())?;
    Ok(Mat::from_fn(d, d, |i, j| chi[i] * inv[(i, j)]))
}

/// Every UE and BS antenna must sit outside the RoI.
pub fn check_layout(grid: &RoiGrid, layout: &ViewLayout) -> Result<()> {
    for (u, p) in layout.ue_positions().iter().enumerate() {
        if grid.contains(*p) {
            return Err(Error::invalid(format!("UE {u} lies inside the RoI")));
        }
    }
    for b in 0..layout.num_bs() {
        if layout.antennas(b).iter().any(|p| grid.contains(*p)) {
            return Err(Error::invalid(format!("an antenna of BS {b} lies inside the RoI")));
        }
    }
    Ok(())
}

fn check_clearance(cells: &[Point2], points: &[Point2], clearance: f64) -> Result<()> {
    for p in points {
        if cells.iter().any(|c| c.distance(*p) < clearance) {
            return Err(Error::invalid(format!(
                "transceiver at ({}, {}) overlaps a scattering cell",
                p.x, p.y
            )));
        }
    }
    Ok(())
}

/// Total field in `cells` for each incident column.
pub(crate) fn total_field(
    kern: &Kernels,
    grid: &RoiGrid,
    cells: &ScatteringCells,
    chi: &[Complex64],
    incident: Mat<Complex64>,
    model: ScatteringModel,
) -> Result<Mat<Complex64>> {
    match model {
        ScatteringModel::Born => Ok(incident),
        ScatteringModel::Full => {
            let g = LatticeGreen::new(kern, grid.pixel_side(), cells.max_offset()).matrix(cells);
            let s = cells.len();
            let system = Mat::from_fn(s, s, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                Complex64::new(delta, 0.0) - g[(i, j)] * chi[j]
            });
            lu_solve(system.as_ref(), incident.as_ref())
        }
    }
}

/// Multi-view response at one frequency: a `(B N_r) x U` matrix whose row
/// `b N_r + r` holds antenna `r` of BS `b` and column `u` holds UE `u`.
pub fn multi_view_response(
    scene: &TargetScene,
    layout: &ViewLayout,
    f: f64,
    cfg: &PhysicsConfig,
    model: ScatteringModel,
) -> Result<Mat<Complex64>> {
    let grid = scene.grid();
    check_layout(grid, layout)?;
    let rows = layout.num_bs() * layout.num_rx();
    let cells = scene.cells();
    let kern = Kernels::new(grid, f, cfg)?;
    if cells.is_empty() {
        return Ok(Mat::zeros(rows, layout.num_ue()));
    }
    let centers = cells.centers(grid);
    let antennas: Vec<Point2> = (0..layout.num_bs())
        .flat_map(|b| layout.antennas(b).iter().copied())
        .collect();
    let clearance = 0.5 * grid.pixel_side();
    check_clearance(&centers, layout.ue_positions(), clearance)?;
    check_clearance(&centers, &antennas, clearance)?;

    let chi = cells.contrast(f, cfg);
    let incident = incident_matrix(&kern, &centers, layout.ue_positions());
    let mut field = total_field(&kern, grid, &cells, &chi, incident, model)?;
    for u in 0..field.ncols() {
        for (i, c) in chi.iter().enumerate() {
            field[(i, u)] *= c;
        }
    }
    let rx = receive_matrix(&kern, &antennas, &centers);
    Ok(&rx * &field)
}

/// Simulate every view at every subcarrier.
pub fn simulate_channels(
    scene: &TargetScene,
    layout: &ViewLayout,
    cfg: &PhysicsConfig,
    model: ScatteringModel,
) -> Result<ChannelSet> {
    cfg.validate()?;
    let freqs = cfg.subcarrier_frequencies();
    let responses = par::try_map_range(freqs.len(), |n| {
        multi_view_response(scene, layout, freqs[n], cfg, model)
    })?;
    let (nb, nu, nr, nc) = (layout.num_bs(), layout.num_ue(), layout.num_rx(), freqs.len());
    let entries = (0..nb * nu)
        .map(|i| {
            let (b, u) = (i / nu, i % nu);
            ViewChannel {
                bs: b,
                ue: u,
                bs_position: layout.bs_positions()[b],
                ue_position: layout.ue_positions()[u],
                csi: Mat::from_fn(nr, nc, |r, n| responses[n][(b * nr + r, u)]),
            }
        })
        .collect();
    ChannelSet::new(nb, nu, nr, nc, entries)
}

/// Exact multi-view CSI of `scene` for every (BS, UE) pair.
pub fn multi_view_channels(
    scene: &TargetScene,
    layout: &ViewLayout,
    cfg: &PhysicsConfig,
) -> Result<ChannelSet> {
    simulate_channels(scene, layout, cfg, ScatteringModel::Full)
}

/// CSI of the single view `(b, u)`: `N_r x N_c`.
pub fn single_view_channel(
    scene: &TargetScene,
    layout: &ViewLayout,
    b: usize,
    u: usize,
    cfg: &PhysicsConfig,
) -> Result<Mat<Complex64>> {
    let view = layout.select(&[b], &[u])?;
    let set = multi_view_channels(scene, &view, cfg)?;
    Ok(set.entries()[0].csi.clone())
}
