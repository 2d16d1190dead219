//! Linearized measurement operators for Born-type inversion.
//!
//! At subcarrier `n` the response of contrast `chi` is
//! `H = Q diag(chi) E`, with `Q` the pixel-to-antenna kernel (`B N_r x D`) and
//! `E = (I - G diag chi)^-1 Inc` the total field (`D x U`). Holding `E` fixed
//! makes the response linear in `chi`: `vec H = C chi` where row
//! `u B N_r + b N_r + r` of `C` is `P[u, :] * Q[b N_r + r, :]` and `P = E^T`.
//!
//! The unknown is real: `x = [eps_r - 1; sigma / (2 pi f_c eps0)]`, so
//! `chi_n = x_1 + j (f_c / f_n) x_2`.

use faer::Mat;
use num_complex::Complex64;

use crate::em::forward::check_layout;
use crate::em::green::{incident_matrix, receive_matrix};
use crate::em::{ChannelSet, Kernels, LatticeGreen, PhysicsConfig, RoiGrid, ViewLayout};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::linalg::lu_solve;
use crate::par;

/// Real unknown vector of a scene: `[eps_r - 1; sigma / (2 pi f_c eps0)]`.
pub fn scene_unknowns(eps_r: &[f64], sigma: &[f64], cfg: &PhysicsConfig) -> Vec<f64> {
    let scale = cfg.conductivity_scale(cfg.center_frequency);
    eps_r.iter().map(|e| e - 1.0).chain(sigma.iter().map(|s| s * scale)).collect()
}

/// Complex contrast at a subcarrier whose ratio `f_c / f_n` is `ratio`.
pub fn unknowns_to_contrast(x: &[f64], ratio: f64) -> Vec<Complex64> {
    let d = x.len() / 2;
    (0..d).map(|m| Complex64::new(x[m], ratio * x[d + m])).collect()
}

/// Fixed per-subcarrier kernels on the whole RoI lattice.
#[derive(Clone, Debug)]
struct Subcarrier {
    ratio: f64,
    lattice: LatticeGreen,
    /// `Inc`: `D x U`.
    incident: Mat<Complex64>,
    /// `Q`: `B N_r x D`.
    receive: Mat<Complex64>,
}

fn subcarrier(grid: &RoiGrid, layout: &ViewLayout, f: f64, cfg: &PhysicsConfig) -> Result<Subcarrier> {
    let kern = Kernels::new(grid, f, cfg)?;
    let pixels = grid.pixel_centers();
    let antennas: Vec<Point2> = (0..layout.num_bs())
        .flat_map(|b| layout.antennas(b).iter().copied())
        .collect();
    Ok(Subcarrier {
        ratio: cfg.center_frequency / f,
        lattice: LatticeGreen::new(&kern, grid.pixel_side(), grid.resolution() - 1),
        incident: incident_matrix(&kern, &pixels, layout.ue_positions()),
        receive: receive_matrix(&kern, &antennas, &pixels),
    })
}

impl Subcarrier {
    /// Total field `D x U` for contrast `chi`, solving only on its support.
    fn total_field(&self, grid: &RoiGrid, chi: Option<&[Complex64]>) -> Result<Mat<Complex64>> {
        let Some(chi) = chi else {
            return Ok(self.incident.clone());
        };
        let support: Vec<usize> = (0..chi.len()).filter(|&m| chi[m] != Complex64::ZERO).collect();
        if support.is_empty() {
            return Ok(self.incident.clone());
        }
        let n = grid.resolution() as i64;
        let at = |m: usize| ((m as i64) % n, (m as i64) / n);
        let green = |i: usize, j: usize| {
            let ((xi, yi), (xj, yj)) = (at(i), at(j));
            self.lattice.entry(xi - xj, yi - yj)
        };
        let s = support.len();
        let system = Mat::from_fn(s, s, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            Complex64::new(delta, 0.0) - green(support[i], support[j]) * chi[support[j]]
        });
        let rhs = Mat::from_fn(s, self.incident.ncols(), |i, u| self.incident[(support[i], u)]);
        let inner = lu_solve(system.as_ref(), rhs.as_ref())?;
        let sources = Mat::from_fn(s, inner.ncols(), |i, u| chi[support[i]] * inner[(i, u)]);
        let coupling = Mat::from_fn(chi.len(), s, |m, j| green(m, support[j]));
        Ok(&self.incident + &coupling * &sources)
    }

    /// Predicted response `Q diag(chi) E`: `B N_r x U`.
    fn response(&self, chi: &[Complex64], field: &Mat<Complex64>) -> Mat<Complex64> {
        let scaled = Mat::from_fn(field.nrows(), field.ncols(), |m, u| chi[m] * field[(m, u)]);
        &self.receive * &scaled
    }
}

/// Explicit `C` (`U B N_r x D`) at frequency `f`, linearized about `chi`
/// (the Born form when `chi` is `None`).
pub fn assemble_c(
    chi: Option<&[Complex64]>,
    layout: &ViewLayout,
    grid: &RoiGrid,
    f: f64,
    cfg: &PhysicsConfig,
) -> Result<Mat<Complex64>> {
    check_layout(grid, layout)?;
    if chi.is_some_and(|c| c.len() != grid.num_pixels()) {
        return Err(Error::ShapeMismatch("contrast length differs from pixel count".into()));
    }
    let sc = subcarrier(grid, layout, f, cfg)?;
    let field = sc.total_field(grid, chi)?;
    let rows = sc.receive.nrows();
    Ok(Mat::from_fn(layout.num_ue() * rows, grid.num_pixels(), |i, d| {
        field[(d, i / rows)] * sc.receive[(i % rows, d)]
    }))
}

/// Column-major `vec` of the `B N_r x U` response at subcarrier `n`.
fn response_vec(channels: &ChannelSet, n: usize) -> Vec<Complex64> {
    let (nb, nu, nr) = (channels.num_bs(), channels.num_ue(), channels.num_rx());
    let mut v = Vec::with_capacity(nb * nu * nr);
    for u in 0..nu {
        for b in 0..nb {
            let csi = &channels.entry(b, u).csi;
            v.extend((0..nr).map(|r| csi[(r, n)]));
        }
    }
    v
}

fn response_matrix(channels: &ChannelSet, n: usize) -> Mat<Complex64> {
    let nr = channels.num_rx();
    Mat::from_fn(channels.num_bs() * nr, channels.num_ue(), |i, u| {
        channels.entry(i / nr, u).csi[(i % nr, n)]
    })
}

/// Real least-squares system stacked over subcarriers.
#[derive(Clone, Debug)]
pub struct RealStackedSystem {
    /// `2 B U N_r N_c x 2 D`.
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
    /// `f_c / f_n` per subcarrier.
    pub ratios: Vec<f64>,
}

/// Stack `[[Re C, -r Im C], [Im C, r Re C]]` and `[Re vec H; Im vec H]` over
/// subcarriers, with `r = f_c / f_n`.
pub fn real_stack(cs: &[Mat<Complex64>], channels: &ChannelSet, cfg: &PhysicsConfig) -> Result<RealStackedSystem> {
    if cs.len() != channels.num_subcarriers() || cs.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} operator blocks for {} subcarriers",
            cs.len(),
            channels.num_subcarriers()
        )));
    }
    let rows = channels.num_bs() * channels.num_ue() * channels.num_rx();
    let d = cs[0].ncols();
    if cs.iter().any(|c| c.nrows() != rows || c.ncols() != d) {
        return Err(Error::ShapeMismatch(format!("operator blocks must be {rows}x{d}")));
    }
    let ratios: Vec<f64> = cfg
        .subcarrier_frequencies()
        .iter()
        .map(|f| cfg.center_frequency / f)
        .collect();
    if ratios.len() != cs.len() {
        return Err(Error::ShapeMismatch("channel subcarrier count differs from the physics config".into()));
    }
    let mut matrix = Mat::zeros(2 * rows * cs.len(), 2 * d);
    let mut rhs = Vec::with_capacity(2 * rows * cs.len());
    for (n, c) in cs.iter().enumerate() {
        let (r, top) = (ratios[n], 2 * rows * n);
        for i in 0..rows {
            for m in 0..d {
                let v = c[(i, m)];
                matrix[(top + i, m)] = v.re;
                matrix[(top + i, d + m)] = -r * v.im;
                matrix[(top + rows + i, m)] = v.im;
                matrix[(top + rows + i, d + m)] = r * v.re;
            }
        }
        let h = response_vec(channels, n);
        rhs.extend(h.iter().map(|v| v.re));
        rhs.extend(h.iter().map(|v| v.im));
    }
    Ok(RealStackedSystem { matrix, rhs, ratios })
}

/// Normal-equation data of `min 1/2 ||h - A x||^2`: `A^T A`, `A^T h`, `||h||^2`.
#[derive(Clone, Debug)]
pub struct NormalSystem {
    pub gram: Mat<f64>,
    pub rhs: Vec<f64>,
    pub data_norm_sq: f64,
}

impl NormalSystem {
    pub fn num_unknowns(&self) -> usize {
        self.rhs.len()
    }

    /// `A^T A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        let g = &self.gram * &v;
        (0..x.len()).map(|i| g[(i, 0)]).collect()
    }

    /// `||h - A x||^2` from the normal equations.
    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        let gx = self.apply(x);
        let quad: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
        (self.data_norm_sq - 2.0 * lin + quad).max(0.0)
    }
}

impl RealStackedSystem {
    pub fn normal_system(&self) -> NormalSystem {
        let gram = self.matrix.transpose() * &self.matrix;
        let h = Mat::from_fn(self.rhs.len(), 1, |i, _| self.rhs[i]);
        let at_h = self.matrix.transpose() * &h;
        NormalSystem {
            gram,
            rhs: (0..at_h.nrows()).map(|i| at_h[(i, 0)]).collect(),
            data_norm_sq: self.rhs.iter().map(|v| v * v).sum(),
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = Mat::from_fn(x.len(), 1, |i, _| x[i]);
        let ax = &self.matrix * &v;
        (0..ax.nrows()).map(|i| ax[(i, 0)]).collect()
    }
}

/// A linearization of the measurement model about one contrast estimate.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub system: NormalSystem,
    /// `||h - F(x)||` of the full nonlinear model at the expansion point
    /// (`||h||` for the Born form).
    pub data_residual: f64,
}

/// Measured channels together with the fixed kernels of every subcarrier.
///
/// The normal equations are formed without the explicit `C`:
/// `C^H C = (P^H P) o (Q^H Q)` and `(C^H vec H)[d] = sum_u conj(P[u, d]) (Q^H H)[d, u]`.
#[derive(Clone, Debug)]
pub struct InversionOperators {
    grid: RoiGrid,
    subcarriers: Vec<Subcarrier>,
    responses: Vec<Mat<Complex64>>,
    data_norm_sq: f64,
}

impl InversionOperators {
    pub fn new(channels: &ChannelSet, grid: &RoiGrid, layout: &ViewLayout, cfg: &PhysicsConfig) -> Result<Self> {
        cfg.validate()?;
        check_layout(grid, layout)?;
        if channels.num_bs() != layout.num_bs()
            || channels.num_ue() != layout.num_ue()
            || channels.num_rx() != layout.num_rx()
            || channels.num_subcarriers() != cfg.num_subcarriers
        {
            return Err(Error::ShapeMismatch(format!(
                "channels ({}, {}, {}, {}) do not match layout ({}, {}, {}) and {} subcarriers",
                channels.num_bs(),
                channels.num_ue(),
                channels.num_rx(),
                channels.num_subcarriers(),
                layout.num_bs(),
                layout.num_ue(),
                layout.num_rx(),
                cfg.num_subcarriers
            )));
        }
        let freqs = cfg.subcarrier_frequencies();
        let subcarriers = par::try_map_range(freqs.len(), |n| subcarrier(grid, layout, freqs[n], cfg))?;
        let responses: Vec<_> = (0..freqs.len()).map(|n| response_matrix(channels, n)).collect();
        let data_norm_sq = responses.iter().map(|h| h.norm_l2().powi(2)).sum();
        Ok(InversionOperators {
            grid: grid.clone(),
            subcarriers,
            responses,
            data_norm_sq,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.grid.num_pixels()
    }

    pub fn data_norm(&self) -> f64 {
        self.data_norm_sq.sqrt()
    }

    fn check_unknowns(&self, x: &[f64]) -> Result<()> {
        if x.len() != 2 * self.num_pixels() {
            return Err(Error::ShapeMismatch(format!(
                "{} unknowns for {} pixels",
                x.len(),
                self.num_pixels()
            )));
        }
        Ok(())
    }

    /// `||h - F(x)||` of the full scattering model.
    pub fn data_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_unknowns(x)?;
        let parts = par::try_map_range(self.subcarriers.len(), |n| {
            let sc = &self.subcarriers[n];
            let chi = unknowns_to_contrast(x, sc.ratio);
            let field = sc.total_field(&self.grid, Some(&chi))?;
            Ok::<_, Error>((&self.responses[n] - sc.response(&chi, &field)).norm_l2().powi(2))
        })?;
        Ok(parts.iter().sum::<f64>().sqrt())
    }

    /// Normal equations of the model linearized about `x` (Born form when
    /// `x` is `None`).
    pub fn linearize(&self, x: Option<&[f64]>) -> Result<Linearization> {
        if let Some(x) = x {
            self.check_unknowns(x)?;
        }
        let d = self.num_pixels();
        let mut gram = Mat::<f64>::zeros(2 * d, 2 * d);
        let mut rhs = vec![0.0; 2 * d];
        let mut misfit = 0.0;
        let chunk = par::num_threads().max(1);
        let mut start = 0;
        // Each block holds a D x D complex matrix, so only a pool's worth is
        // alive at once.
        while start < self.subcarriers.len() {
            let len = chunk.min(self.subcarriers.len() - start);
            let blocks = par::try_map_range(len, |i| self.block(start + i, x))?;
            for (k, cv, res, ratio) in blocks {
                accumulate(&mut gram, &mut rhs, &k, &cv, ratio);
                misfit += res;
            }
            start += len;
        }
        let data_residual = if x.is_some() { misfit.sqrt() } else { self.data_norm() };
        Ok(Linearization {
            system: NormalSystem {
                gram,
                rhs,
                data_norm_sq: self.data_norm_sq,
            },
            data_residual,
        })
    }

    /// `(C^H C, C^H vec H, ||H - F(x)||^2, f_c / f_n)` of subcarrier `n`.
    fn block(&self, n: usize, x: Option<&[f64]>) -> Result<(Mat<Complex64>, Vec<Complex64>, f64, f64)> {
        let sc = &self.subcarriers[n];
        let chi = x.map(|x| unknowns_to_contrast(x, sc.ratio));
        let field = sc.total_field(&self.grid, chi.as_deref())?;
        let misfit = match &chi {
            Some(chi) => (&self.responses[n] - sc.response(chi, &field)).norm_l2().powi(2),
            None => 0.0,
        };
        let p = field.transpose();
        let q = &sc.receive;
        let pp = p.adjoint() * p;
        let qq = q.adjoint() * q;
        let d = pp.nrows();
        let k = Mat::from_fn(d, d, |i, j| pp[(i, j)] * qq[(i, j)]);
        let w = q.adjoint() * &self.responses[n];
        let cv = (0..d)
            .map(|m| (0..p.nrows()).map(|u| p[(u, m)].conj() * w[(m, u)]).sum())
            .collect();
        Ok((k, cv, misfit, sc.ratio))
    }
}

/// Add one subcarrier's `[[Re K, -r Im K], [r Im K, r^2 Re K]]` and
/// `[Re c; r Im c]` to the real normal equations.
fn accumulate(gram: &mut Mat<f64>, rhs: &mut [f64], k: &Mat<Complex64>, cv: &[Complex64], r: f64) {
    let d = k.nrows();
    for j in 0..d {
        for i in 0..d {
            let v = k[(i, j)];
            gram[(i, j)] += v.re;
            gram[(i, d + j)] -= r * v.im;
            gram[(d + i, j)] += r * v.im;
            gram[(d + i, d + j)] += r * r * v.re;
        }
    }
    for m in 0..d {
        rhs[m] += cv[m].re;
        rhs[d + m] += r * cv[m].im;
    }
}
