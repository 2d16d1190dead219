//! Born-iterative reconstruction of permittivity and conductivity images.

pub mod operators;
pub mod solver;

use serde::{Deserialize, Serialize};

use crate::em::{ChannelSet, PhysicsConfig, RoiGrid, ViewLayout};
use crate::error::{Error, Result};

pub use operators::{
    assemble_c, real_stack, scene_unknowns, unknowns_to_contrast, InversionOperators, Linearization,
    NormalSystem, RealStackedSystem,
};
pub use solver::{group_norm, group_prox, solve_cs_box, solve_ls_box, zero_groups, BoxSolution, SolverOptions};

/// Which inner problem each Born iteration solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Box-constrained least squares.
    Bim,
    /// Box-constrained least squares with a per-pixel group-norm penalty.
    BimCs,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Bim => "bim",
            Variant::BimCs => "bim-cs",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bim" => Ok(Variant::Bim),
            "bim-cs" => Ok(Variant::BimCs),
            _ => Err(Error::invalid(format!("unknown method {s:?} (expected bim or bim-cs)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BimConfig {
    /// Born iterations after the initial Born solve.
    pub num_born_iters: usize,
    /// Fixed group-norm weight; when absent it is `cs_weight_factor * ||A^T h||_inf`
    /// of the initial Born system.
    pub cs_weight: Option<f64>,
    pub cs_weight_factor: f64,
    /// Upper bounds of `eps_r - 1` and `sigma / (2 pi f_c eps0)`; when absent
    /// they follow from `eps_r <= 2.5` and `sigma <= 0.1` S/m.
    pub x_max: Option<[f64; 2]>,
    pub solver: SolverOptions,
}

impl Default for BimConfig {
    fn default() -> Self {
        BimConfig {
            num_born_iters: 10,
            cs_weight: None,
            cs_weight_factor: 0.01,
            x_max: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Bounds matching relative permittivity up to 2.5 and conductivity up to 0.1 S/m.
pub fn default_x_max(cfg: &PhysicsConfig) -> [f64; 2] {
    [1.5, 0.1 * cfg.conductivity_scale(cfg.center_frequency)]
}

impl BimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_born_iters == 0 {
            return Err(Error::invalid("at least one Born iteration is needed"));
        }
        if let Some(w) = self.cs_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("cs_weight must be >= 0, got {w}")));
            }
        }
        if !(self.cs_weight_factor >= 0.0 && self.cs_weight_factor.is_finite()) {
            return Err(Error::invalid("cs_weight_factor must be >= 0"));
        }
        if let Some(u) = self.x_max {
            if !u.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("x_max must be positive, got {u:?}")));
            }
        }
        self.solver.validate()
    }

    pub fn bounds(&self, cfg: &PhysicsConfig) -> [f64; 2] {
        self.x_max.unwrap_or_else(|| default_x_max(cfg))
    }
}

/// Reconstructed images and per-iteration diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimResult {
    pub variant: Variant,
    pub eps_r: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Final unknown vector `[eps_r - 1; sigma / (2 pi f_c eps0)]`.
    pub x: Vec<f64>,
    /// `||h - F(x_i)|| / ||h||` of the full model for the initial Born
    /// estimate and after every Born iteration.
    pub data_residuals: Vec<f64>,
    /// `||h - A_i x_i|| / ||h||` of the linear system solved for the initial
    /// estimate and at every Born iteration.
    pub system_residuals: Vec<f64>,
    /// Inner solver iterations per solve.
    pub inner_iterations: Vec<usize>,
    /// Group-norm weight used (0 for plain BIM).
    pub cs_weight: f64,
}

impl BimResult {
    /// Pixel-wise contrast magnitude `|(x_d, x_{D+d})|`.
    pub fn magnitude(&self) -> Vec<f64> {
        let d = self.x.len() / 2;
        (0..d).map(|m| self.x[m].hypot(self.x[d + m])).collect()
    }
}

fn at_iteration(e: Error, i: usize) -> Error {
    match e {
        Error::NumericFailure { message, rcond } => Error::NumericFailure {
            message: format!("Born iteration {i}: {message}"),
            rcond,
        },
        other => other,
    }
}

/// Reconstruct `(eps_r, sigma)` images of `grid` from multi-view channels.
///
/// The initial estimate solves the Born system; each Born iteration then
/// relinearizes about the current estimate and re-solves, warm-started.
pub fn bim(
    channels: &ChannelSet,
    grid: &RoiGrid,
    layout: &ViewLayout,
    cfg: &PhysicsConfig,
    config: &BimConfig,
    variant: Variant,
) -> Result<BimResult> {
    config.validate()?;
    let ops = InversionOperators::new(channels, grid, layout, cfg)?;
    let upper = config.bounds(cfg);
    let scale = ops.data_norm().max(f64::MIN_POSITIVE);
    let lin = ops.linearize(None).map_err(|e| at_iteration(e, 0))?;
    let cs_weight = match variant {
        Variant::Bim => 0.0,
        Variant::BimCs => config.cs_weight.unwrap_or_else(|| {
            config.cs_weight_factor * lin.system.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        }),
    };
    let solve = |sys: &NormalSystem, warm: Option<&[f64]>| match variant {
        Variant::Bim => solve_ls_box(sys, upper, &config.solver, warm),
        Variant::BimCs => solve_cs_box(sys, cs_weight, upper, &config.solver, warm),
    };
    let first = solve(&lin.system, None).map_err(|e| at_iteration(e, 0))?;
    let mut inner_iterations = vec![first.iterations];
    let mut system_residuals = vec![lin.system.residual_sq(&first.x).sqrt() / scale];
    let mut x = first.x;
    let mut data_residuals = Vec::with_capacity(config.num_born_iters + 1);
    for i in 1..=config.num_born_iters {
        let lin = ops.linearize(Some(&x)).map_err(|e| at_iteration(e, i))?;
        data_residuals.push(lin.data_residual / scale);
        let sol = solve(&lin.system, Some(&x)).map_err(|e| at_iteration(e, i))?;
        inner_iterations.push(sol.iterations);
        system_residuals.push(lin.system.residual_sq(&sol.x).sqrt() / scale);
        log::debug!(
            "{} Born iteration {i}: residual {:.3e}, {} inner steps",
            variant.name(),
            lin.data_residual / scale,
            sol.iterations
        );
        x = sol.x;
    }
    let last = ops.data_residual(&x).map_err(|e| at_iteration(e, config.num_born_iters + 1))?;
    data_residuals.push(last / scale);
    let d = grid.num_pixels();
    let to_sigma = 1.0 / cfg.conductivity_scale(cfg.center_frequency);
    Ok(BimResult {
        variant,
        eps_r: x[..d].iter().map(|v| v + 1.0).collect(),
        sigma: x[d..].iter().map(|v| v * to_sigma).collect(),
        x,
        data_residuals,
        system_residuals,
        inner_iterations,
        cs_weight,
    })
}
