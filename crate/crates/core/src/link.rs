//! Uplink pilot transmission, receiver noise and least-squares channel estimation.

use faer::{Mat, MatRef};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::em::{multi_view_channels, ChannelSet, PhysicsConfig, TargetScene, ViewChannel, ViewLayout};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::par;

pub const BOLTZMANN: f64 = 1.38e-23;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Radar-equation link budget for one view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrModel {
    /// Transmit power in W.
    pub transmit_power: f64,
    /// Linear transmit antenna gain.
    pub gain_tx: f64,
    /// Linear receive antenna gain.
    pub gain_rx: f64,
    /// Wavelength in m.
    pub wavelength: f64,
    /// Radar cross-section in m^2.
    pub rcs: f64,
    /// Transmitter-to-target range in m.
    pub range_tx: f64,
    /// Target-to-receiver range in m.
    pub range_rx: f64,
    /// Receiver noise temperature in K.
    pub temperature: f64,
    /// Boltzmann constant in J/K.
    pub boltzmann: f64,
    /// Noise bandwidth in Hz.
    pub bandwidth: f64,
}

impl SnrModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("transmit_power", self.transmit_power),
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
            ("wavelength", self.wavelength),
            ("range_tx", self.range_tx),
            ("range_rx", self.range_rx),
            ("temperature", self.temperature),
            ("boltzmann", self.boltzmann),
            ("bandwidth", self.bandwidth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rcs.is_finite() && self.rcs >= 0.0) {
            return Err(Error::invalid(format!("rcs must be non-negative, got {}", self.rcs)));
        }
        Ok(())
    }
}

/// `P_t G_t G_r lambda^2 sigma / ((4 pi)^3 R_t^2 R_r^2)` over `k T B`.
pub fn snr_linear(model: &SnrModel) -> Result<f64> {
    model.validate()?;
    let received = model.transmit_power * model.gain_tx * model.gain_rx * model.wavelength.powi(2) * model.rcs
        / ((4.0 * PI).powi(3) * model.range_tx.powi(2) * model.range_rx.powi(2));
    Ok(received / (model.boltzmann * model.temperature * model.bandwidth))
}

/// Range-independent part of the link budget, in the units engineers quote.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub transmit_power_dbm: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    pub rcs: f64,
    pub temperature: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            transmit_power_dbm: 23.0,
            gain_tx_dbi: 3.0,
            gain_rx_dbi: 3.0,
            rcs: 0.001,
            temperature: 290.0,
        }
    }
}

impl LinkBudget {
    /// Radar model for a UE at `ue` and a BS at `bs`, with the target at the origin.
    pub fn model(&self, cfg: &PhysicsConfig, ue: Point2, bs: Point2) -> SnrModel {
        SnrModel {
            transmit_power: db_to_linear(self.transmit_power_dbm) * 1e-3,
            gain_tx: db_to_linear(self.gain_tx_dbi),
            gain_rx: db_to_linear(self.gain_rx_dbi),
            wavelength: cfg.wavelength(),
            rcs: self.rcs,
            range_tx: ue.norm(),
            range_rx: bs.norm(),
            temperature: self.temperature,
            boltzmann: BOLTZMANN,
            bandwidth: cfg.bandwidth(),
        }
    }
}

/// How the per-element SNR of each view is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SnrMode {
    /// No noise; estimation returns the exact channel.
    Noiseless,
    /// The same SNR in dB for every view.
    Fixed { db: f64 },
    /// Per-view SNR from the radar equation using that view's distances.
    Radar(LinkBudget),
}

impl SnrMode {
    /// Linear SNR of the view between `ue` and `bs`, `None` when noiseless.
    pub fn view_snr(&self, cfg: &PhysicsConfig, ue: Point2, bs: Point2) -> Result<Option<f64>> {
        let snr = match self {
            SnrMode::Noiseless => return Ok(None),
            SnrMode::Fixed { db } => db_to_linear(*db),
            SnrMode::Radar(budget) => snr_linear(&budget.model(cfg, ue, bs))?,
        };
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::invalid(format!("view SNR must be positive, got {snr}")));
        }
        Ok(Some(snr))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    #[default]
    Qpsk,
}

/// Pilot sequence and noise settings of the uplink.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotConfig {
    /// Pilot symbols `L` per subcarrier.
    pub num_symbols: usize,
    pub modulation: Modulation,
    pub snr: SnrMode,
    pub seed: u64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig {
            num_symbols: 32,
            modulation: Modulation::Qpsk,
            snr: SnrMode::Fixed { db: 20.0 },
            seed: 0,
        }
    }
}

/// `L` unit-power QPSK symbols `(+-1 +- j) / sqrt 2`.
pub fn qpsk_pilots<R: Rng + ?Sized>(rng: &mut R, num_symbols: usize) -> Vec<Complex64> {
    (0..num_symbols)
        .map(|_| {
            let re = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect()
}

/// Circularly-symmetric complex Gaussian sample with variance `power`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let scale = (0.5 * power).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// `Y = h s^T + Z`, `N_r x L`, with i.i.d. noise of variance `noise_power`.
pub fn simulate_rx<R: Rng + ?Sized>(
    rng: &mut R,
    h: &[Complex64],
    pilots: &[Complex64],
    noise_power: f64,
) -> Result<Mat<Complex64>> {
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::invalid(format!("noise power must be non-negative, got {noise_power}")));
    }
    if h.iter().chain(pilots).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("channel and pilots must be finite"));
    }
    let mut y = Mat::from_fn(h.len(), pilots.len(), |r, l| h[r] * pilots[l]);
    if noise_power > 0.0 {
        // column-major draw order: one pilot symbol across all antennas at a time
        for l in 0..pilots.len() {
            for r in 0..h.len() {
                y[(r, l)] += complex_gaussian(rng, noise_power);
            }
        }
    }
    Ok(y)
}

/// Least-squares estimate `h = Y s* / (s^T s*)`.
pub fn ls_estimate(y: MatRef<'_, Complex64>, pilots: &[Complex64]) -> Result<Vec<Complex64>> {
    if y.ncols() != pilots.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} received symbols for {} pilots",
            y.ncols(),
            pilots.len()
        )));
    }
    let energy: f64 = pilots.iter().map(|s| s.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(Error::invalid("pilot sequence has zero energy"));
    }
    Ok((0..y.nrows())
        .map(|r| {
            let acc: Complex64 = pilots.iter().enumerate().map(|(l, s)| y[(r, l)] * s.conj()).sum();
            acc / energy
        })
        .collect())
}

/// Noise power giving `snr` against the mean per-entry power of `csi`.
pub fn calibrated_noise_power(csi: MatRef<'_, Complex64>, snr: f64) -> f64 {
    let entries = (csi.nrows() * csi.ncols()).max(1) as f64;
    csi.norm_l2().powi(2) / entries / snr
}

/// Receiver noise power of one view under `mode`, `None` when noiseless.
pub fn view_noise_power(view: &ViewChannel, cfg: &PhysicsConfig, mode: &SnrMode) -> Result<Option<f64>> {
    let snr = mode.view_snr(cfg, view.ue_position, view.bs_position)?;
    Ok(snr.map(|snr| calibrated_noise_power(view.csi.as_ref(), snr)))
}

/// Pass every (BS, UE, subcarrier) channel of `exact` through pilot
/// transmission and LS estimation.
///
/// View `(b, u)` draws from its own ChaCha stream, so the result does not
/// depend on scheduling.
pub fn estimate_channels(exact: &ChannelSet, cfg: &PhysicsConfig, pilot: &PilotConfig) -> Result<ChannelSet> {
    if pilot.num_symbols == 0 {
        return Err(Error::invalid("at least one pilot symbol is needed"));
    }
    let (nr, nc) = (exact.num_rx(), exact.num_subcarriers());
    let entries = par::try_map_range(exact.entries().len(), |i| {
        let view = &exact.entries()[i];
        let Some(noise) = view_noise_power(view, cfg, &pilot.snr)? else {
            return Ok(view.clone());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(pilot.seed);
        rng.set_stream(i as u64);
        let mut est = Mat::zeros(nr, nc);
        for n in 0..nc {
            let h: Vec<Complex64> = (0..nr).map(|r| view.csi[(r, n)]).collect();
            let s = qpsk_pilots(&mut rng, pilot.num_symbols);
            let y = simulate_rx(&mut rng, &h, &s, noise)?;
            for (r, v) in ls_estimate(y.as_ref(), &s)?.into_iter().enumerate() {
                est[(r, n)] = v;
            }
        }
        let mut out = view.clone();
        out.csi = est;
        Ok::<_, Error>(out)
    })?;
    ChannelSet::new(exact.num_bs(), exact.num_ue(), nr, nc, entries)
}

/// Exact channels of `scene` followed by pilot-based estimation.
pub fn estimate_channel_set(
    scene: &TargetScene,
    layout: &ViewLayout,
    cfg: &PhysicsConfig,
    pilot: &PilotConfig,
) -> Result<ChannelSet> {
    let exact = multi_view_channels(scene, layout, cfg)?;
    estimate_channels(&exact, cfg, pilot)
}
