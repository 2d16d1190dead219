use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Base-station and UE placement, including every BS receive antenna.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewLayout {
    bs_positions: Vec<Point2>,
    antenna_positions: Vec<Vec<Point2>>,
    ue_positions: Vec<Point2>,
}

/// Element positions of a uniform linear array centred at `center` whose
/// broadside points at the origin.
pub fn ula_positions(center: Point2, num_rx: usize, spacing: f64) -> Result<Vec<Point2>> {
    let r = center.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::invalid("array at the origin has no normal direction"));
    }
    let axis = Point2::new(-center.y / r, center.x / r);
    let mid = (num_rx as f64 - 1.0) / 2.0;
    Ok((0..num_rx)
        .map(|i| center + axis * ((i as f64 - mid) * spacing))
        .collect())
}

impl ViewLayout {
    /// Layout with an `num_rx`-element ULA at every base station.
    pub fn ula(
        bs_positions: Vec<Point2>,
        ue_positions: Vec<Point2>,
        num_rx: usize,
        spacing: f64,
    ) -> Result<Self> {
        if num_rx == 0 {
            return Err(Error::invalid("base stations need at least one antenna"));
        }
        let antennas = bs_positions
            .iter()
            .map(|&p| ula_positions(p, num_rx, spacing))
            .collect::<Result<Vec<_>>>()?;
        Self::with_antennas(bs_positions, antennas, ue_positions)
    }

    /// Layout with explicit antenna coordinates per base station.
    pub fn with_antennas(
        bs_positions: Vec<Point2>,
        antenna_positions: Vec<Vec<Point2>>,
        ue_positions: Vec<Point2>,
    ) -> Result<Self> {
        if bs_positions.is_empty() || ue_positions.is_empty() {
            return Err(Error::invalid("a layout needs at least one BS and one UE"));
        }
        if antenna_positions.len() != bs_positions.len() {
            return Err(Error::ShapeMismatch("one antenna list per BS expected".into()));
        }
        let nr = antenna_positions[0].len();
        if nr == 0 || antenna_positions.iter().any(|a| a.len() != nr) {
            return Err(Error::ShapeMismatch(
                "every BS needs the same non-zero antenna count".into(),
            ));
        }
        let all = bs_positions
            .iter()
            .chain(ue_positions.iter())
            .chain(antenna_positions.iter().flatten());
        if all.clone().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite position in layout"));
        }
        Ok(ViewLayout {
            bs_positions,
            antenna_positions,
            ue_positions,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_ue(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_rx(&self) -> usize {
        self.antenna_positions[0].len()
    }

    pub fn bs_positions(&self) -> &[Point2] {
        &self.bs_positions
    }

    pub fn ue_positions(&self) -> &[Point2] {
        &self.ue_positions
    }

    pub fn antennas(&self, b: usize) -> &[Point2] {
        &self.antenna_positions[b]
    }

    /// Keep the listed base stations and UEs, in the given order.
    pub fn select(&self, bs: &[usize], ue: &[usize]) -> Result<Self> {
        if bs.iter().any(|&b| b >= self.num_bs()) || ue.iter().any(|&u| u >= self.num_ue()) {
            return Err(Error::invalid("view index out of range"));
        }
        Self::with_antennas(
            bs.iter().map(|&b| self.bs_positions[b]).collect(),
            bs.iter().map(|&b| self.antenna_positions[b].clone()).collect(),
            ue.iter().map(|&u| self.ue_positions[u]).collect(),
        )
    }

    /// The first `num_bs` base stations and `num_ue` UEs.
    pub fn truncate(&self, num_bs: usize, num_ue: usize) -> Result<Self> {
        if num_bs > self.num_bs() || num_ue > self.num_ue() {
            return Err(Error::invalid(format!(
                "requested ({num_bs}, {num_ue}) views from a ({}, {}) layout",
                self.num_bs(),
                self.num_ue()
            )));
        }
        let bs: Vec<_> = (0..num_bs).collect();
        let ue: Vec<_> = (0..num_ue).collect();
        self.select(&bs, &ue)
    }
}

/// CSI of a single (BS, UE) view: `N_r x N_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewChannel {
    pub bs: usize,
    pub ue: usize,
    pub bs_position: Point2,
    pub ue_position: Point2,
    pub csi: Mat<Complex64>,
}

/// Multi-view CSI, one entry per (BS, UE) pair in BS-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    num_bs: usize,
    num_ue: usize,
    num_rx: usize,
    num_subcarriers: usize,
    entries: Vec<ViewChannel>,
}

impl ChannelSet {
    pub fn new(
        num_bs: usize,
        num_ue: usize,
        num_rx: usize,
        num_subcarriers: usize,
        entries: Vec<ViewChannel>,
    ) -> Result<Self> {
        if entries.len() != num_bs * num_ue {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for {num_bs} x {num_ue} views",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.bs != i / num_ue || e.ue != i % num_ue {
                return Err(Error::ShapeMismatch("entries must be in BS-major order".into()));
            }
            if e.csi.nrows() != num_rx || e.csi.ncols() != num_subcarriers {
                return Err(Error::ShapeMismatch(format!(
                    "view ({}, {}) is {}x{}, expected {num_rx}x{num_subcarriers}",
                    e.bs,
                    e.ue,
                    e.csi.nrows(),
                    e.csi.ncols()
                )));
            }
        }
        Ok(ChannelSet {
            num_bs,
            num_ue,
            num_rx,
            num_subcarriers,
            entries,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_ue(&self) -> usize {
        self.num_ue
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn entries(&self) -> &[ViewChannel] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ViewChannel] {
        &mut self.entries
    }

    pub fn entry(&self, b: usize, u: usize) -> &ViewChannel {
        &self.entries[b * self.num_ue + u]
    }

    /// Flatten to a `[B, U, N_r, N_c]` row-major buffer.
    pub fn to_flat(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.entries.len() * self.num_rx * self.num_subcarriers);
        for e in &self.entries {
            for r in 0..self.num_rx {
                for n in 0..self.num_subcarriers {
                    out.push(e.csi[(r, n)]);
                }
            }
        }
        out
    }

    /// Inverse of [`ChannelSet::to_flat`].
    pub fn from_flat(
        data: &[Complex64],
        dims: [usize; 4],
        bs_positions: &[Point2],
        ue_positions: &[Point2],
    ) -> Result<Self> {
        let [nb, nu, nr, nc] = dims;
        if data.len() != nb * nu * nr * nc || bs_positions.len() != nb || ue_positions.len() != nu
        {
            return Err(Error::ShapeMismatch("CSI tensor does not match its dimensions".into()));
        }
        let entries = (0..nb * nu)
            .map(|i| {
                let base = i * nr * nc;
                ViewChannel {
                    bs: i / nu,
                    ue: i % nu,
                    bs_position: bs_positions[i / nu],
                    ue_position: ue_positions[i % nu],
                    csi: Mat::from_fn(nr, nc, |r, n| data[base + r * nc + n]),
                }
            })
            .collect();
        ChannelSet::new(nb, nu, nr, nc, entries)
    }

    /// Keep a subset of views, re-indexed in the given order.
    pub fn select(&self, bs: &[usize], ue: &[usize]) -> Result<Self> {
        if bs.iter().any(|&b| b >= self.num_bs) || ue.iter().any(|&u| u >= self.num_ue) {
            return Err(Error::invalid("view index out of range"));
        }
        let mut entries = Vec::with_capacity(bs.len() * ue.len());
        for (bi, &b) in bs.iter().enumerate() {
            for (ui, &u) in ue.iter().enumerate() {
                let mut e = self.entry(b, u).clone();
                e.bs = bi;
                e.ue = ui;
                entries.push(e);
            }
        }
        ChannelSet::new(bs.len(), ue.len(), self.num_rx, self.num_subcarriers, entries)
    }

    /// Total energy `sum |H|^2` over all views.
    pub fn energy(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.csi.norm_l2().powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ula_is_broadside_to_origin() {
        let center = Point2::from_polar(90.0, 0.7);
        let ant = ula_positions(center, 4, 0.05).unwrap();
        assert_eq!(ant.len(), 4);
        let mid = (ant[1] + ant[2]) * 0.5;
        assert!(mid.distance(center) < 1e-12);
        let axis = ant[3] - ant[0];
        // axis orthogonal to the direction towards the origin
        assert!((axis.x * center.x + axis.y * center.y).abs() < 1e-9);
        assert!((ant[1].distance(ant[0]) - 0.05).abs() < 1e-12);
        assert!(ula_positions(Point2::ORIGIN, 4, 0.05).is_err());
    }

    #[test]
    fn layout_validation_and_subsets() {
        let bs = vec![Point2::new(90.0, 0.0), Point2::new(0.0, 85.0)];
        let ue = vec![Point2::new(5.0, 0.0), Point2::new(-6.0, 1.0), Point2::new(0.0, -7.0)];
        let layout = ViewLayout::ula(bs.clone(), ue.clone(), 4, 0.05).unwrap();
        assert_eq!((layout.num_bs(), layout.num_ue(), layout.num_rx()), (2, 3, 4));
        let sub = layout.truncate(1, 2).unwrap();
        assert_eq!(sub.bs_positions(), &bs[..1]);
        assert_eq!(sub.ue_positions(), &ue[..2]);
        assert!(layout.truncate(3, 1).is_err());
        assert!(ViewLayout::ula(vec![], ue, 4, 0.05).is_err());
    }
}
