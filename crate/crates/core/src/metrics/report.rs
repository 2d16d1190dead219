//! Evaluation records, their aggregation, and CSV / JSON output.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// View configurations of the summary grid.
pub const VIEW_GRID: [(usize, usize); 3] = [(4, 8), (8, 16), (16, 32)];

/// How a record was scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    /// `log_cd` is finite.
    Scored,
    /// The prediction matched exactly; `log_cd` is negative infinity.
    ZeroCd,
    /// No target could be extracted; `log_cd` is positive infinity.
    Degenerate,
    /// Reconstruction failed; `log_cd` is positive infinity.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: usize,
    pub method: String,
    pub log_cd: f64,
    pub cd: f64,
    pub flag: RecordFlag,
    pub runtime_s: f64,
    pub num_bs: usize,
    pub num_ue: usize,
    /// Pilot SNR in dB; absent for noiseless channels.
    pub snr_db: Option<f64>,
}

impl EvalRecord {
    /// Record for a scored prediction with Chamfer distance `cd`.
    pub fn scored(sample_id: usize, method: &str, cd: f64, runtime_s: f64, views: (usize, usize), snr_db: Option<f64>) -> Result<Self> {
        let log_cd = super::log_cd(cd)?;
        Ok(EvalRecord {
            sample_id,
            method: method.to_string(),
            log_cd,
            cd,
            flag: if cd == 0.0 { RecordFlag::ZeroCd } else { RecordFlag::Scored },
            runtime_s,
            num_bs: views.0,
            num_ue: views.1,
            snr_db,
        })
    }

    /// Record for a prediction that produced no usable point cloud.
    pub fn unscored(sample_id: usize, method: &str, flag: RecordFlag, runtime_s: f64, views: (usize, usize), snr_db: Option<f64>) -> Self {
        EvalRecord {
            sample_id,
            method: method.to_string(),
            log_cd: f64::INFINITY,
            cd: f64::INFINITY,
            flag,
            runtime_s,
            num_bs: views.0,
            num_ue: views.1,
            snr_db,
        }
    }
}

/// Finite values as numbers, infinities as `"inf"` / `"-inf"`.
mod extended {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn to_repr(v: f64) -> impl Serialize {
        if v.is_finite() {
            Repr::Number(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Number(v) => Ok(v),
            Repr::Text(s) => s.parse().map_err(|_| E::custom(format!("not a number: {s}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod pairs {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
            let reprs: Vec<_> = v.iter().map(|[a, b]| (to_repr(*a), to_repr(*b))).collect();
            reprs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[f64; 2]>, D::Error> {
            let reprs: Vec<(Repr, Repr)> = Vec::deserialize(d)?;
            reprs
                .into_iter()
                .map(|(a, b)| Ok([from_repr(a)?, from_repr(b)?]))
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    #[serde(with = "extended")]
    pub q1: f64,
    #[serde(with = "extended")]
    pub median: f64,
    #[serde(with = "extended")]
    pub q3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub count: usize,
    pub scored: usize,
    pub zero_cd: usize,
    pub unscored: usize,
    /// Arithmetic mean of finite log-CD values in dB.
    pub mean_log_cd_db: Option<f64>,
    /// Mean of finite linear CD values, expressed in dB.
    pub mean_cd_db: Option<f64>,
    pub quartiles: Quartiles,
    /// Empirical CDF `(log_cd, fraction <= log_cd)` over every record.
    #[serde(with = "extended::pairs")]
    pub cdf: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewGridCell {
    pub method: String,
    pub num_bs: usize,
    pub num_ue: usize,
    pub count: usize,
    pub mean_log_cd_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub methods: Vec<MethodSummary>,
    pub view_grid: Vec<ViewGridCell>,
}

impl Summary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Linearly interpolated quantile of sorted values (`p` in `[0, 1]`).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if a == b {
        a
    } else {
        a + (b - a) * frac
    }
}

fn finite_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(method: &str, records: &[&EvalRecord]) -> MethodSummary {
    let mut sorted: Vec<f64> = records.iter().map(|r| r.log_cd).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| [v, (i + 1) as f64 / n as f64])
        .collect();
    MethodSummary {
        method: method.to_string(),
        count: n,
        scored: records.iter().filter(|r| r.flag == RecordFlag::Scored).count(),
        zero_cd: records.iter().filter(|r| r.flag == RecordFlag::ZeroCd).count(),
        unscored: records
            .iter()
            .filter(|r| matches!(r.flag, RecordFlag::Degenerate | RecordFlag::Failed))
            .count(),
        mean_log_cd_db: finite_mean(records.iter().map(|r| r.log_cd)),
        mean_cd_db: finite_mean(records.iter().map(|r| r.cd).filter(|&c| c > 0.0)).map(|m| 10.0 * m.log10()),
        quartiles: Quartiles {
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        },
        cdf,
    }
}

/// Per-method CDF, means and quartiles, plus mean log-CD over the view grid.
/// Methods are listed in order of first appearance.
pub fn aggregate(records: &[EvalRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::invalid("no evaluation records to aggregate"));
    }
    if records.iter().any(|r| r.log_cd.is_nan()) {
        return Err(Error::invalid("log-CD values must not be NaN"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        if !groups.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        groups.entry(&r.method).or_default().push(r);
    }
    let methods = order.iter().map(|m| summarize(m, &groups[m])).collect();
    let view_grid = order
        .iter()
        .flat_map(|m| {
            let group = &groups[m];
            VIEW_GRID.iter().map(move |&(nb, nu)| {
                let cell: Vec<_> = group.iter().filter(|r| r.num_bs == nb && r.num_ue == nu).collect();
                ViewGridCell {
                    method: m.to_string(),
                    num_bs: nb,
                    num_ue: nu,
                    count: cell.len(),
                    mean_log_cd_db: finite_mean(cell.iter().map(|r| r.log_cd)),
                }
            })
        })
        .collect();
    Ok(Summary { methods, view_grid })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("CSV: {e}"))
}

pub fn write_records_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// One two-column `log_cd_db,cdf` file per method, named `cdf_<method>.csv`.
pub fn write_cdf_csv(dir: &Path, summary: &Summary) -> Result<()> {
    for m in &summary.methods {
        let mut w = csv::Writer::from_path(dir.join(format!("cdf_{}.csv", m.method))).map_err(csv_error)?;
        w.write_record(["log_cd_db", "cdf"]).map_err(csv_error)?;
        for [x, p] in &m.cdf {
            w.write_record([x.to_string(), p.to_string()]).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Mean log-CD over the view grid as CSV: one row per method, one column per
/// `(B, U)` configuration.
pub fn write_view_grid_csv(path: &Path, summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["method".to_string()];
    header.extend(VIEW_GRID.iter().map(|(b, u)| format!("B{b}_U{u}")));
    w.write_record(&header).map_err(csv_error)?;
    for m in &summary.methods {
        let mut row = vec![m.method.clone()];
        for &(nb, nu) in &VIEW_GRID {
            let cell = summary
                .view_grid
                .iter()
                .find(|c| c.method == m.method && c.num_bs == nb && c.num_ue == nu);
            row.push(cell.and_then(|c| c.mean_log_cd_db).map(|v| format!("{v:.4}")).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
