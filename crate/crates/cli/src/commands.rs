//! The `gen-dataset`, `reconstruct` and `eval` commands.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mvsense::dataset::{self, build_dataset, read_points, sample_dir, stream_rng, Dataset, Split, Stream};
use mvsense::inversion::{bim, BimResult};
use mvsense::link::{estimate_channels, Modulation, PilotConfig, SnrMode};
use mvsense::metrics::report::{self, RecordFlag};
use mvsense::metrics::{chamfer, reconstruction_to_point_cloud, EvalRecord, Summary};
use mvsense::tensor::{read_tensor, write_tensor, Tensor};
use mvsense::{par, Error};

use crate::config::{output_dir, resolve, write_snapshot, RunConfig, RunSnapshot};
use crate::{CliError, EvalArgs, GenDatasetArgs, ReconstructArgs};

/// Per-run metadata written by `reconstruct` and read back by `eval` when the
/// run directory is passed as a prediction directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub method: String,
    pub num_bs: usize,
    pub num_ue: usize,
    pub snr_db: Option<f64>,
}

pub const RUN_INFO_FILE: &str = "run.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

fn config_err(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

fn int(n: usize) -> Result<toml::Value, CliError> {
    i64::try_from(n)
        .map(toml::Value::Integer)
        .map_err(|_| config_err(format!("{n} is out of range")))
}

fn string(s: &str) -> toml::Value {
    toml::Value::String(s.to_string())
}

fn is_nonempty_dir(path: &Path) -> bool {
    std::fs::read_dir(path).map(|mut d| d.next().is_some()).unwrap_or(false)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.into()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn snapshot(command: &str, file: Option<&Path>, out: &Path, overrides: &[String], config: &RunConfig) -> Result<(), CliError> {
    write_snapshot(
        out,
        &RunSnapshot {
            command,
            config_file: file,
            output_dir: out,
            overrides,
            config,
        },
    )
}

pub fn gen_dataset(args: GenDatasetArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    if let Some(n) = args.samples {
        flags.push(("dataset.num_samples", int(n)?));
    }
    if let Some(n) = args.grid {
        flags.push(("dataset.resolution", int(n)?));
    }
    if let Some(n) = args.bs {
        flags.push(("dataset.num_bs", int(n)?));
    }
    if let Some(n) = args.ue {
        flags.push(("dataset.num_ue", int(n)?));
    }
    if let Some(kind) = &args.dataset {
        flags.push(("dataset.kind", string(kind)));
    }
    if let Some(seed) = args.seed {
        flags.push(("dataset.seed", int(seed as usize)?));
    }
    if let Some(n) = args.points {
        flags.push(("dataset.num_points", int(n)?));
    }
    if let Some(n) = args.pilots {
        flags.push(("dataset.link.num_symbols", int(n)?));
    }
    if let Some(db) = args.snr {
        flags.push(("dataset.link.snr.mode", string("fixed")));
        flags.push(("dataset.link.snr.db", toml::Value::Float(db)));
    }
    let common = args.common;
    let config = resolve(common.config.as_deref(), flags, &common.overrides)?;
    config.dataset.validate().map_err(config_err)?;
    let out = output_dir(common.out, "dataset")?;
    if is_nonempty_dir(&out) {
        return Err(config_err(format!("output directory {} is not empty", out.display())));
    }
    let started = Instant::now();
    let manifest = build_dataset(&config.dataset, &out)?;
    snapshot("gen-dataset", common.config.as_deref(), &out, &common.overrides, &config)?;
    println!(
        "wrote {} samples ({} train / {} val / {} test) to {} in {:.1} s",
        config.dataset.num_samples,
        manifest.splits.train,
        manifest.splits.val,
        manifest.splits.test,
        out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn parse_views(text: &str) -> Result<[usize; 2], CliError> {
    let bad = || config_err(format!("views {text:?} must look like BxU, e.g. 8x16"));
    let (b, u) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok([b.trim().parse().map_err(|_| bad())?, u.trim().parse().map_err(|_| bad())?])
}

/// Everything `reconstruct` keeps about one successful sample.
struct Reconstruction {
    result: BimResult,
    points: Option<Vec<[f64; 4]>>,
    record: EvalRecord,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    sample_id: usize,
    method: &'a str,
    flag: RecordFlag,
    #[serde(serialize_with = "finite_or_null")]
    log_cd: f64,
    cs_weight: f64,
    data_residuals: &'a [f64],
    system_residuals: &'a [f64],
    inner_iterations: &'a [usize],
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn reconstruct_one(ds: &Dataset, config: &RunConfig, views: (usize, usize), id: usize) -> Result<Reconstruction, Error> {
    let rc = &config.reconstruct;
    let cfg = &ds.manifest().config;
    let sample = ds.load_sample(id)?;
    let (nb, nu) = views;
    let (layout, channels) = if (nb, nu) == (cfg.num_bs, cfg.num_ue) {
        (sample.layout, sample.channels)
    } else {
        let bs: Vec<usize> = (0..nb).collect();
        let ue: Vec<usize> = (0..nu).collect();
        (sample.layout.truncate(nb, nu)?, sample.channels.select(&bs, &ue)?)
    };
    let started = Instant::now();
    let channels = if rc.noiseless {
        channels
    } else {
        let pilot = PilotConfig {
            num_symbols: rc.pilots,
            modulation: Modulation::Qpsk,
            snr: SnrMode::Fixed { db: rc.snr_db },
            seed: stream_rng(rc.seed, Stream::Link, id as u64).random(),
        };
        estimate_channels(&channels, &cfg.physics, &pilot)?
    };
    let grid = cfg.grid()?;
    let result = bim(&channels, &grid, &layout, &cfg.physics, &rc.bim, rc.method)?;
    let runtime = started.elapsed().as_secs_f64();
    let mut rng = stream_rng(rc.seed, Stream::Prediction, id as u64);
    let cloud = reconstruction_to_point_cloud(
        &mut rng,
        &grid,
        &result.eps_r,
        &result.sigma,
        &result.magnitude(),
        cfg.num_points,
        &ds.manifest().norm_stats,
    )?;
    let snr = (!rc.noiseless).then_some(rc.snr_db);
    let method = rc.method.name();
    let record = match &cloud {
        Some(pc) => EvalRecord::scored(id, method, chamfer(pc.points(), sample.points.points())?, runtime, views, snr)?,
        None => EvalRecord::unscored(id, method, RecordFlag::Degenerate, runtime, views, snr),
    };
    Ok(Reconstruction {
        result,
        points: cloud.map(|pc| pc.into_points()),
        record,
    })
}

fn write_reconstruction(out: &Path, grid_side: usize, r: &Reconstruction) -> Result<(), Error> {
    let stem = out.join(format!("sample_{:06}", r.record.sample_id));
    let image = |values: &[f64]| Tensor::f64(vec![grid_side, grid_side], values.to_vec());
    write_tensor(&stem.with_extension("eps_r.bin"), &image(&r.result.eps_r)?)?;
    write_tensor(&stem.with_extension("sigma.bin"), &image(&r.result.sigma)?)?;
    if let Some(points) = &r.points {
        dataset::write_points(&stem.with_extension("points.bin"), points)?;
    }
    let report = SampleReport {
        sample_id: r.record.sample_id,
        method: &r.record.method,
        flag: r.record.flag,
        log_cd: r.record.log_cd,
        cs_weight: r.result.cs_weight,
        data_residuals: &r.result.data_residuals,
        system_residuals: &r.result.system_residuals,
        inner_iterations: &r.result.inner_iterations,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(stem.with_extension("json"), text)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Timing {
    sample_id: usize,
    runtime_s: f64,
}

pub fn reconstruct(args: ReconstructArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    if let Some(m) = &args.method {
        m.parse::<mvsense::inversion::Variant>().map_err(config_err)?;
        flags.push(("reconstruct.method", string(m)));
    }
    if let Some(db) = args.snr {
        flags.push(("reconstruct.snr_db", toml::Value::Float(db)));
    }
    if let Some(n) = args.pilots {
        flags.push(("reconstruct.pilots", int(n)?));
    }
    if args.noiseless {
        flags.push(("reconstruct.noiseless", toml::Value::Boolean(true)));
    }
    if let Some(s) = &args.split {
        flags.push(("reconstruct.split", string(s)));
    }
    if let Some(n) = args.limit {
        flags.push(("reconstruct.limit", int(n)?));
    }
    if let Some(v) = &args.views {
        let [b, u] = parse_views(v)?;
        flags.push(("reconstruct.views", toml::Value::Array(vec![int(b)?, int(u)?])));
    }
    if let Some(n) = args.iters {
        flags.push(("reconstruct.bim.num_born_iters", int(n)?));
    }
    if let Some(w) = args.cs_weight {
        flags.push(("reconstruct.bim.cs_weight", toml::Value::Float(w)));
    }
    if let Some(seed) = args.seed {
        flags.push(("reconstruct.seed", int(seed as usize)?));
    }
    let common = args.common;
    let config = resolve(common.config.as_deref(), flags, &common.overrides)?;
    let rc = &config.reconstruct;
    rc.bim.validate().map_err(config_err)?;
    if !rc.noiseless && (rc.pilots == 0 || !rc.snr_db.is_finite()) {
        return Err(config_err("noisy reconstruction needs pilots >= 1 and a finite SNR"));
    }
    let ds = Dataset::open(&args.data).map_err(|e| config_err(format!("dataset {}: {e}", args.data.display())))?;
    let dcfg = &ds.manifest().config;
    let views = match rc.views {
        None => (dcfg.num_bs, dcfg.num_ue),
        Some([b, u]) if b >= 1 && u >= 1 && b <= dcfg.num_bs && u <= dcfg.num_ue => (b, u),
        Some([b, u]) => {
            return Err(config_err(format!(
                "views {b}x{u} exceed the dataset's {}x{}",
                dcfg.num_bs, dcfg.num_ue
            )))
        }
    };
    let out = output_dir(common.out, "reconstruct")?;
    std::fs::create_dir_all(&out)?;
    let ids: Vec<usize> = ds.indices(rc.split).take(rc.limit.unwrap_or(usize::MAX)).collect();
    log::info!("reconstructing {} {:?} samples with {}", ids.len(), rc.split, rc.method.name());

    let snr = (!rc.noiseless).then_some(rc.snr_db);
    let mut records = Vec::with_capacity(ids.len());
    let mut timings = Vec::with_capacity(ids.len());
    let mut failures = 0;
    for chunk in ids.chunks(par::num_threads().max(1)) {
        let outcomes = par::map_slice(chunk, |&id| {
            let started = Instant::now();
            (id, reconstruct_one(&ds, &config, views, id), started.elapsed().as_secs_f64())
        });
        for (id, outcome, elapsed) in outcomes {
            let record = match outcome.and_then(|r| write_reconstruction(&out, dcfg.resolution, &r).map(|_| r)) {
                Ok(r) => r.record,
                Err(e) => {
                    log::warn!("{}", e.at_sample(id));
                    failures += 1;
                    EvalRecord::unscored(id, rc.method.name(), RecordFlag::Failed, elapsed, views, snr)
                }
            };
            timings.push(Timing {
                sample_id: id,
                runtime_s: record.runtime_s,
            });
            // runtimes live in their own file so the records stay reproducible
            records.push(EvalRecord { runtime_s: 0.0, ..record });
        }
    }

    report::write_records_csv(&out.join(RECORDS_FILE), &records)?;
    let mut w = csv::Writer::from_path(out.join(TIMINGS_FILE)).map_err(|e| CliError::Run(Error::Format(e.to_string())))?;
    for t in &timings {
        w.serialize(t).map_err(|e| CliError::Run(Error::Format(e.to_string())))?;
    }
    w.flush()?;
    write_json(
        &out.join(RUN_INFO_FILE),
        &RunInfo {
            method: rc.method.name().to_string(),
            num_bs: views.0,
            num_ue: views.1,
            snr_db: snr,
        },
    )?;
    snapshot("reconstruct", common.config.as_deref(), &out, &common.overrides, &config)?;
    if failures > 0 && failures == records.len() {
        return Err(CliError::Run(Error::NumericFailure {
            message: format!("all {failures} reconstructions failed"),
            rcond: None,
        }));
    }
    let scored: Vec<f64> = records.iter().map(|r| r.log_cd).filter(|v| v.is_finite()).collect();
    println!(
        "{}: {} samples, {} failed, mean log-CD {} -> {}",
        rc.method.name(),
        records.len(),
        failures,
        if scored.is_empty() {
            "n/a".to_string()
        } else {
            format!("{:.2} dB", scored.iter().sum::<f64>() / scored.len() as f64)
        },
        out.display()
    );
    Ok(())
}

/// Runtimes from a `timings.csv` next to `records`, when present.
fn sibling_timings(records: &Path) -> Result<HashMap<usize, f64>, CliError> {
    let path = records.with_file_name(TIMINGS_FILE);
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let mut r = csv::Reader::from_path(&path).map_err(|e| CliError::Run(Error::Format(e.to_string())))?;
    r.deserialize::<Timing>()
        .map(|t| {
            t.map(|t| (t.sample_id, t.runtime_s))
                .map_err(|e| CliError::Run(Error::Format(format!("{}: {e}", path.display()))))
        })
        .collect()
}

fn prediction_id(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    let digits = name.strip_prefix("sample_")?.strip_suffix(".points.bin")?;
    (digits.len() == 6).then(|| digits.parse().ok()).flatten()
}

fn score_predictions(ds: &Dataset, dir: &Path, split: Split) -> Result<Vec<EvalRecord>, CliError> {
    let info: Option<RunInfo> = match std::fs::read_to_string(dir.join(RUN_INFO_FILE)) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| CliError::Run(e.into()))?),
        Err(_) => None,
    };
    let cfg = &ds.manifest().config;
    let method = info.as_ref().map(|i| i.method.clone()).unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "prediction".into())
    });
    let views = info.as_ref().map_or((cfg.num_bs, cfg.num_ue), |i| (i.num_bs, i.num_ue));
    let snr = info.as_ref().and_then(|i| i.snr_db);
    let wanted = ds.indices(split);
    let mut files: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| prediction_id(&p).map(|id| (id, p)))
        .filter(|(id, _)| wanted.contains(id))
        .collect();
    files.sort();
    let scored = par::map_slice(&files, |(id, path)| {
        let truth = read_points(&sample_dir(ds.root(), *id).join("points.bin"))?;
        let predicted = read_points(path)?;
        EvalRecord::scored(*id, &method, chamfer(&predicted, &truth)?, 0.0, views, snr)
    });
    let records = scored.into_iter().collect::<Result<Vec<_>, Error>>()?;
    log::info!("{}: scored {} predictions as {method}", dir.display(), records.len());
    Ok(records)
}

/// Validate a latent table against the split and flatten it to CSV.
///
/// The table is an `[N, d + 3]` tensor: `d` latent means followed by the
/// shape class, permittivity and conductivity labels, one row per sample of
/// the split in index order.
fn export_latents(ds: &Dataset, split: Split, path: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let t = read_tensor(path)?;
    let rows: Vec<usize> = ds.indices(split).collect();
    t.expect_shape(&[Some(rows.len()), None])?;
    let cols = t.shape()[1];
    if cols < 4 {
        return Err(CliError::Run(Error::ShapeMismatch(format!(
            "latent table {} needs at least one latent column and three labels",
            path.display()
        ))));
    }
    let d = cols - 3;
    let values = t.to_f64()?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let target = out.join(format!("latents_{stem}.csv"));
    let fmt = |e: csv::Error| CliError::Run(Error::Format(e.to_string()));
    let mut w = csv::Writer::from_path(&target).map_err(fmt)?;
    let mut header = vec!["sample_id".to_string(), "label".into(), "eps_r".into(), "sigma".into()];
    header.extend((0..d).map(|k| format!("z{k}")));
    w.write_record(&header).map_err(fmt)?;
    for (id, row) in rows.iter().zip(values.chunks_exact(cols)) {
        let mut line = vec![id.to_string()];
        line.extend(row[d..].iter().map(|v| v.to_string()));
        line.extend(row[..d].iter().map(|v| v.to_string()));
        w.write_record(&line).map_err(fmt)?;
    }
    w.flush()?;
    Ok(target)
}

fn print_summary(summary: &Summary) {
    let db = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    let q = |v: f64| {
        if v.is_finite() {
            format!("{v:.2}")
        } else {
            format!("{v}")
        }
    };
    println!(
        "{:<16} {:>6} {:>7} {:>11} {:>10} {:>9} {:>9} {:>9}",
        "method", "count", "scored", "unscored", "log-CD dB", "q1", "median", "q3"
    );
    for m in &summary.methods {
        println!(
            "{:<16} {:>6} {:>7} {:>11} {:>10} {:>9} {:>9} {:>9}",
            m.method,
            m.count,
            m.scored,
            m.unscored,
            db(m.mean_log_cd_db),
            q(m.quartiles.q1),
            q(m.quartiles.median),
            q(m.quartiles.q3)
        );
    }
    println!("mean log-CD (dB) by view configuration:");
    for m in &summary.methods {
        let cells: Vec<String> = summary
            .view_grid
            .iter()
            .filter(|c| c.method == m.method)
            .map(|c| format!("{}x{}: {}", c.num_bs, c.num_ue, db(c.mean_log_cd_db)))
            .collect();
        println!("  {:<14} {}", m.method, cells.join("  "));
    }
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    if let Some(s) = &args.split {
        flags.push(("eval.split", string(s)));
    }
    let common = args.common;
    let config = resolve(common.config.as_deref(), flags, &common.overrides)?;
    let split = config.eval.split;
    let needs_data = !args.predictions.is_empty() || !args.latents.is_empty();
    let ds = match &args.data {
        Some(root) => Some(Dataset::open(root).map_err(|e| config_err(format!("dataset {}: {e}", root.display())))?),
        None if needs_data => return Err(config_err("--data is required to score predictions or latent tables")),
        None => None,
    };
    let out = output_dir(common.out, "eval")?;
    std::fs::create_dir_all(&out)?;

    let mut records = Vec::new();
    for path in &args.records {
        let timings = sibling_timings(path)?;
        let mut batch = report::read_records_csv(path)?;
        for r in &mut batch {
            if let Some(&t) = timings.get(&r.sample_id) {
                r.runtime_s = t;
            }
        }
        log::info!("{}: {} records", path.display(), batch.len());
        records.extend(batch);
    }
    if let Some(ds) = &ds {
        for dir in &args.predictions {
            records.extend(score_predictions(ds, dir, split)?);
        }
        for path in &args.latents {
            let target = export_latents(ds, split, path, &out)?;
            println!("latent table {} -> {}", path.display(), target.display());
        }
    }
    if records.is_empty() && !args.latents.is_empty() {
        snapshot("eval", common.config.as_deref(), &out, &common.overrides, &config)?;
        return Ok(());
    }
    let summary = mvsense::metrics::aggregate(&records)?;
    report::write_records_csv(&out.join(RECORDS_FILE), &records)?;
    write_json(&out.join("summary.json"), &summary)?;
    report::write_cdf_csv(&out, &summary)?;
    report::write_view_grid_csv(&out.join("view_grid.csv"), &summary)?;
    snapshot("eval", common.config.as_deref(), &out, &common.overrides, &config)?;
    print_summary(&summary);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_strings() {
        assert_eq!(parse_views("8x16").unwrap(), [8, 16]);
        assert_eq!(parse_views("4X8").unwrap(), [4, 8]);
        assert!(parse_views("8").is_err());
        assert!(parse_views("ax2").is_err());
    }

    #[test]
    fn prediction_file_names() {
        assert_eq!(prediction_id(Path::new("/p/sample_000042.points.bin")), Some(42));
        assert_eq!(prediction_id(Path::new("sample_42.points.bin")), None);
        assert_eq!(prediction_id(Path::new("sample_000042.eps_r.bin")), None);
    }
}
