//! On-disk datasets of paired multi-view CSI and shape-EM point clouds.
//!
//! ```text
//! <root>/manifest.json
//! <root>/samples/000000/
//!     csi.bin               c128 [B, U, N_r, N_c]   exact channels
//!     csi_est.bin           c128 [B, U, N_r, N_c]   LS estimates (when a link is configured)
//!     bs_positions.bin      f64  [B, 2]
//!     antenna_positions.bin f64  [B, N_r, 2]
//!     ue_positions.bin      f64  [U, 2]
//!     scene.bin             f64  [2, N, N]          eps_r then sigma, row iy, column ix
//!     clutter.bin           f64  [K, 5]             x, y, diameter, eps_r, sigma
//!     points_raw.bin        f64  [M, 4]             x, y, eps_r, sigma
//!     points.bin            f64  [M, 4]             normalized with the manifest statistics
//!     meta.json
//! ```
//!
//! The manifest is written last, so a directory without one is incomplete.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::em::{multi_view_channels, ChannelSet, ClutterScatterer, PhysicsConfig, RoiGrid, TargetScene, ViewLayout};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::link::{estimate_channels, PilotConfig};
use crate::par;
use crate::scene_gen::multi_obj::PlacedObject;
use crate::scene_gen::points::Point4;
use crate::scene_gen::{
    gen_clutter, gen_multi_obj, read_idx_images, read_idx_labels, rasterize_with_fill, render_digit,
    sample_scene_points, sample_view_layout, ClutterConfig, DigitStyle, GrayImage, LayoutRanges,
    MaterialRanges, MultiObjConfig, NormAccumulator, NormStats, PointCloud,
};
use crate::tensor::{read_tensor, write_tensor, Tensor};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Independent random streams derived from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sample = 1,
    Link = 2,
    Prediction = 3,
}

/// ChaCha generator for `(seed, purpose, index)`; the index selects the
/// stream, so every sample is reproducible on its own.
pub fn stream_rng(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// One homogeneous handwritten digit per scene.
    Mnist,
    /// Several separated rectangles and cylinders.
    MultiObj,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DigitSource {
    /// Stroke-rendered digits.
    Procedural,
    /// IDX image file, optionally with its label file.
    Idx { images: PathBuf, labels: Option<PathBuf> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    /// 8:1:1 by sample index.
    pub fn for_count(n: usize) -> Self {
        let train = n * 8 / 10;
        let val = n / 10;
        SplitSizes {
            train,
            val,
            test: n - train - val,
        }
    }

    pub fn split_of(&self, index: usize) -> Split {
        if index < self.train {
            Split::Train
        } else if index < self.train + self.val {
            Split::Val
        } else {
            Split::Test
        }
    }

    pub fn indices(&self, split: Split) -> std::ops::Range<usize> {
        match split {
            Split::Train => 0..self.train,
            Split::Val => self.train..self.train + self.val,
            Split::Test => self.train + self.val..self.train + self.val + self.test,
        }
    }
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub num_samples: usize,
    pub seed: u64,
    /// RoI side length in metres.
    pub side_length: f64,
    /// Pixels per RoI side.
    pub resolution: usize,
    pub num_bs: usize,
    pub num_ue: usize,
    /// Points per cloud `M`.
    pub num_points: usize,
    pub physics: PhysicsConfig,
    pub layout: LayoutRanges,
    pub material: MaterialRanges,
    pub multi_obj: MultiObjConfig,
    pub clutter: ClutterConfig,
    /// Inclusive range of clutter scatterer counts.
    pub clutter_count: [usize; 2],
    pub digit_source: DigitSource,
    pub digit_style: DigitStyle,
    /// Fraction of the RoI side covered by a digit image.
    pub digit_fill: f64,
    /// When set, LS-estimated channels are stored next to the exact ones.
    pub link: Option<PilotConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Mnist,
            num_samples: 512,
            seed: 0,
            side_length: 0.5,
            resolution: 64,
            num_bs: 16,
            num_ue: 32,
            num_points: 1000,
            physics: PhysicsConfig::default(),
            layout: LayoutRanges::default(),
            material: MaterialRanges::default(),
            multi_obj: MultiObjConfig::default(),
            clutter: ClutterConfig::default(),
            clutter_count: [0, 0],
            digit_source: DigitSource::Procedural,
            digit_style: DigitStyle::default(),
            digit_fill: 0.8,
            link: None,
        }
    }
}

impl DatasetConfig {
    pub fn grid(&self) -> Result<RoiGrid> {
        RoiGrid::new(self.side_length, self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.layout.validate()?;
        self.material.validate()?;
        self.grid()?;
        if SplitSizes::for_count(self.num_samples).train < 2 {
            return Err(Error::invalid(format!(
                "{} samples leave fewer than 2 for training",
                self.num_samples
            )));
        }
        if self.num_points == 0 {
            return Err(Error::invalid("num_points must be positive"));
        }
        if self.clutter_count[0] > self.clutter_count[1] {
            return Err(Error::invalid("clutter_count range is empty"));
        }
        if !(self.num_bs >= 1 && self.num_bs <= self.layout.max_bs && self.num_ue >= 1 && self.num_ue <= self.layout.max_ue) {
            return Err(Error::invalid(format!(
                "views ({}, {}) exceed the layout limits ({}, {})",
                self.num_bs, self.num_ue, self.layout.max_bs, self.layout.max_ue
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub norm_stats: NormStats,
    pub splits: SplitSizes,
}

/// Per-sample description stored as `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub index: usize,
    pub split: Split,
    /// Digit label, when known.
    pub label: Option<u8>,
    /// Source image index for IDX digits.
    pub image_index: Option<usize>,
    pub objects: Vec<PlacedObject>,
    pub clutter: Vec<ClutterScatterer>,
    pub foreground_pixels: usize,
}

/// A fully simulated sample before it is written.
#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub meta: SampleMeta,
    pub scene: TargetScene,
    pub layout: ViewLayout,
    pub channels: ChannelSet,
    pub estimated: Option<ChannelSet>,
    pub raw_points: Vec<Point4>,
}

/// A sample read back from disk.
#[derive(Clone, Debug)]
pub struct Sample {
    pub meta: SampleMeta,
    pub scene: TargetScene,
    pub layout: ViewLayout,
    pub channels: ChannelSet,
    pub estimated: Option<ChannelSet>,
    pub raw_points: Vec<Point4>,
    pub points: PointCloud,
}

struct DigitBank {
    images: Vec<GrayImage>,
    labels: Option<Vec<u8>>,
}

fn load_digits(source: &DigitSource) -> Result<Option<DigitBank>> {
    match source {
        DigitSource::Procedural => Ok(None),
        DigitSource::Idx { images, labels } => {
            let images = read_idx_images(images)?;
            if images.is_empty() {
                return Err(Error::Format("IDX image file holds no images".into()));
            }
            let labels = labels.as_deref().map(read_idx_labels).transpose()?;
            if labels.as_ref().is_some_and(|l| l.len() != images.len()) {
                return Err(Error::Format("IDX label count differs from image count".into()));
            }
            Ok(Some(DigitBank { images, labels }))
        }
    }
}

fn generate_one(config: &DatasetConfig, grid: &RoiGrid, bank: Option<&DigitBank>, index: usize) -> Result<GeneratedSample> {
    let mut rng = stream_rng(config.seed, Stream::Sample, index as u64);
    let layout = sample_view_layout(&mut rng, config.num_bs, config.num_ue, &config.layout, &config.physics)?;
    let mut label = None;
    let mut image_index = None;
    let mut objects = Vec::new();
    let scene = match config.kind {
        DatasetKind::Mnist => {
            let image = match bank {
                None => {
                    let digit = rng.random_range(0..10u8);
                    label = Some(digit);
                    render_digit(digit, &mut rng, &config.digit_style)?
                }
                Some(bank) => {
                    let i = rng.random_range(0..bank.images.len());
                    image_index = Some(i);
                    label = bank.labels.as_ref().map(|l| l[i]);
                    bank.images[i].clone()
                }
            };
            let (eps_r, sigma) = config.material.sample(&mut rng);
            rasterize_with_fill(&image, eps_r, sigma, grid, config.digit_fill)?
        }
        DatasetKind::MultiObj => {
            let (scene, placed) = gen_multi_obj(&mut rng, grid, &config.multi_obj, &config.material)?;
            objects = placed;
            scene
        }
    };
    let count = rng.random_range(config.clutter_count[0]..=config.clutter_count[1]);
    let clutter = gen_clutter(&mut rng, count, &config.clutter, &config.material)?;
    let scene = scene.with_clutter(clutter.clone())?;
    let raw_points = sample_scene_points(&mut rng, &scene, config.num_points)?;
    let channels = multi_view_channels(&scene, &layout, &config.physics)?;
    let estimated = match &config.link {
        None => None,
        Some(link) => {
            let mut pilot = *link;
            pilot.seed = stream_rng(link.seed, Stream::Link, index as u64).random();
            Some(estimate_channels(&channels, &config.physics, &pilot)?)
        }
    };
    let meta = SampleMeta {
        index,
        split: SplitSizes::for_count(config.num_samples).split_of(index),
        label,
        image_index,
        objects,
        clutter,
        foreground_pixels: scene.foreground_count(),
    };
    Ok(GeneratedSample {
        meta,
        scene,
        layout,
        channels,
        estimated,
        raw_points,
    })
}

/// Simulate sample `index` of the dataset described by `config` without
/// touching the disk.
pub fn generate_sample(config: &DatasetConfig, index: usize) -> Result<GeneratedSample> {
    config.validate()?;
    let bank = load_digits(&config.digit_source)?;
    generate_one(config, &config.grid()?, bank.as_ref(), index).map_err(|e| e.at_sample(index))
}

pub fn sample_dir(root: &Path, index: usize) -> PathBuf {
    root.join("samples").join(format!("{index:06}"))
}

fn points_tensor(points: &[Point4]) -> Result<Tensor> {
    Tensor::f64(vec![points.len(), 4], points.iter().flatten().copied().collect())
}

fn positions_tensor(points: &[Point2]) -> Result<Tensor> {
    Tensor::f64(vec![points.len(), 2], points.iter().flat_map(|p| [p.x, p.y]).collect())
}

fn csi_tensor(set: &ChannelSet) -> Result<Tensor> {
    Tensor::c128(
        vec![set.num_bs(), set.num_ue(), set.num_rx(), set.num_subcarriers()],
        set.to_flat(),
    )
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_sample(root: &Path, s: &GeneratedSample) -> Result<()> {
    let dir = sample_dir(root, s.meta.index);
    std::fs::create_dir_all(&dir)?;
    write_tensor(&dir.join("csi.bin"), &csi_tensor(&s.channels)?)?;
    if let Some(est) = &s.estimated {
        write_tensor(&dir.join("csi_est.bin"), &csi_tensor(est)?)?;
    }
    write_tensor(&dir.join("bs_positions.bin"), &positions_tensor(s.layout.bs_positions())?)?;
    let antennas: Vec<f64> = (0..s.layout.num_bs())
        .flat_map(|b| s.layout.antennas(b).iter().flat_map(|p| [p.x, p.y]))
        .collect();
    write_tensor(
        &dir.join("antenna_positions.bin"),
        &Tensor::f64(vec![s.layout.num_bs(), s.layout.num_rx(), 2], antennas)?,
    )?;
    write_tensor(&dir.join("ue_positions.bin"), &positions_tensor(s.layout.ue_positions())?)?;
    let n = s.scene.grid().resolution();
    let scene: Vec<f64> = s.scene.eps_r().iter().chain(s.scene.sigma()).copied().collect();
    write_tensor(&dir.join("scene.bin"), &Tensor::f64(vec![2, n, n], scene)?)?;
    let clutter: Vec<f64> = s
        .meta
        .clutter
        .iter()
        .flat_map(|c| [c.center.x, c.center.y, c.diameter, c.eps_r, c.sigma])
        .collect();
    write_tensor(&dir.join("clutter.bin"), &Tensor::f64(vec![s.meta.clutter.len(), 5], clutter)?)?;
    write_tensor(&dir.join("points_raw.bin"), &points_tensor(&s.raw_points)?)?;
    write_json(&dir.join("meta.json"), &s.meta)
}

/// Generate, write and normalize a complete dataset under `root`.
///
/// `root` must be absent or empty. Samples are simulated in parallel and
/// written in index order; normalization statistics come from the raw points
/// of the training split and are applied to every split afterwards.
pub fn build_dataset(config: &DatasetConfig, root: &Path) -> Result<Manifest> {
    config.validate()?;
    if root.exists() && std::fs::read_dir(root)?.next().is_some() {
        return Err(Error::invalid(format!("output directory {} is not empty", root.display())));
    }
    std::fs::create_dir_all(root.join("samples"))?;
    let grid = config.grid()?;
    let bank = load_digits(&config.digit_source)?;
    let splits = SplitSizes::for_count(config.num_samples);
    let mut stats = NormAccumulator::default();
    let chunk = 4 * par::num_threads();
    let mut start = 0;
    while start < config.num_samples {
        let len = chunk.min(config.num_samples - start);
        let batch = par::try_map_range(len, |i| {
            generate_one(config, &grid, bank.as_ref(), start + i).map_err(|e| e.at_sample(start + i))
        })?;
        for s in &batch {
            write_sample(root, s).map_err(|e| e.at_sample(s.meta.index))?;
            if s.meta.split == Split::Train {
                stats.push_cloud(&s.raw_points);
            }
        }
        log::info!("generated samples {start}..{}", start + len);
        start += len;
    }
    let norm_stats = stats.finish()?;
    par::try_map_range(config.num_samples, |i| {
        let dir = sample_dir(root, i);
        let raw = read_points(&dir.join("points_raw.bin"))?;
        let normalized: Vec<Point4> = raw.iter().map(|p| norm_stats.normalize(p)).collect();
        write_tensor(&dir.join("points.bin"), &points_tensor(&normalized)?).map_err(|e| e.at_sample(i))
    })?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        norm_stats,
        splits,
    };
    write_json(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Read an `[M, 4]` point tensor.
pub fn read_points(path: &Path) -> Result<Vec<Point4>> {
    let t = read_tensor(path)?;
    t.expect_shape(&[None, Some(4)])?;
    Ok(PointCloud::from_flat(&t.to_f64()?)?.into_points())
}

/// Write an `[M, 4]` point tensor.
pub fn write_points(path: &Path, points: &[Point4]) -> Result<()> {
    write_tensor(path, &points_tensor(points)?)
}

fn read_positions(path: &Path, count: usize) -> Result<Vec<Point2>> {
    let t = read_tensor(path)?;
    t.expect_shape(&[Some(count), Some(2)])?;
    Ok(t.to_f64()?.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
}

/// A dataset directory opened for reading.
#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(root.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "dataset format {} is not supported (expected {FORMAT_VERSION})",
                manifest.format_version
            )));
        }
        manifest.norm_stats.validate()?;
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.config.num_samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> Result<RoiGrid> {
        self.manifest.config.grid()
    }

    pub fn indices(&self, split: Split) -> std::ops::Range<usize> {
        self.manifest.splits.indices(split)
    }

    pub fn load_sample(&self, index: usize) -> Result<Sample> {
        self.load(index).map_err(|e| e.at_sample(index))
    }

    fn load(&self, index: usize) -> Result<Sample> {
        if index >= self.len() {
            return Err(Error::invalid(format!("sample {index} out of range")));
        }
        let dir = sample_dir(&self.root, index);
        let meta: SampleMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        let cfg = &self.manifest.config;
        let grid = cfg.grid()?;
        let (nb, nu, nr) = (cfg.num_bs, cfg.num_ue, cfg.layout.num_rx);
        let bs = read_positions(&dir.join("bs_positions.bin"), nb)?;
        let ue = read_positions(&dir.join("ue_positions.bin"), nu)?;
        let ant = read_tensor(&dir.join("antenna_positions.bin"))?;
        ant.expect_shape(&[Some(nb), Some(nr), Some(2)])?;
        let ant = ant.to_f64()?;
        let antennas = (0..nb)
            .map(|b| (0..nr).map(|r| Point2::new(ant[(b * nr + r) * 2], ant[(b * nr + r) * 2 + 1])).collect())
            .collect();
        let layout = ViewLayout::with_antennas(bs.clone(), antennas, ue.clone())?;
        let read_csi = |name: &str| -> Result<ChannelSet> {
            let t = read_tensor(&dir.join(name))?;
            let nc = cfg.physics.num_subcarriers;
            t.expect_shape(&[Some(nb), Some(nu), Some(nr), Some(nc)])?;
            ChannelSet::from_flat(&t.to_c128()?, [nb, nu, nr, nc], &bs, &ue)
        };
        let channels = read_csi("csi.bin")?;
        let estimated = if dir.join("csi_est.bin").exists() {
            Some(read_csi("csi_est.bin")?)
        } else {
            None
        };
        let n = grid.resolution();
        let scene_t = read_tensor(&dir.join("scene.bin"))?;
        scene_t.expect_shape(&[Some(2), Some(n), Some(n)])?;
        let values = scene_t.to_f64()?;
        let d = n * n;
        let scene = TargetScene::new(grid, values[..d].to_vec(), values[d..].to_vec())?.with_clutter(meta.clutter.clone())?;
        let raw_points = read_points(&dir.join("points_raw.bin"))?;
        let points = PointCloud::new(read_points(&dir.join("points.bin"))?)?;
        Ok(Sample {
            meta,
            scene,
            layout,
            channels,
            estimated,
            raw_points,
            points,
        })
    }

    /// Recompute normalization statistics from the stored training split.
    pub fn recompute_norm_stats(&self) -> Result<NormStats> {
        let mut acc = NormAccumulator::default();
        for i in self.indices(Split::Train) {
            acc.push_cloud(&read_points(&sample_dir(&self.root, i).join("points_raw.bin"))?);
        }
        acc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_eight_one_one() {
        let s = SplitSizes::for_count(50_000);
        assert_eq!((s.train, s.val, s.test), (40_000, 5_000, 5_000));
        let s = SplitSizes::for_count(512);
        assert_eq!((s.train, s.val, s.test), (409, 51, 52));
        assert_eq!(s.split_of(408), Split::Train);
        assert_eq!(s.split_of(409), Split::Val);
        assert_eq!(s.split_of(460), Split::Test);
        assert_eq!(s.indices(Split::Test), 460..512);
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: u64 = stream_rng(5, Stream::Sample, 3).random();
        let b: u64 = stream_rng(5, Stream::Sample, 3).random();
        let c: u64 = stream_rng(5, Stream::Sample, 4).random();
        let d: u64 = stream_rng(5, Stream::Link, 3).random();
        let e: u64 = stream_rng(6, Stream::Sample, 3).random();
        assert_eq!(a, b);
        assert!(a != c && a != d && a != e);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DatasetConfig {
            num_samples: 2,
            ..DatasetConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.num_samples = 3;
        assert!(cfg.validate().is_ok());
        cfg.num_bs = 17;
        assert!(cfg.validate().is_err());
    }
}
