use serde::{Deserialize, Serialize};

use crate::em::{RoiGrid, TargetScene};
use crate::error::{Error, Result};

/// Grayscale image in row-major order, row 0 at the top, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} intensities for a {width}x{height} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image intensities must be finite"));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// 8-bit image scaled to `[0, 1]`.
    pub fn from_u8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&v| v as f64 / 255.0).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centres sit on
    /// integers), replicating the border outside the image.
    pub fn bilinear(&self, col: f64, row: f64) -> f64 {
        let cx = col.clamp(0.0, (self.width - 1) as f64);
        let cy = row.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (cx.floor() as usize, cy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (tx, ty) = (cx - x0 as f64, cy - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
        let bottom = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Continuous image coordinates `(col, row)` of every RoI pixel centre when the
/// image is stretched over a centred square covering `fill` of the RoI side.
pub(crate) fn image_coordinates(image: &GrayImage, grid: &RoiGrid, fill: f64) -> Vec<(f64, f64)> {
    let extent = fill * grid.side_length();
    grid.pixel_centers()
        .into_iter()
        .map(|c| {
            let col = (c.x / extent + 0.5) * image.width() as f64 - 0.5;
            let row = (0.5 - c.y / extent) * image.height() as f64 - 0.5;
            (col, row)
        })
        .collect()
}

/// Homogeneous target from a grayscale image scaled to 80% of the RoI side.
pub fn rasterize_binary_image(
    image: &GrayImage,
    eps_r: f64,
    sigma: f64,
    grid: &RoiGrid,
) -> Result<TargetScene> {
    rasterize_with_fill(image, eps_r, sigma, grid, 0.8)
}

/// Bilinearly resample `image` onto the grid and mark pixels above 0.5 as
/// target with material `(eps_r, sigma)`.
pub fn rasterize_with_fill(
    image: &GrayImage,
    eps_r: f64,
    sigma: f64,
    grid: &RoiGrid,
    fill: f64,
) -> Result<TargetScene> {
    if !(fill > 0.0 && fill.is_finite()) {
        return Err(Error::invalid(format!("fill fraction must be positive, got {fill}")));
    }
    if eps_r == 1.0 && sigma == 0.0 {
        return Err(Error::DegenerateScene("target material equals the background".into()));
    }
    let d = grid.num_pixels();
    let mut eps = vec![1.0; d];
    let mut sig = vec![0.0; d];
    let mut count = 0;
    for (m, (col, row)) in image_coordinates(image, grid, fill).into_iter().enumerate() {
        if image.bilinear(col, row) > 0.5 {
            eps[m] = eps_r;
            sig[m] = sigma;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::DegenerateScene("no pixel exceeds the 0.5 threshold".into()));
    }
    TargetScene::new(grid.clone(), eps, sig)
}
