//! Procedural handwritten-style digit images.
//!
//! Each digit is a fixed set of strokes in a unit box. A random affine map
//! (rotation, shear, anisotropic scale, shift) and a random pen width are
//! applied per draw, and the strokes are rendered with a one-pixel linear
//! falloff onto a 28 x 28 canvas, matching the layout of the common
//! handwritten-digit corpora.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::raster::GrayImage;
use super::Range;
use crate::error::{Error, Result};

pub const CANVAS: usize = 28;

/// Random variation applied to every rendered glyph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitStyle {
    /// Side of the glyph box in canvas pixels before scaling.
    pub box_px: f64,
    /// Maximum absolute rotation in degrees.
    pub max_rotation_deg: f64,
    /// Maximum absolute horizontal shear.
    pub max_shear: f64,
    pub scale: Range,
    /// Pen width in canvas pixels.
    pub thickness: Range,
    /// Maximum absolute shift of the glyph centre in canvas pixels.
    pub max_shift_px: f64,
}

impl Default for DigitStyle {
    fn default() -> Self {
        DigitStyle {
            box_px: 17.5,
            max_rotation_deg: 12.0,
            max_shear: 0.15,
            scale: Range::new(0.85, 1.05),
            thickness: Range::new(2.2, 3.2),
            max_shift_px: 0.75,
        }
    }
}

type Stroke = Vec<(f64, f64)>;

fn line(x0: f64, y0: f64, x1: f64, y1: f64) -> Stroke {
    vec![(x0, y0), (x1, y1)]
}

/// Elliptic arc with angles in degrees, `y` growing downwards.
fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64) -> Stroke {
    let n = (((to - from).abs() / 10.0).ceil() as usize).max(2);
    (0..=n)
        .map(|i| {
            let a = (from + (to - from) * i as f64 / n as f64) * PI / 180.0;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn strokes(digit: u8) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.32, 0.45, 0.0, 360.0)],
        1 => vec![line(0.5, 0.05, 0.5, 0.95), line(0.33, 0.22, 0.5, 0.05)],
        2 => vec![
            arc(0.5, 0.3, 0.3, 0.25, 200.0, 380.0),
            line(0.782, 0.386, 0.2, 0.95),
            line(0.2, 0.95, 0.82, 0.95),
        ],
        3 => vec![
            arc(0.5, 0.28, 0.28, 0.23, 200.0, 450.0),
            arc(0.5, 0.72, 0.3, 0.23, 270.0, 520.0),
        ],
        4 => vec![
            line(0.65, 0.05, 0.15, 0.65),
            line(0.15, 0.65, 0.85, 0.65),
            line(0.65, 0.05, 0.65, 0.95),
        ],
        5 => vec![
            line(0.78, 0.05, 0.28, 0.05),
            line(0.28, 0.05, 0.26, 0.5),
            arc(0.5, 0.68, 0.3, 0.27, 220.0, 500.0),
        ],
        6 => vec![
            arc(0.58, 0.55, 0.33, 0.5, 290.0, 170.0),
            arc(0.5, 0.7, 0.27, 0.25, 0.0, 360.0),
        ],
        7 => vec![line(0.18, 0.05, 0.82, 0.05), line(0.82, 0.05, 0.4, 0.95)],
        8 => vec![
            arc(0.5, 0.27, 0.24, 0.22, 0.0, 360.0),
            arc(0.5, 0.72, 0.29, 0.23, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.3, 0.27, 0.25, 0.0, 360.0),
            line(0.77, 0.3, 0.7, 0.95),
        ],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Render digit `0..=9` on a 28 x 28 canvas with a random style draw.
pub fn render_digit<R: Rng + ?Sized>(digit: u8, rng: &mut R, style: &DigitStyle) -> Result<GrayImage> {
    if digit > 9 {
        return Err(Error::invalid(format!("digit must be 0..=9, got {digit}")));
    }
    let rot = rng.random_range(-1.0..=1.0) * style.max_rotation_deg * PI / 180.0;
    let shear = rng.random_range(-1.0..=1.0) * style.max_shear;
    let sx = style.scale.sample(rng);
    let sy = style.scale.sample(rng);
    let width = style.thickness.sample(rng);
    let shift = (
        rng.random_range(-1.0..=1.0) * style.max_shift_px,
        rng.random_range(-1.0..=1.0) * style.max_shift_px,
    );
    let centre = (CANVAS as f64 - 1.0) / 2.0;
    let (c, s) = (rot.cos(), rot.sin());
    let place = |(gx, gy): (f64, f64)| {
        let x = (gx - 0.5) * style.box_px * sx;
        let y = (gy - 0.5) * style.box_px * sy;
        let x = x + shear * y;
        (c * x - s * y + centre + shift.0, s * x + c * y + centre + shift.1)
    };
    let placed: Vec<Stroke> = strokes(digit)
        .into_iter()
        .map(|st| st.into_iter().map(place).collect())
        .collect();
    let half = 0.5 * width;
    let mut data = vec![0.0; CANVAS * CANVAS];
    for row in 0..CANVAS {
        for col in 0..CANVAS {
            let p = (col as f64, row as f64);
            let dist = placed
                .iter()
                .flat_map(|st| st.windows(2).map(move |w| segment_distance(p, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            data[row * CANVAS + col] = (half + 0.5 - dist).clamp(0.0, 1.0);
        }
    }
    GrayImage::new(CANVAS, CANVAS, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ink(img: &GrayImage) -> usize {
        img.data().iter().filter(|&&v| v > 0.5).count()
    }

    #[test]
    fn every_digit_has_ink_away_from_the_border() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let style = DigitStyle::default();
        for d in 0..10 {
            for _ in 0..20 {
                let img = render_digit(d, &mut rng, &style).unwrap();
                assert!(ink(&img) > 20, "digit {d}");
                for i in 0..CANVAS {
                    for edge in [img.get(i, 0), img.get(i, CANVAS - 1), img.get(0, i), img.get(CANVAS - 1, i)] {
                        assert!(edge < 0.5, "digit {d} touches the border");
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_image() {
        let style = DigitStyle::default();
        let a = render_digit(3, &mut ChaCha8Rng::seed_from_u64(1), &style).unwrap();
        let b = render_digit(3, &mut ChaCha8Rng::seed_from_u64(1), &style).unwrap();
        assert_eq!(a, b);
        assert!(render_digit(10, &mut ChaCha8Rng::seed_from_u64(1), &style).is_err());
    }

    #[test]
    fn digits_are_distinguishable() {
        let style = DigitStyle {
            max_rotation_deg: 0.0,
            max_shear: 0.0,
            scale: Range::new(1.0, 1.0),
            thickness: Range::new(2.2, 3.2),
            max_shift_px: 0.0,
            ..DigitStyle::default()
        };
        let imgs: Vec<_> = (0..10)
            .map(|d| render_digit(d, &mut ChaCha8Rng::seed_from_u64(0), &style).unwrap())
            .collect();
        for a in 0..10 {
            for b in a + 1..10 {
                let diff = imgs[a]
                    .data()
                    .iter()
                    .zip(imgs[b].data())
                    .filter(|(x, y)| (**x > 0.5) != (**y > 0.5))
                    .count();
                assert!(diff > 15, "{a} vs {b}: {diff}");
            }
        }
    }
}
