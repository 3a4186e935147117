//! Training-time augmentation and the deterministic evaluation transform.

use super::image::ImageBuffer;
use super::norm::{normalize, NormStats};
use crate::tensor::{Rng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub hflip_prob: f32,
    pub vflip_prob: f32,
    pub max_rotation_deg: f32,
    pub target_size: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { hflip_prob: 0.5, vflip_prob: 0.5, max_rotation_deg: 10.0, target_size: 224 }
    }
}

impl AugmentConfig {
    pub fn with_target(target_size: usize) -> Self {
        Self { target_size, ..Self::default() }
    }
}

pub fn hflip(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    for row in out.data.chunks_mut(img.width.max(1)) {
        row.reverse();
    }
    out
}

pub fn vflip(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    let (h, w) = (img.height, img.width);
    for c in 0..img.channels {
        for y in 0..h {
            let src = (c * h + (h - 1 - y)) * w;
            let dst = (c * h + y) * w;
            out.data[dst..dst + w].copy_from_slice(&img.data[src..src + w]);
        }
    }
    out
}

/// Bilinear sample at continuous pixel coordinates; outside samples read 0.
fn sample_zero(img: &ImageBuffer, c: usize, y: f32, x: f32) -> f32 {
    let (h, w) = (img.height as isize, img.width as isize);
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let px = |yy: isize, xx: isize| -> f32 {
        if yy < 0 || xx < 0 || yy >= h || xx >= w {
            0.0
        } else {
            img.at(c, yy as usize, xx as usize)
        }
    };
    if fy == 0.0 && fx == 0.0 {
        return px(y0, x0);
    }
    let top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
    let bottom = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Rotation about the image centre by `degrees` (counter-clockwise), bilinear
/// sampling, zero fill. Output size equals input size.
pub fn rotate(img: &ImageBuffer, degrees: f32) -> ImageBuffer {
    if degrees == 0.0 {
        return img.clone();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (img.height as f32 - 1.0) / 2.0;
    let cx = (img.width as f32 - 1.0) / 2.0;
    let mut out = ImageBuffer::filled(img.channels, img.height, img.width, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let (dy, dx) = (y as f32 - cy, x as f32 - cx);
            // inverse map: rotate destination back by -angle
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            for c in 0..img.channels {
                out.data[(c * img.height + y) * img.width + x] = sample_zero(img, c, sy, sx);
            }
        }
    }
    out
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(img: &ImageBuffer, out_h: usize, out_w: usize) -> ImageBuffer {
    if img.height == out_h && img.width == out_w {
        return img.clone();
    }
    let sy = img.height as f32 / out_h as f32;
    let sx = img.width as f32 / out_w as f32;
    let axis = |o: usize, scale: f32, len: usize| -> (usize, usize, f32) {
        let src = ((o as f32 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f32)
    };
    let mut out = ImageBuffer::filled(img.channels, out_h, out_w, 0.0);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, sy, img.height);
        for x in 0..out_w {
            let (x0, x1, fx) = axis(x, sx, img.width);
            for c in 0..img.channels {
                let top = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
                let bottom = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
                out.data[(c * out_h + y) * out_w + x] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Horizontal flip, vertical flip, rotation in `[-max, max]` degrees, then
/// resize to `target_size`. Three draws are taken from `rng` every call so
/// the stream position does not depend on the outcomes.
pub fn augment(img: &ImageBuffer, cfg: &AugmentConfig, rng: &mut Rng) -> ImageBuffer {
    let do_h = rng.bernoulli(cfg.hflip_prob);
    let do_v = rng.bernoulli(cfg.vflip_prob);
    let angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    let mut out = if do_h { hflip(img) } else { img.clone() };
    if do_v {
        out = vflip(&out);
    }
    out = rotate(&out, angle);
    resize_bilinear(&out, cfg.target_size, cfg.target_size)
}

/// Resize and normalize only; no randomness.
pub fn eval_transform(img: &ImageBuffer, target_size: usize, stats: &NormStats) -> Tensor {
    normalize(&resize_bilinear(img, target_size, target_size), stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(h: usize, w: usize, seed: u64) -> ImageBuffer {
        let mut rng = Rng::new(seed);
        ImageBuffer::new(3, h, w, (0..3 * h * w).map(|_| rng.unit()).collect()).unwrap()
    }

    #[test]
    fn flips_are_involutions() {
        let img = random_image(5, 7, 1);
        assert_eq!(hflip(&hflip(&img)), img);
        assert_eq!(vflip(&vflip(&img)), img);
        assert_eq!(hflip(&img).at(1, 2, 0), img.at(1, 2, 6));
        assert_eq!(vflip(&img).at(2, 0, 3), img.at(2, 4, 3));
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img = random_image(9, 9, 2);
        assert_eq!(rotate(&img, 0.0), img);
        let cfg = AugmentConfig { hflip_prob: 0.0, vflip_prob: 0.0, max_rotation_deg: 0.0, target_size: 9 };
        assert_eq!(augment(&img, &cfg, &mut Rng::new(3)), img);
    }

    #[test]
    fn quarter_turn_maps_pixels() {
        let img = random_image(5, 5, 4);
        let r = rotate(&img, 90.0);
        // counter-clockwise: the top-right corner moves to the top-left
        assert!((r.at(0, 0, 0) - img.at(0, 0, 4)).abs() < 1e-5);
        assert!((r.at(0, 2, 2) - img.at(0, 2, 2)).abs() < 1e-6);
    }

    #[test]
    fn rotation_fills_corners_with_zero() {
        let img = ImageBuffer::filled(3, 16, 16, 1.0);
        let r = rotate(&img, 10.0);
        assert_eq!(r.at(0, 0, 0), 0.0);
        assert_eq!(r.at(0, 8, 8), 1.0);
    }

    #[test]
    fn resize_preserves_constant_and_shape() {
        let img = ImageBuffer::filled(3, 10, 13, 0.25);
        let r = resize_bilinear(&img, 224, 224);
        assert_eq!((r.channels, r.height, r.width), (3, 224, 224));
        assert!(r.data.iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn augment_is_seed_deterministic_and_sized() {
        let img = random_image(30, 20, 5);
        let cfg = AugmentConfig::default();
        let a = augment(&img, &cfg, &mut Rng::new(9));
        let b = augment(&img, &cfg, &mut Rng::new(9));
        assert_eq!(a, b);
        assert_eq!((a.channels, a.height, a.width), (3, 224, 224));
    }
}
