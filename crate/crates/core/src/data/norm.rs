use super::image::ImageBuffer;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Lower bound applied to per-channel standard deviations.
pub const STD_FLOOR: f32 = 1e-6;

/// Per-channel normalization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; 3], std: [1.0; 3] }
    }
}

/// Population mean and standard deviation per channel over every pixel of
/// the given (already resized) images.
pub fn compute_norm_stats<'a>(images: impl IntoIterator<Item = &'a ImageBuffer>) -> Result<NormStats> {
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut count = 0usize;
    for img in images {
        if img.channels != 3 {
            return Err(Error::Shape(format!("norm stats need 3-channel images, got {}", img.channels)));
        }
        for c in 0..3 {
            for &v in img.plane(c) {
                sum[c] += v as f64;
                sum_sq[c] += v as f64 * v as f64;
            }
        }
        count += img.height * img.width;
    }
    if count == 0 {
        return Err(Error::Data("cannot compute normalization statistics of an empty split".into()));
    }
    let mut stats = NormStats { mean: [0.0; 3], std: [0.0; 3] };
    for c in 0..3 {
        let mean = sum[c] / count as f64;
        let var = (sum_sq[c] / count as f64 - mean * mean).max(0.0);
        stats.mean[c] = mean as f32;
        stats.std[c] = (var.sqrt() as f32).max(STD_FLOOR);
    }
    Ok(stats)
}

/// `(img[c] - mean[c]) / std[c]` as a (3, H, W) tensor.
pub fn normalize(img: &ImageBuffer, stats: &NormStats) -> Tensor {
    let plane = img.height * img.width;
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i / plane.max(1);
            (v - stats.mean[c]) / stats.std[c]
        })
        .collect();
    Tensor::new(&[img.channels, img.height, img.width], data).expect("consistent buffer")
}
