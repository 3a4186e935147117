//! Three-class synthetic image set standing in for the X-ray classes at desk
//! scale. Each class draws from its own pattern family:
//!
//! | class             | pattern                                   |
//! |-------------------|-------------------------------------------|
//! | `Lung_Opacity`    | a few bright Gaussian blobs on dark ground |
//! | `Normal`          | horizontal bars                           |
//! | `Viral_Pneumonia` | mid-grey per-pixel noise texture          |

use std::fs;
use std::path::Path;

use crate::data::RawImage;
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const CLASS_NAMES: [&str; 3] = ["Lung_Opacity", "Normal", "Viral_Pneumonia"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Blobs,
    Bars,
    Noise,
}

impl Pattern {
    pub fn for_class(label: usize) -> Pattern {
        match label {
            0 => Pattern::Blobs,
            1 => Pattern::Bars,
            _ => Pattern::Noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub images_per_class: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { images_per_class: 150, image_size: 64, seed: 7 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.images_per_class == 0 {
            return Err(Error::Config("images_per_class must be positive".into()));
        }
        if !(8..=u16::MAX as usize).contains(&self.image_size) {
            return Err(Error::Config(format!("image_size must be in [8, 65535], got {}", self.image_size)));
        }
        Ok(())
    }
}

/// Grayscale sample of `pattern`, values in `[0, 1]`.
pub fn render(pattern: Pattern, size: usize, rng: &mut Rng) -> Vec<f32> {
    let mut px = vec![0.0f32; size * size];
    match pattern {
        Pattern::Bars => {
            let bg = rng.uniform(0.15, 0.25);
            let fg = rng.uniform(0.75, 0.85);
            let period = (size / 8).max(2);
            for y in 0..size {
                let on = y % period < period / 2;
                px[y * size..(y + 1) * size].fill(if on { fg } else { bg });
            }
        }
        Pattern::Blobs => {
            let bg = rng.uniform(0.05, 0.15);
            px.fill(bg);
            let count = 2 + rng.below(2);
            let s = size as f32;
            for _ in 0..count {
                let cy = rng.uniform(0.25 * s, 0.75 * s);
                let cx = rng.uniform(0.25 * s, 0.75 * s);
                let sigma = rng.uniform(s / 10.0, s / 6.0);
                let amp = rng.uniform(0.6, 0.8);
                for y in 0..size {
                    for x in 0..size {
                        let d2 = (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2);
                        px[y * size + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
        }
        Pattern::Noise => {
            for v in &mut px {
                *v = 0.5 + rng.uniform(-0.15, 0.15);
            }
            return px;
        }
    }
    for v in &mut px {
        *v = (*v + rng.uniform(-0.03, 0.03)).clamp(0.0, 1.0);
    }
    px
}

/// One 8-bit grayscale sample for `label`, keyed by `(seed, label, index)`.
pub fn sample(spec: &SyntheticSpec, label: usize, index: usize) -> RawImage {
    let mut rng = Rng::derive(spec.seed, label as u64, index as u64);
    let size = spec.image_size;
    let pixels = render(Pattern::for_class(label), size, &mut rng)
        .into_iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    RawImage { height: size as u16, width: size as u16, channels: 1, pixels }
}

/// Writes `out/<Class>/<class>_<index>.nnim` for every class and index.
pub fn generate(spec: &SyntheticSpec, out: &Path) -> Result<usize> {
    spec.validate()?;
    let mut written = 0;
    for (label, name) in CLASS_NAMES.iter().enumerate() {
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        for i in 0..spec.images_per_class {
            let file = dir.join(format!("{}_{i:04}.nnim", name.to_ascii_lowercase()));
            fs::write(file, sample(spec, label, i).encode())?;
            written += 1;
        }
    }
    Ok(written)
}
