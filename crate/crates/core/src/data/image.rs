use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NNIM_MAGIC: &[u8; 4] = b"NNIM";

/// Planar (C, H, W) image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "image buffer {channels}×{height}×{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// (C, H, W) tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.channels, self.height, self.width], self.data.clone()).expect("consistent buffer")
    }
}

/// Raw 8-bit image in the NNIM fixture format:
/// `"NNIM" | height u16 LE | width u16 LE | channels u8 | row-major interleaved u8 samples`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    pub height: u16,
    pub width: u16,
    pub channels: u8,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.pixels.len());
        out.extend_from_slice(NNIM_MAGIC);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.push(self.channels);
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 || &bytes[..4] != NNIM_MAGIC {
            return Err(Error::Decode("not an NNIM image".into()));
        }
        let height = u16::from_le_bytes([bytes[4], bytes[5]]);
        let width = u16::from_le_bytes([bytes[6], bytes[7]]);
        let channels = bytes[8];
        if !(channels == 1 || channels == 3) {
            return Err(Error::Decode(format!("NNIM channel count must be 1 or 3, got {channels}")));
        }
        let expected = height as usize * width as usize * channels as usize;
        let pixels = &bytes[9..];
        if pixels.len() != expected {
            return Err(Error::Decode(format!("NNIM payload has {} bytes, expected {expected}", pixels.len())));
        }
        Ok(Self { height, width, channels, pixels: pixels.to_vec() })
    }

    /// Scales to `[0, 1]` and replicates grayscale into three channels.
    pub fn to_buffer(&self) -> ImageBuffer {
        from_interleaved(self.height as usize, self.width as usize, self.channels as usize, &self.pixels)
    }
}

fn from_interleaved(h: usize, w: usize, channels: usize, pixels: &[u8]) -> ImageBuffer {
    let mut data = vec![0.0f32; 3 * h * w];
    for p in 0..h * w {
        for c in 0..3 {
            let src = if channels == 1 { pixels[p] } else { pixels[p * channels + c] };
            data[c * h * w + p] = src as f32 / 255.0;
        }
    }
    ImageBuffer { channels: 3, height: h, width: w, data }
}

/// Decodes PNG/JPEG (8-bit gray or RGB) or NNIM into a 3-channel `[0, 1]` buffer.
pub fn decode_image(path: &Path) -> Result<ImageBuffer> {
    let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    let bytes = fs::read(path)?;
    if ext.as_deref() == Some("nnim") || bytes.starts_with(NNIM_MAGIC) {
        return Ok(RawImage::decode(&bytes)?.to_buffer());
    }
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(if img.color().has_color() {
        from_interleaved(h, w, 3, img.to_rgb8().as_raw())
    } else {
        from_interleaved(h, w, 1, img.to_luma8().as_raw())
    })
}
