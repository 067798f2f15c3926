//! Image buffers and their on-disk formats: 8-bit PNG for color, raw
//! little-endian `f32` with a JSON sidecar for scalar maps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::math::Rgb;

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels.
    pub pixels: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(shape_mismatch(width * height, pixels.len()));
        }
        Ok(Self { width, height, pixels })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn same_shape(&self, other: &RgbImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(shape_mismatch(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        Ok(())
    }

    /// Mean squared error over all channels.
    pub fn mse(&self, other: &RgbImage) -> Result<f64> {
        self.same_shape(other)?;
        let mut acc = 0.0;
        for (a, b) in self.pixels.iter().zip(&other.pixels) {
            for k in 0..3 {
                acc += (a[k] - b[k]).powi(2);
            }
        }
        Ok(acc / (3 * self.pixels.len()) as f64)
    }

    pub fn psnr(&self, other: &RgbImage) -> Result<f64> {
        Ok(crate::math::psnr(self.mse(other)?))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        writer.write_image_data(&bytes).map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let decoder = png::Decoder::new(File::open(path)?);
        let mut reader = decoder.read_info().map_err(|e| Error::Format(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::Format("only 8-bit RGB PNG images are supported".into()));
        }
        let pixels = buf[..info.buffer_size()]
            .chunks_exact(3)
            .map(|c| [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0])
            .collect();
        Self::from_pixels(info.width as usize, info.height as usize, pixels)
    }
}

/// Bilinear sampling position in a coarse grid whose cell `i` sits at fine
/// coordinate `i * stride + offset`.
#[inline]
fn source_coord(fine: usize, stride: usize, offset: usize, n: usize) -> (usize, usize, f64) {
    let s = ((fine as f64 - offset as f64) / stride as f64).clamp(0.0, (n - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear upsampling of a strided render to full resolution.
pub fn upsample_bilinear(src: &RgbImage, stride: usize, width: usize, height: usize) -> RgbImage {
    let o = (stride - 1) / 2;
    upsample_bilinear_at(src, stride, (o, o), width, height)
}

/// [`upsample_bilinear`] for a grid whose cell `(r, c)` was sampled at
/// full-resolution pixel `(r * stride + offset.0, c * stride + offset.1)`.
pub fn upsample_bilinear_at(src: &RgbImage, stride: usize, offset: (usize, usize), width: usize, height: usize) -> RgbImage {
    if stride == 1 && src.width == width && src.height == height {
        return src.clone();
    }
    let mut out = RgbImage::new(width, height);
    for r in 0..height {
        let (r0, r1, fr) = source_coord(r, stride, offset.0, src.height);
        for c in 0..width {
            let (c0, c1, fc) = source_coord(c, stride, offset.1, src.width);
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = (1.0 - fr) * ((1.0 - fc) * src.get(r0, c0)[k] + fc * src.get(r0, c1)[k])
                    + fr * ((1.0 - fc) * src.get(r1, c0)[k] + fc * src.get(r1, c1)[k]);
            }
            out.pixels[r * width + c] = p;
        }
    }
    out
}

/// Transpose of [`upsample_bilinear`]: pulls full-resolution gradients
/// back onto the strided grid.
pub fn upsample_bilinear_transpose(grad: &[Rgb], stride: usize, width: usize, height: usize, src_width: usize, src_height: usize) -> Vec<Rgb> {
    let o = (stride - 1) / 2;
    upsample_bilinear_transpose_at(grad, stride, (o, o), width, height, src_width, src_height)
}

/// Transpose of [`upsample_bilinear_at`].
pub fn upsample_bilinear_transpose_at(
    grad: &[Rgb],
    stride: usize,
    offset: (usize, usize),
    width: usize,
    height: usize,
    src_width: usize,
    src_height: usize,
) -> Vec<Rgb> {
    if stride == 1 && src_width == width && src_height == height {
        return grad.to_vec();
    }
    let mut out = vec![[0.0; 3]; src_width * src_height];
    for r in 0..height {
        let (r0, r1, fr) = source_coord(r, stride, offset.0, src_height);
        for c in 0..width {
            let (c0, c1, fc) = source_coord(c, stride, offset.1, src_width);
            let g = grad[r * width + c];
            let taps = [
                (r0, c0, (1.0 - fr) * (1.0 - fc)),
                (r0, c1, (1.0 - fr) * fc),
                (r1, c0, fr * (1.0 - fc)),
                (r1, c1, fr * fc),
            ];
            for (rr, cc, w) in taps {
                let dst = &mut out[rr * src_width + cc];
                for k in 0..3 {
                    dst[k] += w * g[k];
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FloatMapHeader {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub layout: String,
}

/// Write `<stem>.f32` (little-endian, row-major) and `<stem>.json`.
pub fn save_float_map(dir: impl AsRef<Path>, stem: &str, width: usize, height: usize, data: &[f64]) -> Result<()> {
    if data.len() != width * height {
        return Err(shape_mismatch(width * height, data.len()));
    }
    let dir = dir.as_ref();
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.f32")))?);
    for v in data {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    let header = FloatMapHeader {
        name: stem.to_string(),
        width,
        height,
        dtype: "f32le".into(),
        layout: "row-major".into(),
    };
    std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

pub fn load_float_map(dir: impl AsRef<Path>, stem: &str) -> Result<(FloatMapHeader, Vec<f32>)> {
    let dir = dir.as_ref();
    let header: FloatMapHeader = serde_json::from_slice(&std::fs::read(dir.join(format!("{stem}.json")))?)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.f32")))?;
    if bytes.len() != 4 * header.width * header.height {
        return Err(Error::Format(format!("float map `{stem}` has the wrong byte length")));
    }
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((header, data))
}
