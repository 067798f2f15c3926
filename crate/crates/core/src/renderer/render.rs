use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{sample_ray, Camera, Ray};
use super::image::{save_float_map, RgbImage};
use super::weights::{alphas_from_sdf, composite_alphas};
use crate::error::{precondition, Error, Result};
use crate::field::SdfField;
use crate::math::{Rgb, Vec3};

/// How pixels not covered by the field are filled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackgroundPolicy {
    White,
    Black,
    /// Independent per-pixel, per-channel normal noise clamped to [0,1].
    Noise { mean: f64, std: f64 },
}

impl BackgroundPolicy {
    pub fn gaussian() -> Self {
        BackgroundPolicy::Noise { mean: 0.5, std: 0.1 }
    }

    /// Concrete background colors for `n` pixels.
    pub fn realize(&self, n: usize, seed: u64) -> Vec<Rgb> {
        match *self {
            BackgroundPolicy::White => vec![[1.0; 3]; n],
            BackgroundPolicy::Black => vec![[0.0; 3]; n],
            BackgroundPolicy::Noise { mean, std } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(mean, std).expect("valid noise parameters");
                (0..n)
                    .map(|_| {
                        [
                            normal.sample(&mut rng).clamp(0.0, 1.0),
                            normal.sample(&mut rng).clamp(0.0, 1.0),
                            normal.sample(&mut rng).clamp(0.0, 1.0),
                        ]
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    /// Stratified samples per ray.
    pub samples: usize,
    pub jitter: bool,
    /// Samples whose weight falls below this skip the radiance query.
    pub weight_cutoff: f64,
    /// Pixels with opacity below this are flagged as background and take
    /// the background color exactly.
    pub background_epsilon: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            samples: 128,
            jitter: false,
            weight_cutoff: 1e-7,
            background_epsilon: 1e-4,
        }
    }
}

impl RenderSettings {
    pub fn with_samples(samples: usize) -> Self {
        Self {
            samples,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelSample {
    pub rgb: Rgb,
    pub opacity: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub rgb: RgbImage,
    /// Accumulated ray opacity per pixel.
    pub opacity: Vec<f64>,
    /// Opacity-weighted expected termination distance per pixel.
    pub depth: Vec<f64>,
    pub background: Vec<bool>,
}

impl RenderOutput {
    pub fn width(&self) -> usize {
        self.rgb.width
    }

    pub fn height(&self) -> usize {
        self.rgb.height
    }

    pub(crate) fn from_rows(width: usize, height: usize, rows: Vec<Vec<PixelSample>>, bgs: &[Rgb], eps: f64) -> Self {
        let mut rgb = RgbImage::new(width, height);
        let mut opacity = Vec::with_capacity(width * height);
        let mut depth = Vec::with_capacity(width * height);
        let mut background = Vec::with_capacity(width * height);
        for (i, px) in rows.into_iter().flatten().enumerate() {
            let is_bg = px.opacity < eps;
            rgb.pixels[i] = if is_bg { bgs[i] } else { px.rgb };
            opacity.push(px.opacity);
            depth.push(px.depth);
            background.push(is_bg);
        }
        Self {
            rgb,
            opacity,
            depth,
            background,
        }
    }

    /// Binary silhouette at the given opacity threshold.
    pub fn silhouette(&self, threshold: f64) -> Vec<bool> {
        self.opacity.iter().map(|o| *o > threshold).collect()
    }

    /// `<dir>/<stem>.png`, plus `<stem>_opacity` and optionally
    /// `<stem>_depth` float maps.
    pub fn save(&self, dir: impl AsRef<std::path::Path>, stem: &str, with_depth: bool) -> Result<()> {
        let dir = dir.as_ref();
        self.rgb.save_png(dir.join(format!("{stem}.png")))?;
        save_float_map(dir, &format!("{stem}_opacity"), self.width(), self.height(), &self.opacity)?;
        if with_depth {
            save_float_map(dir, &format!("{stem}_depth"), self.width(), self.height(), &self.depth)?;
        }
        Ok(())
    }
}

/// Alpha-composite one ray given SDF samples, an optional per-sample
/// density mask, and a lazily evaluated radiance.
pub(crate) fn integrate(
    t: &[f64],
    sdf: &[f64],
    sharpness: f64,
    mask: Option<&[f64]>,
    weight_cutoff: f64,
    background: Rgb,
    scratch: &mut (Vec<f64>, Vec<f64>),
    mut radiance: impl FnMut(usize) -> Rgb,
) -> PixelSample {
    let (alphas, weights) = scratch;
    alphas_from_sdf(sdf, sharpness, alphas);
    if let Some(mask) = mask {
        for (a, m) in alphas.iter_mut().zip(mask) {
            *a *= m;
        }
    }
    composite_alphas(alphas, weights);
    let mut rgb = [0.0; 3];
    let mut opacity = 0.0;
    let mut depth = 0.0;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        opacity += w;
        depth += w * t[i];
        if *w > weight_cutoff {
            let c = radiance(i);
            for k in 0..3 {
                rgb[k] += w * c[k];
            }
        }
    }
    for k in 0..3 {
        rgb[k] += (1.0 - opacity) * background[k];
    }
    PixelSample {
        rgb,
        opacity,
        depth: depth / opacity.max(1e-10),
    }
}

pub(crate) fn render_ray(field: &(impl SdfField + ?Sized), ray: &Ray, background: Rgb, cutoff: f64) -> Result<PixelSample> {
    let sdf: Vec<f64> = ray.points().map(|p| field.distance(&p)).collect();
    if let Some(i) = sdf.iter().position(|v| !v.is_finite()) {
        let p = ray.at(ray.t[i]);
        return Err(Error::Numeric(format!("field distance at ({}, {}, {})", p.x, p.y, p.z)));
    }
    let mut scratch = (Vec::with_capacity(sdf.len()), Vec::with_capacity(sdf.len()));
    Ok(integrate(&ray.t, &sdf, field.sharpness(), None, cutoff, background, &mut scratch, |i| {
        field.radiance(&ray.at(ray.t[i]), &ray.direction)
    }))
}

/// Color, opacity and expected depth of one ray (every sample's radiance is
/// evaluated).
pub fn render_pixel(field: &(impl SdfField + ?Sized), ray: &Ray, background: Rgb) -> Result<PixelSample> {
    render_ray(field, ray, background, 0.0)
}

/// Deterministic per-pixel RNG so parallel renders do not depend on thread
/// scheduling.
pub(crate) fn pixel_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Render the strided pixel grid of `camera`.
pub fn render_image(
    field: &(impl SdfField + ?Sized),
    camera: &Camera,
    stride: usize,
    background: BackgroundPolicy,
    settings: &RenderSettings,
    seed: u64,
) -> Result<RenderOutput> {
    let bgs = background.realize(
        camera.strided_dims(stride.max(1)).0 * camera.strided_dims(stride.max(1)).1,
        seed ^ 0xB6,
    );
    render_image_with_background(field, camera, stride, &bgs, settings, seed)
}

/// Render against explicit per-pixel background colors.
pub fn render_image_with_background(
    field: &(impl SdfField + ?Sized),
    camera: &Camera,
    stride: usize,
    backgrounds: &[Rgb],
    settings: &RenderSettings,
    seed: u64,
) -> Result<RenderOutput> {
    if stride == 0 {
        return Err(precondition("stride must be positive"));
    }
    let (rows, cols) = camera.strided_dims(stride);
    if backgrounds.len() != rows * cols {
        return Err(crate::error::shape_mismatch(rows * cols, backgrounds.len()));
    }
    let out: Result<Vec<Vec<PixelSample>>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let idx = r * cols + c;
                    let ray = if settings.jitter {
                        let mut rng = pixel_rng(seed, idx);
                        sample_ray(camera, (r, c), settings.samples, stride, Some(&mut rng))?
                    } else {
                        sample_ray(camera, (r, c), settings.samples, stride, None)?
                    };
                    render_ray(field, &ray, backgrounds[idx], settings.weight_cutoff)
                })
                .collect()
        })
        .collect();
    Ok(RenderOutput::from_rows(cols, rows, out?, backgrounds, settings.background_epsilon))
}

/// Opacity-only render (no radiance queries).
pub fn render_opacity(field: &(impl SdfField + ?Sized), camera: &Camera, stride: usize, samples: usize) -> Result<Vec<f64>> {
    let (rows, cols) = camera.strided_dims(stride);
    let s = field.sharpness();
    (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let ray = sample_ray(camera, (idx / cols, idx % cols), samples, stride, None)?;
            let sdf: Vec<f64> = ray.points().map(|p| field.distance(&p)).collect();
            let mut alphas = Vec::new();
            alphas_from_sdf(&sdf, s, &mut alphas);
            Ok(1.0 - alphas.iter().fold(1.0, |t, a| t * (1.0 - a)))
        })
        .collect()
}

/// Intersection-over-union of two binary masks.
pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.iter().zip(b) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Uniform random unit vector, used by tests and samplers.
pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
