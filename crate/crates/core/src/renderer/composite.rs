//! Occlusion-aware compositing of the avatar with a second volumetric scene
//! by a per-pixel depth test.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{sample_ray, Camera};
use super::render::{render_ray, BackgroundPolicy, PixelSample, RenderOutput, RenderSettings};
use crate::error::{precondition, Result};
use crate::field::SdfField;
use crate::math::{transform_point, Mat4, Rgb, Vec3};

/// Solid primitive of a composite scene, rendered through its own SDF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenePrimitive {
    Sphere { center: [f64; 3], radius: f64, color: Rgb },
    Box { min: [f64; 3], max: [f64; 3], color: Rgb },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64, color: Rgb },
}

impl ScenePrimitive {
    fn distance(&self, p: &Vec3) -> f64 {
        match self {
            ScenePrimitive::Sphere { center, radius, .. } => (p - Vec3::from(*center)).norm() - radius,
            ScenePrimitive::Box { min, max, .. } => {
                let c = (Vec3::from(*min) + Vec3::from(*max)) * 0.5;
                let h = (Vec3::from(*max) - Vec3::from(*min)) * 0.5;
                let q = (p - c).abs() - h;
                q.sup(&Vec3::zeros()).norm() + q.max().min(0.0)
            }
            ScenePrimitive::Capsule { a, b, radius, .. } => {
                let (a, b) = (Vec3::from(*a), Vec3::from(*b));
                let ab = b - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-300)).clamp(0.0, 1.0);
                (p - (a + ab * t)).norm() - radius
            }
        }
    }

    fn color(&self) -> Rgb {
        match self {
            ScenePrimitive::Sphere { color, .. } | ScenePrimitive::Box { color, .. } | ScenePrimitive::Capsule { color, .. } => *color,
        }
    }
}

/// A scene made of solid primitives, placed into the avatar's world frame
/// by `alignment` (scene-local to world).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityScene {
    #[serde(default = "default_scene_sharpness")]
    pub sharpness: f64,
    /// Row-major 4x4 scene-to-world transform.
    #[serde(default)]
    pub alignment: Option<[[f64; 4]; 4]>,
    #[serde(default)]
    pub primitives: Vec<ScenePrimitive>,
}

fn default_scene_sharpness() -> f64 {
    64.0
}

impl DensityScene {
    pub fn new(primitives: Vec<ScenePrimitive>, sharpness: f64) -> Self {
        Self {
            sharpness,
            alignment: Some(identity_rows()),
            primitives,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), default_scene_sharpness())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// The scene as a field in world coordinates.
    pub fn aligned(&self) -> Result<AlignedScene<'_>> {
        let rows = self
            .alignment
            .ok_or_else(|| precondition("composite scene has no alignment transform to the avatar frame"))?;
        let m = Mat4::from_fn(|r, c| rows[r][c]);
        let inverse = m
            .try_inverse()
            .ok_or_else(|| precondition("scene alignment transform is not invertible"))?;
        Ok(AlignedScene { scene: self, inverse })
    }

    fn nearest(&self, p: &Vec3) -> Option<(f64, &ScenePrimitive)> {
        self.primitives
            .iter()
            .map(|prim| (prim.distance(p), prim))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn identity_rows() -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// [`DensityScene`] viewed in the world frame.
pub struct AlignedScene<'a> {
    scene: &'a DensityScene,
    inverse: Mat4,
}

impl SdfField for AlignedScene<'_> {
    fn distance(&self, x: &Vec3) -> f64 {
        // far-away constant keeps an empty scene fully transparent
        let local = transform_point(&self.inverse, x);
        self.scene.nearest(&local).map_or(1e3, |(d, _)| d)
    }

    fn radiance(&self, x: &Vec3, _d: &Vec3) -> Rgb {
        let local = transform_point(&self.inverse, x);
        self.scene.nearest(&local).map_or([0.0; 3], |(_, p)| p.color())
    }

    fn sharpness(&self) -> f64 {
        self.scene.sharpness
    }
}

/// Which representation supplied a composited pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    Avatar,
    Scene,
    /// Neither is opaque enough; both were blended over the background.
    Blend,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeOutput {
    pub render: RenderOutput,
    pub winner: Vec<Winner>,
}

fn over(front: &PixelSample, back: &PixelSample, bg: Rgb) -> Rgb {
    // each pixel's rgb already contains (1 - O) * bg; strip it to get the
    // premultiplied color
    let mut out = [0.0; 3];
    for k in 0..3 {
        let f = front.rgb[k] - (1.0 - front.opacity) * bg[k];
        let b = back.rgb[k] - (1.0 - back.opacity) * bg[k];
        out[k] = f + (1.0 - front.opacity) * (b + (1.0 - back.opacity) * bg[k]);
    }
    out
}

fn pick(avatar: PixelSample, scene: PixelSample, bg: Rgb, tau: f64, eps: f64) -> (PixelSample, Winner) {
    let a_hit = avatar.opacity > tau;
    let s_hit = scene.opacity > tau;
    match (a_hit, s_hit) {
        (true, true) if avatar.depth <= scene.depth => (avatar, Winner::Avatar),
        (true, true) => (scene, Winner::Scene),
        (true, false) => (avatar, Winner::Avatar),
        (false, true) => (scene, Winner::Scene),
        (false, false) => {
            if scene.opacity < eps {
                return (avatar, Winner::Blend);
            }
            if avatar.opacity < eps {
                return (scene, Winner::Blend);
            }
            let (front, back) = if avatar.depth <= scene.depth { (&avatar, &scene) } else { (&scene, &avatar) };
            let opacity = 1.0 - (1.0 - front.opacity) * (1.0 - back.opacity);
            let sample = PixelSample {
                rgb: over(front, back, bg),
                opacity,
                depth: front.depth.min(back.depth),
            };
            (sample, Winner::Blend)
        }
    }
}

/// Render avatar and scene independently along the same rays and keep,
/// per pixel, the opaque one closer to the camera.
pub fn composite_render(
    avatar: &(impl SdfField + ?Sized),
    scene: &DensityScene,
    camera: &Camera,
    background: BackgroundPolicy,
    settings: &RenderSettings,
    occupancy_threshold: f64,
    seed: u64,
) -> Result<CompositeOutput> {
    let scene = scene.aligned()?;
    let (rows, cols) = camera.strided_dims(1);
    let bgs = background.realize(rows * cols, seed ^ 0xB6);
    let pixels: Result<Vec<(PixelSample, Winner)>> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let ray = sample_ray(camera, (idx / cols, idx % cols), settings.samples, 1, None)?;
            let a = render_ray(avatar, &ray, bgs[idx], settings.weight_cutoff)?;
            let s = render_ray(&scene, &ray, bgs[idx], settings.weight_cutoff)?;
            Ok(pick(a, s, bgs[idx], occupancy_threshold, settings.background_epsilon))
        })
        .collect();
    let (samples, winner): (Vec<PixelSample>, Vec<Winner>) = pixels?.into_iter().unzip();
    let render = RenderOutput::from_rows(cols, rows, vec![samples], &bgs, settings.background_epsilon);
    Ok(CompositeOutput { render, winner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SphereSdf;
    use crate::renderer::render::render_image;

    fn camera() -> Camera {
        Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 0.9, 24, 24, 1.0, 5.0).unwrap()
    }

    #[test]
    fn empty_scene_matches_avatar_render() {
        let avatar = SphereSdf::unit(64.0);
        let s = RenderSettings::with_samples(64);
        let plain = render_image(&avatar, &camera(), 1, BackgroundPolicy::White, &s, 5).unwrap();
        let comp = composite_render(&avatar, &DensityScene::empty(), &camera(), BackgroundPolicy::White, &s, 0.5, 5).unwrap();
        assert_eq!(plain.rgb, comp.render.rgb);
        assert_eq!(plain.opacity, comp.render.opacity);
    }

    #[test]
    fn slab_in_front_hides_the_avatar() {
        let avatar = SphereSdf::unit(64.0);
        let scene = DensityScene::new(
            vec![ScenePrimitive::Box {
                min: [-10.0, -10.0, 1.6],
                max: [10.0, 10.0, 1.8],
                color: [0.0, 0.3, 0.9],
            }],
            200.0,
        );
        let s = RenderSettings::with_samples(96);
        let comp = composite_render(&avatar, &scene, &camera(), BackgroundPolicy::Black, &s, 0.5, 0).unwrap();
        let only = render_image(&scene.aligned().unwrap(), &camera(), 1, BackgroundPolicy::Black, &s, 0).unwrap();
        assert_eq!(comp.render.rgb, only.rgb);
        assert!(comp.winner.iter().all(|w| *w == Winner::Scene));
    }

    #[test]
    fn missing_alignment_is_rejected() {
        let mut scene = DensityScene::empty();
        scene.alignment = None;
        let r = composite_render(&SphereSdf::unit(8.0), &scene, &camera(), BackgroundPolicy::White, &RenderSettings::with_samples(8), 0.5, 0);
        assert!(matches!(r, Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn scene_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = DensityScene::new(vec![ScenePrimitive::Sphere { center: [0.0, 1.0, 0.0], radius: 0.3, color: [1.0, 1.0, 0.0] }], 50.0);
        let p = dir.path().join("scene.json");
        scene.save(&p).unwrap();
        assert_eq!(DensityScene::load(&p).unwrap(), scene);
    }
}
