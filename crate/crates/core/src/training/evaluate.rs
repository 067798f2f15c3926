use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::SdfField;
use crate::guidance::BodyPart;
use crate::renderer::{render_image_with_background, render_opacity, Camera, RenderSettings};
use crate::training::losses::silhouette_iou;
use crate::training::{CameraSampler, MeshTargets, SceneBoxes};

/// A fixed, seeded set of body cameras for evaluation.
pub fn evaluation_cameras(boxes: &SceneBoxes, sampler: &CameraSampler, count: usize, seed: u64) -> Result<Vec<Camera>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Ok(sampler.sample(&mut rng, boxes, BodyPart::Body)?.camera)).collect()
}

/// Smallest per-camera IoU of the `opacity > 0.5` silhouettes.
pub fn silhouette_agreement(
    field: &(impl SdfField + ?Sized),
    template: &(impl SdfField + ?Sized),
    cameras: &[Camera],
    samples: usize,
) -> Result<f64> {
    let mut worst: f64 = 1.0;
    for cam in cameras {
        let a = render_opacity(field, cam, 1, samples)?;
        let b = render_opacity(template, cam, 1, samples)?;
        worst = worst.min(silhouette_iou(&a, &b, 0.5));
    }
    Ok(worst)
}

/// PSNR of white-background renders against the targets, pooled over
/// all cameras.
pub fn target_psnr(field: &(impl SdfField + ?Sized), targets: &MeshTargets, cameras: &[Camera], samples: usize) -> Result<f64> {
    let settings = RenderSettings::with_samples(samples);
    let mut sq = 0.0;
    let mut n = 0usize;
    for cam in cameras {
        let bgs = vec![[1.0; 3]; cam.width() * cam.height()];
        let out = render_image_with_background(field, cam, 1, &bgs, &settings, 0)?;
        let target = targets.render(cam, &bgs)?;
        sq += out.rgb.mse(&target)? * bgs.len() as f64;
        n += bgs.len();
    }
    Ok(crate::math::psnr(sq / n.max(1) as f64))
}
