use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body_model::{BodyMesh, RiggedBodyModel};
use crate::error::{precondition, Error, Result};
use crate::field::{ImplicitAvatarField, ParamGroup};
use crate::guidance::BodyPart;
use crate::math::Rgb;
use crate::renderer::{render_image_with_background, sample_ray, Camera, RenderSettings, RgbImage};
use crate::training::config::ReconstructConfig;
use crate::training::diff_render::{backward_batch, PixelGrad, RayBatch};
use crate::training::losses::{eikonal_loss_and_grad, eikonal_points, eikonal_step};
use crate::training::optim::Adam;
use crate::training::raster::{lambert_gray, rasterize, shade_raster};
use crate::training::{CameraSampler, SceneBoxes};

/// Shaded rendering of the mesh from one camera; `None` marks background.
#[derive(Clone, Debug)]
pub struct ReferenceView {
    pub camera: Camera,
    pub colors: Vec<Option<Rgb>>,
}

impl ReferenceView {
    pub fn capture(mesh: &BodyMesh, camera: Camera) -> Self {
        let raster = rasterize(mesh, &camera, 1);
        let bg = vec![[f64::NAN; 3]; raster.hits.len()];
        let img = shade_raster(mesh, &raster, &bg, |_, n| Some(lambert_gray(n))).expect("matching sizes");
        let colors = raster.hits.iter().zip(img.pixels).map(|(h, c)| h.map(|_| c)).collect();
        Self { camera, colors }
    }

    /// The view composited over a constant background.
    pub fn image(&self, background: Rgb) -> RgbImage {
        let px = self.colors.iter().map(|c| c.unwrap_or(background)).collect();
        RgbImage::from_pixels(self.camera.width(), self.camera.height(), px).expect("view dimensions")
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructReport {
    pub field: ImplicitAvatarField,
    /// PSNR over the held-out views on a white background.
    pub psnr: f64,
    pub final_loss: f64,
    pub seconds: f64,
}

/// Multi-view cameras around the canonical mesh: `count` training and
/// `held_out` evaluation views from one seeded orbit distribution.
pub fn reference_views(mesh: &BodyMesh, resolution: usize, count: usize, held_out: usize, seed: u64) -> Result<(Vec<ReferenceView>, Vec<ReferenceView>)> {
    let boxes = SceneBoxes::for_mesh(mesh)?;
    let sampler = CameraSampler::orbit(resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Result<Vec<ReferenceView>> {
        (0..n)
            .map(|_| Ok(ReferenceView::capture(mesh, sampler.sample(&mut rng, &boxes, BodyPart::Body)?.camera)))
            .collect()
    };
    let train = draw(count)?;
    let eval = draw(held_out)?;
    Ok((train, eval))
}

/// PSNR of the field against views over white, pooled over all pixels.
pub fn evaluate_views(field: &ImplicitAvatarField, views: &[ReferenceView], samples: usize) -> Result<f64> {
    let settings = RenderSettings::with_samples(samples);
    let mut sq = 0.0;
    let mut n = 0usize;
    for v in views {
        let bgs = vec![[1.0; 3]; v.colors.len()];
        let out = render_image_with_background(field, &v.camera, 1, &bgs, &settings, 0)?;
        let target = v.image([1.0; 3]);
        sq += out.rgb.mse(&target)? * v.colors.len() as f64;
        n += v.colors.len();
    }
    Ok(crate::math::psnr(sq / n.max(1) as f64))
}

/// Fit a field to gray-shaded renders of the rig's template mesh with an
/// L2 photometric loss plus the Eikonal term.
pub fn reconstruct_template(model: &RiggedBodyModel, config: &ReconstructConfig) -> Result<ReconstructReport> {
    reconstruct_template_with(model, config, |_, _, _| {})
}

/// Pixels whose coverage differs from some pixel within `radius`.
fn edge_pixels(view: &ReferenceView, radius: i64) -> Vec<usize> {
    let (w, h) = (view.camera.width() as i64, view.camera.height() as i64);
    (0..view.colors.len())
        .filter(|&i| {
            let (r, c) = (i as i64 / w, i as i64 % w);
            let hit = view.colors[i].is_some();
            (-radius..=radius).any(|dr| {
                (-radius..=radius).any(|dc| {
                    let (rr, cc) = (r + dr, c + dc);
                    rr >= 0 && cc >= 0 && rr < h && cc < w && view.colors[(rr * w + cc) as usize].is_some() != hit
                })
            })
        })
        .collect()
}

/// [`reconstruct_template`] reporting `(step, loss, field)` after every
/// update.
pub fn reconstruct_template_with(
    model: &RiggedBodyModel,
    config: &ReconstructConfig,
    mut progress: impl FnMut(usize, f64, &ImplicitAvatarField),
) -> Result<ReconstructReport> {
    let start = Instant::now();
    let mesh = model.template_mesh();
    let domain = config.field.domain;
    if !domain.contains_box(&mesh.bounds()) {
        return Err(precondition("template mesh extends outside the field domain"));
    }
    if config.views == 0 || config.rays_per_step == 0 {
        return Err(precondition("reconstruction needs at least one view and one ray per step"));
    }
    let (train, eval) = reference_views(&mesh, config.resolution, config.views, config.held_out, config.seed)?;
    let mut field = ImplicitAvatarField::new(config.field.clone());
    let mut adam = Adam::new(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let h = eikonal_step(&field);
    let sigma = 0.02 * model.height();

    // a third of the rays land on covered pixels, a third near silhouettes
    let covered: Vec<Vec<usize>> = train
        .iter()
        .map(|v| v.colors.iter().enumerate().filter(|(_, c)| c.is_some()).map(|(i, _)| i).collect())
        .collect();
    let edges: Vec<Vec<usize>> = train.iter().map(|v| edge_pixels(v, 2)).collect();
    let decay = config.final_lr_fraction.max(1e-12).ln() / config.steps.max(1) as f64;
    let mut final_loss = f64::NAN;
    for step in 0..config.steps {
        adam.lr = config.learning_rate * (decay * step as f64).exp();
        let mut batch = RayBatch::default();
        let mut targets = Vec::with_capacity(config.rays_per_step);
        for k in 0..config.rays_per_step {
            let vi = rng.gen_range(0..train.len());
            let view = &train[vi];
            let pool = [&covered[vi], &edges[vi]].get(k % 3).copied().filter(|p| !p.is_empty());
            let pix = match pool {
                Some(p) => p[rng.gen_range(0..p.len())],
                None => rng.gen_range(0..view.colors.len()),
            };
            let w = view.camera.width();
            let bg: Rgb = [rng.gen(), rng.gen(), rng.gen()];
            let ray = sample_ray(&view.camera, (pix / w, pix % w), config.samples, 1, Some(&mut rng))?;
            batch.push(ray, bg);
            targets.push(view.colors[pix].unwrap_or(bg));
        }
        let scale = 1.0 / config.rays_per_step as f64;
        let (mut grads, pixels) = backward_batch(&field, &batch, 1e-5, true, |i, px| PixelGrad {
            rgb: [0, 1, 2].map(|k| 2.0 * scale * (px.rgb[k] - targets[i][k])),
            opacity: 0.0,
        });
        let photo: f64 = pixels
            .iter()
            .zip(&targets)
            .map(|(p, t)| (0..3).map(|k| (p.rgb[k] - t[k]).powi(2)).sum::<f64>())
            .sum::<f64>()
            * scale;
        let mut eik = 0.0;
        if config.eikonal_weight > 0.0 && config.eikonal_points > 0 {
            let pts = eikonal_points(&mut rng, &domain, &mesh.vertices, config.eikonal_points, sigma);
            eik = eikonal_loss_and_grad(&field, &pts, h, config.eikonal_weight, &mut grads);
        }
        let loss = photo + config.eikonal_weight * eik;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::Training {
                step,
                message: format!("loss became {loss}"),
            });
        }
        adam.step(&mut field, &grads, &ParamGroup::ALL).map_err(|e| Error::Training { step, message: e.to_string() })?;
        final_loss = loss;
        progress(step, loss, &field);
    }
    let psnr = evaluate_views(&field, &eval, config.samples)?;
    Ok(ReconstructReport {
        field,
        psnr,
        final_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}
