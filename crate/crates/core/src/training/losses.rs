use rand::Rng;

use crate::error::{shape_mismatch, Result};
use crate::field::{FieldGrads, ImplicitAvatarField, SdfField};
use crate::math::{Aabb, Vec3};
use crate::training::diff_render::backprop_sdf_points;

/// Mean absolute opacity difference and its gradient with respect to the
/// current map; the template is a constant.
pub fn silhouette_loss(template: &[f64], opacity: &[f64]) -> Result<(f64, Vec<f64>)> {
    if template.len() != opacity.len() {
        return Err(shape_mismatch(format!("{} opacities", template.len()), format!("{}", opacity.len())));
    }
    let n = opacity.len().max(1) as f64;
    let loss = opacity.iter().zip(template).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let grad = opacity
        .iter()
        .zip(template)
        .map(|(a, b)| if a > b { 1.0 / n } else if a < b { -1.0 / n } else { 0.0 })
        .collect();
    Ok((loss, grad))
}

/// `mean_j (|grad f(x_j)| - 1)^2` using the field's own gradient.
pub fn eikonal_loss(field: &(impl SdfField + ?Sized), points: &[Vec3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().map(|p| (field.distance_gradient(p).norm() - 1.0).powi(2)).sum::<f64>() / points.len() as f64
}

/// Step used by [`eikonal_loss_and_grad`]: half the finest grid cell.
pub fn eikonal_step(field: &ImplicitAvatarField) -> f64 {
    0.5 * field.encoding.finest_cell_size()
}

/// Eikonal penalty on a central-difference gradient with step `h`, and
/// `weight` times its parameter gradient accumulated into `grads`.
pub fn eikonal_loss_and_grad(field: &ImplicitAvatarField, points: &[Vec3], h: f64, weight: f64, grads: &mut FieldGrads) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points.len() as f64;
    let mut tape = field.new_tape();
    let mut loss = 0.0;
    let mut coeffs = Vec::with_capacity(6 * points.len());
    for x in points {
        let mut g = Vec3::zeros();
        let mut probes = [(Vec3::zeros(), Vec3::zeros()); 3];
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let (xp, xm) = (x + e, x - e);
            g[k] = (field.forward_sdf(&xp, &mut tape) - field.forward_sdf(&xm, &mut tape)) / (2.0 * h);
            probes[k] = (xp, xm);
        }
        let norm = g.norm();
        loss += (norm - 1.0).powi(2);
        if norm > 1e-12 {
            let outer = 2.0 * (norm - 1.0) / norm / n * weight;
            for k in 0..3 {
                let c = outer * g[k] / (2.0 * h);
                coeffs.push((probes[k].0, c));
                coeffs.push((probes[k].1, -c));
            }
        }
    }
    backprop_sdf_points(field, &coeffs, grads);
    loss / n
}

/// Eikonal sample points: half uniform in `domain`, half jittered around
/// `surface` points with standard deviation `sigma`.
pub fn eikonal_points(rng: &mut impl Rng, domain: &Aabb, surface: &[Vec3], count: usize, sigma: f64) -> Vec<Vec3> {
    let normal = rand_distr::Normal::new(0.0, sigma.max(1e-12)).expect("positive sigma");
    (0..count)
        .map(|i| {
            if i % 2 == 1 && !surface.is_empty() {
                let s = surface[rng.gen_range(0..surface.len())];
                let p = s + Vec3::new(rng.sample(normal), rng.sample(normal), rng.sample(normal));
                domain.clamp(&p)
            } else {
                Vec3::new(
                    rng.gen_range(domain.min[0]..domain.max[0]),
                    rng.gen_range(domain.min[1]..domain.max[1]),
                    rng.gen_range(domain.min[2]..domain.max[2]),
                )
            }
        })
        .collect()
}

/// Intersection over union of the `opacity > threshold` masks.
pub fn silhouette_iou(a: &[f64], b: &[f64], threshold: f64) -> f64 {
    let ma: Vec<bool> = a.iter().map(|v| *v > threshold).collect();
    let mb: Vec<bool> = b.iter().map(|v| *v > threshold).collect();
    crate::renderer::mask_iou(&ma, &mb)
}
