//! Differentiable volume rendering of the neural field.
//!
//! The forward pass matches [`crate::renderer::render_image`] exactly; the
//! reverse pass recomputes each ray with per-sample tapes and pulls pixel
//! gradients back through compositing, the logistic alpha and the networks.
//!
//! With `g_i = dL/dw_i`, compositing gives
//! `dL/dalpha_i = T_i (g_i - R_i)` where
//! `R_i = g_{i+1} alpha_{i+1} + (1 - alpha_{i+1}) R_{i+1}` and `R_{n-1} = 0`.

use rayon::prelude::*;

use crate::field::{FieldGrads, ImplicitAvatarField, PointTape};
use crate::math::{log_sigmoid, sigmoid, Rgb, Vec3};
use crate::renderer::{PixelSample, Ray};

/// Rays plus the background color behind each.
#[derive(Clone, Debug, Default)]
pub struct RayBatch {
    pub rays: Vec<Ray>,
    pub backgrounds: Vec<Rgb>,
}

impl RayBatch {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn push(&mut self, ray: Ray, background: Rgb) {
        self.rays.push(ray);
        self.backgrounds.push(background);
    }
}

/// Upstream gradient for one rendered pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PixelGrad {
    pub rgb: [f64; 3],
    pub opacity: f64,
}

#[derive(Default)]
struct RayScratch {
    sdf: Vec<f64>,
    alphas: Vec<f64>,
    trans: Vec<f64>,
    weights: Vec<f64>,
    colors: Vec<Rgb>,
    colored: Vec<bool>,
    d_sdf: Vec<f64>,
    tapes: Vec<PointTape>,
}

impl RayScratch {
    fn ensure(&mut self, field: &ImplicitAvatarField, n: usize) {
        while self.tapes.len() < n {
            self.tapes.push(field.new_tape());
        }
    }
}

fn alpha(f_i: f64, f_next: f64, s: f64) -> f64 {
    (1.0 - (log_sigmoid(s * f_next) - log_sigmoid(s * f_i)).exp()).max(0.0)
}

fn forward_ray(field: &ImplicitAvatarField, ray: &Ray, bg: Rgb, cutoff: f64, sc: &mut RayScratch) -> PixelSample {
    let n = ray.t.len();
    sc.ensure(field, n);
    let s = field.sharpness_value();
    sc.sdf.clear();
    for (i, t) in ray.t.iter().enumerate() {
        let p = ray.at(*t);
        sc.sdf.push(field.forward_sdf(&p, &mut sc.tapes[i]));
    }
    sc.alphas.clear();
    sc.trans.clear();
    sc.weights.clear();
    sc.colors.clear();
    sc.colored.clear();
    let mut transmittance = 1.0;
    let mut rgb = [0.0; 3];
    let mut opacity = 0.0;
    let mut depth = 0.0;
    for i in 0..n {
        let a = if i + 1 < n { alpha(sc.sdf[i], sc.sdf[i + 1], s) } else { 0.0 };
        let w = a * transmittance;
        sc.alphas.push(a);
        sc.trans.push(transmittance);
        sc.weights.push(w);
        transmittance *= 1.0 - a;
        if w > 0.0 {
            opacity += w;
            depth += w * ray.t[i];
        }
        if w > cutoff {
            let c = field.forward_color(&ray.direction, &mut sc.tapes[i]);
            for k in 0..3 {
                rgb[k] += w * c[k];
            }
            sc.colors.push(c);
            sc.colored.push(true);
        } else {
            sc.colors.push(bg);
            sc.colored.push(false);
        }
    }
    for k in 0..3 {
        rgb[k] += (1.0 - opacity) * bg[k];
    }
    PixelSample {
        rgb,
        opacity,
        depth: depth / opacity.max(1e-10),
    }
}

fn backward_ray(
    field: &ImplicitAvatarField,
    ray: &Ray,
    bg: Rgb,
    grad: &PixelGrad,
    sc: &mut RayScratch,
    grads: &mut FieldGrads,
    train_geometry: bool,
) {
    let n = ray.t.len();
    let s = field.sharpness_value();
    // dL/dw_i; uncolored samples composite as background
    let g = |i: usize| -> f64 {
        let c = if sc.colored[i] { sc.colors[i] } else { [0.0; 3] };
        grad.opacity + (0..3).map(|k| grad.rgb[k] * (c[k] - bg[k])).sum::<f64>()
    };
    sc.d_sdf.clear();
    sc.d_sdf.resize(n, 0.0);
    let mut d_s = 0.0;
    let mut r_next = 0.0;
    for i in (0..n.saturating_sub(1)).rev() {
        let gi = g(i);
        let d_alpha = sc.trans[i] * (gi - r_next);
        // R_{i-1} for the next iteration
        r_next = gi * sc.alphas[i] + (1.0 - sc.alphas[i]) * r_next;
        if sc.alphas[i] <= 0.0 || d_alpha == 0.0 {
            continue;
        }
        let (fa, fb) = (sc.sdf[i], sc.sdf[i + 1]);
        let (a, b) = (s * fa, s * fb);
        let ratio = 1.0 - sc.alphas[i];
        let da = ratio * (1.0 - sigmoid(a));
        let db = -ratio * (1.0 - sigmoid(b));
        sc.d_sdf[i] += d_alpha * da * s;
        sc.d_sdf[i + 1] += d_alpha * db * s;
        d_s += d_alpha * (da * fa + db * fb);
    }
    if train_geometry {
        grads.log_sharpness += d_s * s;
    }
    for i in 0..n {
        let w = sc.weights[i];
        let d_rgb = if sc.colored[i] {
            Some([w * grad.rgb[0], w * grad.rgb[1], w * grad.rgb[2]])
        } else {
            None
        };
        let d_f = if train_geometry { sc.d_sdf[i] } else { 0.0 };
        if d_f == 0.0 && d_rgb.is_none() {
            continue;
        }
        field.backward(&mut sc.tapes[i], d_f, d_rgb.as_ref(), Some(grads), train_geometry, None);
    }
}

/// Forward-only render of a batch.
pub fn forward_batch(field: &ImplicitAvatarField, batch: &RayBatch, cutoff: f64) -> Vec<PixelSample> {
    let chunk = chunk_len(batch.len());
    batch
        .rays
        .par_chunks(chunk)
        .zip(batch.backgrounds.par_chunks(chunk))
        .flat_map_iter(|(rays, bgs)| {
            let mut sc = RayScratch::default();
            rays.iter()
                .zip(bgs)
                .map(|(r, bg)| forward_ray(field, r, *bg, cutoff, &mut sc))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Render a batch and accumulate parameter gradients for the upstream
/// pixel gradients returned by `pixel_grad(index, sample)`.
pub fn backward_batch(
    field: &ImplicitAvatarField,
    batch: &RayBatch,
    cutoff: f64,
    train_geometry: bool,
    pixel_grad: impl Fn(usize, &PixelSample) -> PixelGrad + Sync,
) -> (FieldGrads, Vec<PixelSample>) {
    let chunk = chunk_len(batch.len());
    let parts: Vec<(FieldGrads, Vec<PixelSample>)> = batch
        .rays
        .par_chunks(chunk)
        .zip(batch.backgrounds.par_chunks(chunk))
        .enumerate()
        .map(|(ci, (rays, bgs))| {
            let mut sc = RayScratch::default();
            let mut grads = field.zero_grads();
            let mut out = Vec::with_capacity(rays.len());
            for (j, (r, bg)) in rays.iter().zip(bgs).enumerate() {
                let px = forward_ray(field, r, *bg, cutoff, &mut sc);
                let g = pixel_grad(ci * chunk + j, &px);
                if g != PixelGrad::default() {
                    backward_ray(field, r, *bg, &g, &mut sc, &mut grads, train_geometry);
                }
                out.push(px);
            }
            (grads, out)
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut grads, mut pixels) = iter.next().unwrap_or_else(|| (field.zero_grads(), Vec::new()));
    for (g, p) in iter {
        grads.add(&g);
        pixels.extend(p);
    }
    (grads, pixels)
}

fn chunk_len(n: usize) -> usize {
    let parts = rayon::current_num_threads().max(1);
    n.div_ceil(parts).max(1)
}

/// Accumulate the gradient of `sum_j c_j f(x_j)` into `grads`.
pub fn backprop_sdf_points(field: &ImplicitAvatarField, points: &[(Vec3, f64)], grads: &mut FieldGrads) {
    let mut tape = field.new_tape();
    for (x, c) in points {
        if *c == 0.0 {
            continue;
        }
        field.forward_sdf(x, &mut tape);
        field.backward(&mut tape, *c, None, Some(grads), true, None);
    }
}
