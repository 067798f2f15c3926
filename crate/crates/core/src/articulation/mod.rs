//! Training-free articulation: observation-space samples are carried back
//! to the canonical field through blended inverse vertex transforms of the
//! nearest target-mesh triangle, and samples far from the target surface
//! are masked out.

mod bvh;

pub use bvh::{closest_point_on_triangle, nearest_surface, BvhNode, MeshBvh, SurfaceCorrespondence};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body_model::{BodyConfiguration, BodyMesh, RiggedBodyModel, VertexTransformSet, DEGENERACY_THRESHOLD};
use crate::error::{precondition, Error, Result};
use crate::field::SdfField;
use crate::math::{transform_point, transform_vector, Aabb, Mat4, Vec3};
use crate::renderer::render::{integrate, pixel_rng, PixelSample};
use crate::renderer::{sample_ray, BackgroundPolicy, Camera, RenderOutput, RenderSettings};

/// How the density mask treats distance to the target surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// 1 within `delta` (inclusive), 0 beyond.
    Hard,
    /// 1 within `delta`, linear falloff to 0 at `1.2 delta`.
    Ramp,
    /// Always 1.
    Disabled,
}

/// Default mask threshold as a fraction of canonical body height.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.05;

/// Density mask factor for a correspondence.
pub fn density_mask(correspondence: &SurfaceCorrespondence, delta: f64) -> f64 {
    mask_value(correspondence.distance, delta, MaskMode::Hard)
}

pub fn mask_value(distance: f64, delta: f64, mode: MaskMode) -> f64 {
    match mode {
        MaskMode::Disabled => 1.0,
        MaskMode::Hard => {
            if distance <= delta {
                1.0
            } else {
                0.0
            }
        }
        MaskMode::Ramp => {
            if distance <= delta {
                1.0
            } else {
                (1.0 - (distance - delta) / (0.2 * delta)).max(0.0)
            }
        }
    }
}

/// Everything needed to warp points for one target configuration.
pub struct ArticulationContext {
    pub target: BodyConfiguration,
    pub transforms: VertexTransformSet,
    pub mesh: BodyMesh,
    pub bvh: MeshBvh,
    pub mask: MaskMode,
    pub delta: f64,
    reach: Aabb,
    identity: bool,
}

/// Observation-space point mapped into canonical space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedPoint {
    pub canonical: Vec3,
    pub correspondence: SurfaceCorrespondence,
    /// Blended inverse transform used for the point.
    pub inverse: Mat4,
}

impl ArticulationContext {
    /// Precompute transforms, the posed mesh and its BVH. `delta` defaults
    /// to 5% of the canonical body height.
    pub fn new(model: &RiggedBodyModel, target: &BodyConfiguration, mask: MaskMode, delta: Option<f64>) -> Result<Self> {
        let delta = delta.unwrap_or(DEFAULT_DELTA_FRACTION * model.height());
        if !(delta > 0.0) {
            return Err(precondition(format!("mask threshold must be positive, got {delta}")));
        }
        let transforms = model.vertex_transforms(target)?;
        let mesh = model.mesh_from_transforms(&transforms);
        let bvh = MeshBvh::build(&mesh)?;
        let reach = mesh.bounds().expanded(1.2 * delta);
        let identity = transforms.is_identity();
        Ok(Self {
            target: target.clone(),
            transforms,
            mesh,
            bvh,
            mask,
            delta,
            reach,
            identity,
        })
    }

    /// Whether a mask lookup can be skipped because the point is certainly
    /// outside the masked shell.
    fn certainly_masked(&self, p: &Vec3) -> bool {
        self.mask != MaskMode::Disabled && !self.reach.contains(p)
    }

    /// The transfer function: nearest target triangle, barycentric blend of
    /// its vertices' inverse transforms, applied to `p`.
    pub fn warp_to_canonical(&self, p: &Vec3) -> Result<WarpedPoint> {
        let correspondence = self.bvh.nearest(p, &self.mesh);
        let inverse = self.blended_inverse(&correspondence)?;
        let canonical = if self.identity { *p } else { transform_point(&inverse, p) };
        Ok(WarpedPoint {
            canonical,
            correspondence,
            inverse,
        })
    }

    fn blended_inverse(&self, c: &SurfaceCorrespondence) -> Result<Mat4> {
        let f = self.mesh.faces[c.triangle];
        let m0 = &self.transforms.inverses[f[0] as usize];
        let m1 = &self.transforms.inverses[f[1] as usize];
        let m2 = &self.transforms.inverses[f[2] as usize];
        let [_, b1, b2] = c.barycentric;
        // offsets from the first vertex keep equal transforms exact
        let mut m = *m0;
        if b1 != 0.0 {
            m += (m1 - m0) * b1;
        }
        if b2 != 0.0 {
            m += (m2 - m0) * b2;
        }
        let det = m.fixed_view::<3, 3>(0, 0).determinant();
        if !(det.abs() >= DEGENERACY_THRESHOLD) {
            let k = (0..3).max_by(|a, b| c.barycentric[*a].total_cmp(&c.barycentric[*b])).unwrap();
            return Err(Error::Degenerate { vertex: f[k] as usize, det });
        }
        Ok(m)
    }

    /// Mask factor at an observation-space point, using a precomputed
    /// correspondence when available.
    pub fn mask_at(&self, c: &SurfaceCorrespondence) -> f64 {
        mask_value(c.distance, self.delta, self.mask)
    }
}

fn warp_direction(inverse: &Mat4, d: &Vec3) -> Vec3 {
    let w = transform_vector(inverse, d);
    let n = w.norm();
    if (n - 1.0).abs() > 1e-12 && n > 0.0 {
        w / n
    } else {
        w
    }
}

fn render_articulated_ray(
    field: &(impl SdfField + ?Sized),
    ctx: &ArticulationContext,
    t: &[f64],
    origin: &Vec3,
    dir: &Vec3,
    background: [f64; 3],
    cutoff: f64,
) -> Result<PixelSample> {
    let n = t.len();
    let mut warped: Vec<Option<WarpedPoint>> = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for ti in t {
        let p = origin + dir * *ti;
        if ctx.certainly_masked(&p) {
            warped.push(None);
            mask.push(0.0);
            continue;
        }
        let w = ctx.warp_to_canonical(&p)?;
        mask.push(ctx.mask_at(&w.correspondence));
        warped.push(Some(w));
    }
    // distances are needed where this sample or its predecessor can carry
    // opacity
    let mut sdf = vec![1.0; n];
    for i in 0..n {
        let needed = mask[i] > 0.0 || (i > 0 && mask[i - 1] > 0.0);
        if needed {
            if warped[i].is_none() {
                warped[i] = Some(ctx.warp_to_canonical(&(origin + dir * t[i]))?);
            }
            let f = field.distance(&warped[i].as_ref().expect("warped above").canonical);
            if !f.is_finite() {
                let p = origin + dir * t[i];
                return Err(Error::Numeric(format!("warped field distance at ({}, {}, {})", p.x, p.y, p.z)));
            }
            sdf[i] = f;
        }
    }
    let mut scratch = (Vec::with_capacity(n), Vec::with_capacity(n));
    Ok(integrate(t, &sdf, field.sharpness(), Some(&mask), cutoff, background, &mut scratch, |i| {
        let w = warped[i].as_ref().expect("weighted samples were warped");
        let d = if ctx.identity { *dir } else { warp_direction(&w.inverse, dir) };
        field.radiance(&w.canonical, &d)
    }))
}

/// Render a canonical field under a target configuration.
pub fn render_articulated(
    field: &(impl SdfField + ?Sized),
    camera: &Camera,
    ctx: &ArticulationContext,
    stride: usize,
    background: BackgroundPolicy,
    settings: &RenderSettings,
    seed: u64,
) -> Result<RenderOutput> {
    if stride == 0 {
        return Err(precondition("stride must be positive"));
    }
    let (rows, cols) = camera.strided_dims(stride);
    let bgs = background.realize(rows * cols, seed ^ 0xB6);
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
                    render_articulated_ray(field, ctx, &ray.t, &ray.origin, &ray.direction, bgs[idx], settings.weight_cutoff)
                })
                .collect()
        })
        .collect();
    Ok(RenderOutput::from_rows(cols, rows, out?, &bgs, settings.background_epsilon))
}

/// Shape interpolation `lambda beta_a + (1 - lambda) beta_b` at a fixed pose.
pub fn interpolate_shape(base: &BodyConfiguration, beta_a: &[f64], beta_b: &[f64], lambda: f64) -> Result<BodyConfiguration> {
    if beta_a.len() != beta_b.len() {
        return Err(crate::error::shape_mismatch(beta_a.len(), beta_b.len()));
    }
    let mut cfg = base.clone();
    cfg.betas = beta_a.iter().zip(beta_b).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
    use crate::field::{CapsuleSdf, SphereSdf};
    use crate::renderer::{mask_iou, render_image};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain() -> RiggedBodyModel {
        capsule_rig(&CapsuleRigSpec::default())
    }

    #[test]
    fn canonical_target_warp_is_identity() {
        let m = chain();
        let ctx = ArticulationContext::new(&m, &m.canonical_configuration(), MaskMode::Hard, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let p = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert_eq!(ctx.warp_to_canonical(&p).unwrap().canonical, p);
        }
    }

    #[test]
    fn deformed_vertices_return_to_the_template() {
        let m = chain();
        let mut cfg = m.canonical_configuration();
        cfg.pose[1] = [0.0, 0.0, 0.6];
        cfg.pose[2] = [0.3, 0.0, -0.4];
        cfg.betas = vec![0.2, -0.1];
        let ctx = ArticulationContext::new(&m, &cfg, MaskMode::Hard, None).unwrap();
        for (v, p) in ctx.mesh.vertices.iter().enumerate() {
            let w = ctx.warp_to_canonical(p).unwrap();
            assert!((w.canonical - m.template_vertices[v]).norm() < 1e-5, "vertex {v}");
        }
    }

    #[test]
    fn rigid_motion_is_inverted_exactly_near_the_surface() {
        let m = capsule_rig(&CapsuleRigSpec { joints: 1, ..CapsuleRigSpec::default() });
        let mut cfg = m.canonical_configuration();
        cfg.pose[0] = [0.0, 0.0, std::f64::consts::FRAC_PI_2];
        let ctx = ArticulationContext::new(&m, &cfg, MaskMode::Hard, None).unwrap();
        let r_inv = crate::math::rodrigues(&Vec3::new(0.0, 0.0, -std::f64::consts::FRAC_PI_2));
        for f in (0..m.faces.len()).step_by(17) {
            let [a, b, c] = ctx.mesh.triangle(f);
            let n = (b - a).cross(&(c - a)).normalize();
            let p = (a + b + c) / 3.0 + n * 0.02;
            let w = ctx.warp_to_canonical(&p).unwrap();
            assert!((w.canonical - r_inv * p).norm() < 1e-9);
        }
    }

    #[test]
    fn mask_boundary_is_inclusive() {
        let c = SurfaceCorrespondence {
            query: Vec3::zeros(),
            triangle: 0,
            barycentric: [1.0, 0.0, 0.0],
            closest: Vec3::zeros(),
            distance: 0.1,
        };
        assert_eq!(density_mask(&c, 0.1), 1.0);
        assert_eq!(density_mask(&SurfaceCorrespondence { distance: 0.0, ..c }, 0.1), 1.0);
        assert_eq!(density_mask(&SurfaceCorrespondence { distance: 0.2, ..c }, 0.1), 0.0);
        assert!((mask_value(0.11, 0.1, MaskMode::Ramp) - 0.5).abs() < 1e-12);
        assert_eq!(mask_value(0.13, 0.1, MaskMode::Ramp), 0.0);
        let mut last = 1.0;
        for i in 0..100 {
            let v = mask_value(i as f64 * 0.003, 0.1, MaskMode::Ramp);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn canonical_articulated_render_equals_plain_render() {
        let m = chain();
        let field = CapsuleSdf::new(Vec3::new(0.0, -0.45, 0.0), Vec3::new(0.0, 0.45, 0.0), 0.22, [0.2, 0.6, 0.9], 64.0);
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 2.5), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 0.9, 20, 20, 1.0, 4.0).unwrap();
        let ctx = ArticulationContext::new(&m, &m.canonical_configuration(), MaskMode::Disabled, None).unwrap();
        let s = RenderSettings::with_samples(48);
        let a = render_articulated(&field, &cam, &ctx, 1, BackgroundPolicy::gaussian(), &s, 9).unwrap();
        let b = render_image(&field, &cam, 1, BackgroundPolicy::gaussian(), &s, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn far_points_are_masked_out() {
        // a sphere field far from the rig contributes nothing once masked
        let m = chain();
        let field = SphereSdf::new(Vec3::new(0.0, 0.0, 1.2), 0.2, [1.0, 0.0, 0.0], 64.0);
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 0.3, 12, 12, 0.5, 5.0).unwrap();
        let ctx = ArticulationContext::new(&m, &m.canonical_configuration(), MaskMode::Hard, None).unwrap();
        let s = RenderSettings::with_samples(64);
        let out = render_articulated(&field, &cam, &ctx, 1, BackgroundPolicy::White, &s, 0).unwrap();
        assert!(out.opacity.iter().all(|o| *o < 1e-6));
        let plain = render_image(&field, &cam, 1, BackgroundPolicy::White, &s, 0).unwrap();
        assert!(mask_iou(&plain.silhouette(0.5), &out.silhouette(0.5)) < 0.01);
    }
}
