//! Z-buffered ray-cast rasterization of triangle meshes, used to make
//! reconstruction and mock-guidance targets.

use rayon::prelude::*;

use crate::body_model::BodyMesh;
use crate::error::{shape_mismatch, Result};
use crate::guidance::{TargetSource, ViewInfo};
use crate::math::{Rgb, Vec3};
use crate::renderer::{Camera, RgbImage};

/// Closest hit per pixel of a strided grid.
#[derive(Clone, Debug)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub hits: Vec<Option<Hit>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub face: usize,
    pub barycentric: [f64; 3],
    pub t: f64,
}

impl Raster {
    pub fn mask(&self) -> Vec<bool> {
        self.hits.iter().map(Option::is_some).collect()
    }
}

/// Moller-Trumbore; returns `(t, b1, b2)` for front or back faces.
fn intersect(o: &Vec3, d: &Vec3, tri: &[Vec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some((t, u, v))
}

/// Cast one ray per strided pixel center against every triangle whose
/// projected bounds cover it.
pub fn rasterize(mesh: &BodyMesh, camera: &Camera, stride: usize) -> Raster {
    let (rows, cols) = camera.strided_dims(stride);
    let o = ((stride - 1) / 2) as f64 + 0.5;
    // per-row candidate lists from projected triangle bounds
    let mut row_faces: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); rows];
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let proj: Option<Vec<(f64, f64, f64)>> = tri.iter().map(|p| camera.project(p)).collect();
        let Some(proj) = proj else { continue };
        let (rmin, rmax) = proj.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
        let (cmin, cmax) = proj.iter().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
        let lo = ((rmin - o) / stride as f64).floor().max(0.0) as usize;
        let hi = ((rmax - o) / stride as f64).ceil();
        if hi < 0.0 {
            continue;
        }
        for r in lo..=(hi as usize).min(rows.saturating_sub(1)) {
            row_faces[r].push((f, cmin, cmax));
        }
    }
    let origin = camera.position();
    let hits: Vec<Option<Hit>> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = (idx / cols, idx % cols);
            let (pr, pc) = camera.strided_pixel(stride, r, c);
            let uc = pc as f64 + 0.5;
            let d = camera.direction_at(pr as f64 + 0.5, uc);
            let mut best: Option<Hit> = None;
            for &(f, cmin, cmax) in &row_faces[r] {
                if uc < cmin - 1.0 || uc > cmax + 1.0 {
                    continue;
                }
                if let Some((t, u, v)) = intersect(&origin, &d, &mesh.triangle(f)) {
                    if best.map_or(true, |b| t < b.t) {
                        best = Some(Hit {
                            face: f,
                            barycentric: [1.0 - u - v, u, v],
                            t,
                        });
                    }
                }
            }
            best
        })
        .collect();
    Raster { width: cols, height: rows, hits }
}

/// Area-weighted vertex normals.
pub fn vertex_normals(mesh: &BodyMesh) -> Vec<Vec3> {
    let mut n = vec![Vec3::zeros(); mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let [a, b, c] = mesh.triangle(f);
        let fnorm = (b - a).cross(&(c - a));
        for v in face {
            n[*v as usize] += fnorm;
        }
    }
    n.iter().map(|v| v.try_normalize(1e-300).unwrap_or_else(Vec3::y)).collect()
}

/// Surface point and interpolated normal of a hit.
pub fn surface(mesh: &BodyMesh, normals: &[Vec3], hit: &Hit) -> (Vec3, Vec3) {
    let face = mesh.faces[hit.face];
    let mut p = Vec3::zeros();
    let mut n = Vec3::zeros();
    for k in 0..3 {
        p += mesh.vertices[face[k] as usize] * hit.barycentric[k];
        n += normals[face[k] as usize] * hit.barycentric[k];
    }
    (p, n.try_normalize(1e-300).unwrap_or_else(Vec3::y))
}

/// Neutral gray diffuse shading under a fixed key light plus ambient.
pub fn lambert_gray(normal: &Vec3) -> Rgb {
    let light = Vec3::new(0.3, 0.8, 0.5).normalize();
    let v = 0.75 * (0.35 + 0.65 * normal.dot(&light).max(0.0));
    [v, v, v]
}

/// Smooth procedural albedo over surface position; `frequency` scales all
/// spatial frequencies.
pub fn texture_color(p: &Vec3, frequency: f64) -> Rgb {
    let k = frequency;
    [
        0.55 + 0.35 * (4.0 * k * p.y + 0.5).sin(),
        0.5 + 0.3 * (3.0 * k * p.x + 2.0 * k * p.y).cos(),
        0.5 + 0.35 * (3.0 * k * p.z - 2.5 * k * p.y + 1.0).sin(),
    ]
}

/// Shade every hit with `shade(point, normal)` over `backgrounds`.
pub fn shade_raster(
    mesh: &BodyMesh,
    raster: &Raster,
    backgrounds: &[Rgb],
    shade: impl Fn(&Vec3, &Vec3) -> Option<Rgb>,
) -> Result<RgbImage> {
    if backgrounds.len() != raster.hits.len() {
        return Err(shape_mismatch(format!("{} backgrounds", raster.hits.len()), format!("{}", backgrounds.len())));
    }
    let normals = vertex_normals(mesh);
    let pixels = raster
        .hits
        .iter()
        .zip(backgrounds)
        .map(|(h, bg)| match h {
            Some(h) => {
                let (p, n) = surface(mesh, &normals, h);
                shade(&p, &n).unwrap_or(*bg)
            }
            None => *bg,
        })
        .collect();
    RgbImage::from_pixels(raster.width, raster.height, pixels)
}

/// Mock-guidance targets: the textured mesh seen from the oracle's camera
/// over the render's background. Surface points with `y` inside `erase`
/// show background instead.
#[derive(Clone, Debug)]
pub struct MeshTargets {
    pub mesh: BodyMesh,
    pub frequency: f64,
    pub erase: Option<[f64; 2]>,
}

impl MeshTargets {
    pub fn new(mesh: BodyMesh) -> Self {
        Self {
            mesh,
            frequency: 1.0,
            erase: None,
        }
    }

    /// Targets with the torso band `[lo, hi]` (in `y`) removed.
    pub fn erasing(mut self, band: [f64; 2]) -> Self {
        self.erase = Some(band);
        self
    }

    pub fn render(&self, camera: &Camera, backgrounds: &[Rgb]) -> Result<RgbImage> {
        let raster = rasterize(&self.mesh, camera, 1);
        shade_raster(&self.mesh, &raster, backgrounds, |p, _| match self.erase {
            Some([lo, hi]) if p.y >= lo && p.y <= hi => None,
            _ => Some(texture_color(p, self.frequency)),
        })
    }
}

impl TargetSource for MeshTargets {
    fn target(&self, view: &ViewInfo<'_>) -> Result<RgbImage> {
        self.render(view.camera, &view.background.pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::synthetic::{capsule_rig, CapsuleRigSpec};

    fn cam(n: usize) -> Camera {
        Camera::look_at(Vec3::new(0.0, 0.0, 3.0), Vec3::zeros(), Vec3::y(), 0.9, n, n, 1.0, 5.0).unwrap()
    }

    #[test]
    fn single_triangle_coverage_and_barycentrics() {
        let mesh = BodyMesh {
            vertices: vec![Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            faces: vec![[0, 1, 2]],
        };
        let r = rasterize(&mesh, &cam(33), 1);
        let center = r.hits[16 * 33 + 16].unwrap();
        assert!((center.t - 3.0).abs() < 1e-3);
        let b = center.barycentric;
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p: Vec3 = (0..3).map(|k| mesh.vertices[k] * b[k]).sum();
        let d = cam(33).direction_at(16.5, 16.5);
        assert!((p - (Vec3::new(0.0, 0.0, 3.0) + d * center.t)).norm() < 1e-9);
        assert!(r.hits[0].is_none());
    }

    #[test]
    fn nearest_surface_wins() {
        let tri = |z: f64| [Vec3::new(-2.0, -2.0, z), Vec3::new(2.0, -2.0, z), Vec3::new(0.0, 2.0, z)];
        let mut vertices = tri(-0.5).to_vec();
        vertices.extend(tri(0.5));
        let mesh = BodyMesh { vertices, faces: vec![[0, 1, 2], [3, 4, 5]] };
        let r = rasterize(&mesh, &cam(9), 1);
        assert_eq!(r.hits[4 * 9 + 4].unwrap().face, 1);
    }

    #[test]
    fn capsule_silhouette_matches_its_analytic_projection() {
        let mesh = capsule_rig(&CapsuleRigSpec::default()).template_mesh();
        let camera = cam(64);
        let r = rasterize(&mesh, &camera, 1);
        let covered = r.mask().iter().filter(|m| **m).count() as f64;
        // projected capsule: rectangle plus two discs at distance ~3
        let f = camera.intrinsics.fy;
        let rad = 0.22 * f / 3.0;
        let len = 0.9 * f / 3.0;
        let expected = 2.0 * rad * len + std::f64::consts::PI * rad * rad;
        assert!((covered / expected - 1.0).abs() < 0.08, "{covered} vs {expected}");
    }

    #[test]
    fn erased_band_shows_background() {
        let mesh = capsule_rig(&CapsuleRigSpec::default()).template_mesh();
        let camera = cam(32);
        let bg = vec![[0.0, 0.0, 1.0]; 32 * 32];
        let full = MeshTargets::new(mesh.clone()).render(&camera, &bg).unwrap();
        let cut = MeshTargets::new(mesh).erasing([-0.2, 0.2]).render(&camera, &bg).unwrap();
        assert_ne!(full.get(16, 16), [0.0, 0.0, 1.0]);
        assert_eq!(cut.get(16, 16), [0.0, 0.0, 1.0]);
        assert_eq!(cut.get(4, 16), full.get(4, 16));
    }
}
