use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body_model::BodyMesh;
use crate::error::{precondition, Result};
use crate::guidance::BodyPart;
use crate::math::{Aabb, Vec3};
use crate::renderer::{BackgroundPolicy, Camera};

/// Camera targets for whole-body and head captures; `face` lies inside
/// `body`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBoxes {
    pub body: Aabb,
    pub face: Aabb,
}

impl SceneBoxes {
    /// Body box is the mesh bounds plus `margin`; the face box covers the
    /// top `face_fraction` of the height plus `neck` below it, horizontally
    /// fitted to the vertices in that slab.
    pub fn from_mesh(mesh: &BodyMesh, margin: f64, face_fraction: f64, neck: f64) -> Result<Self> {
        let bounds = mesh.bounds();
        if !bounds.is_valid() {
            return Err(precondition("mesh bounds are degenerate"));
        }
        let body = bounds.expanded(margin);
        let height = bounds.max[1] - bounds.min[1];
        let bottom = bounds.max[1] - (face_fraction + neck) * height;
        let slab: Vec<Vec3> = mesh.vertices.iter().filter(|v| v.y >= bottom).copied().collect();
        let head = Aabb::from_points(&slab);
        let mut face = Aabb::new(
            [head.min[0] - margin, bottom, head.min[2] - margin],
            [head.max[0] + margin, bounds.max[1] + margin, head.max[2] + margin],
        );
        for k in 0..3 {
            face.min[k] = face.min[k].max(body.min[k]);
            face.max[k] = face.max[k].min(body.max[k]);
        }
        Ok(Self { body, face })
    }

    /// Default proportions: 5% margin, top 15% plus a 5% neck band.
    pub fn for_mesh(mesh: &BodyMesh) -> Result<Self> {
        let h = mesh.bounds().extent().y;
        Self::from_mesh(mesh, 0.05 * h, 0.15, 0.05)
    }

    pub fn get(&self, part: BodyPart) -> &Aabb {
        match part {
            BodyPart::Body => &self.body,
            BodyPart::Face => &self.face,
        }
    }
}

/// Spherical camera distribution around a box center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraSampler {
    pub elevation: [f64; 2],
    /// Azimuth intervals, chosen with equal probability.
    pub azimuth: Vec<[f64; 2]>,
    pub distance: [f64; 2],
    /// Square image size of sampled cameras.
    pub resolution: usize,
    /// Field of view is `fov_margin` times the angle subtended by the box.
    pub fov_margin: f64,
}

impl Default for CameraSampler {
    fn default() -> Self {
        Self {
            elevation: [-FRAC_PI_6, FRAC_PI_6],
            azimuth: vec![[-FRAC_PI_3, FRAC_PI_3], [2.0 * FRAC_PI_3, 4.0 * FRAC_PI_3]],
            distance: [2.0, 2.2],
            resolution: 64,
            fov_margin: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraDraw {
    pub part: BodyPart,
    pub elevation: f64,
    pub azimuth: f64,
    pub distance: f64,
    pub camera: Camera,
}

impl CameraSampler {
    /// Full azimuth circle, for reconstruction views.
    pub fn orbit(resolution: usize) -> Self {
        Self {
            azimuth: vec![[0.0, 2.0 * PI]],
            resolution,
            ..Self::default()
        }
    }

    pub fn sample(&self, rng: &mut impl Rng, boxes: &SceneBoxes, part: BodyPart) -> Result<CameraDraw> {
        if self.azimuth.is_empty() {
            return Err(precondition("camera sampler has no azimuth interval"));
        }
        let el = rng.gen_range(self.elevation[0]..=self.elevation[1]);
        let [lo, hi] = self.azimuth[rng.gen_range(0..self.azimuth.len())];
        let az = rng.gen_range(lo..hi);
        let d = rng.gen_range(self.distance[0]..=self.distance[1]);
        let camera = self.camera(boxes, part, el, az, d)?;
        Ok(CameraDraw {
            part,
            elevation: el,
            azimuth: az,
            distance: d,
            camera,
        })
    }

    /// Camera at `distance` from the target box center. Azimuth 0 sits on
    /// +z; near/far bracket the body box.
    pub fn camera(&self, boxes: &SceneBoxes, part: BodyPart, elevation: f64, azimuth: f64, distance: f64) -> Result<Camera> {
        let target_box = boxes.get(part);
        let center = target_box.center();
        let dir = Vec3::new(elevation.cos() * azimuth.sin(), elevation.sin(), elevation.cos() * azimuth.cos());
        let eye = center + dir * distance;
        let r = target_box.bounding_radius();
        if r >= distance {
            return Err(precondition(format!("camera distance {distance} inside the target box (radius {r})")));
        }
        let fov = (2.0 * (r / distance).asin() * self.fov_margin).min(PI * 0.9);
        let body_center = boxes.body.center();
        let reach = (eye - body_center).norm();
        let body_r = boxes.body.bounding_radius();
        let near = (reach - body_r).max(1e-3);
        let far = reach + body_r;
        Camera::look_at(eye, center, Vec3::new(0.0, 1.0, 0.0), fov, self.resolution, self.resolution, near, far)
    }
}

/// One of white, black or N(0.5, 0.1) noise, uniformly.
pub fn sample_background(rng: &mut impl Rng) -> BackgroundPolicy {
    match rng.gen_range(0..3) {
        0 => BackgroundPolicy::White,
        1 => BackgroundPolicy::Black,
        _ => BackgroundPolicy::gaussian(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn boxes() -> SceneBoxes {
        SceneBoxes::for_mesh(&capsule_rig(&CapsuleRigSpec::default()).template_mesh()).unwrap()
    }

    #[test]
    fn face_box_is_inside_the_body_box_and_near_the_top() {
        let b = boxes();
        assert!(b.body.contains_box(&b.face));
        assert!(b.face.min[1] > b.body.center().y);
    }

    #[test]
    fn draws_respect_the_ranges() {
        let s = CameraSampler::default();
        let b = boxes();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let d = s.sample(&mut rng, &b, BodyPart::Body).unwrap();
            assert!(d.elevation.abs() <= FRAC_PI_6);
            assert!((2.0..=2.2).contains(&d.distance));
            let a = d.azimuth.rem_euclid(2.0 * PI);
            assert!(!(FRAC_PI_3..=2.0 * FRAC_PI_3).contains(&a) && !(4.0 * FRAC_PI_3..=5.0 * FRAC_PI_3).contains(&a), "{a}");
            let c = b.body.center();
            assert!(((d.camera.position() - c).norm() - d.distance).abs() < 1e-9);
            let (r, col, _) = d.camera.project(&c).unwrap();
            assert!((r - 32.0).abs() < 1e-6 && (col - 32.0).abs() < 1e-6);
        }
    }

    #[test]
    fn box_corners_are_in_frame() {
        let s = CameraSampler::default();
        let b = boxes();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for part in [BodyPart::Body, BodyPart::Face] {
            let d = s.sample(&mut rng, &b, part).unwrap();
            let bx = b.get(part);
            for i in 0..8 {
                let p = Vec3::new(
                    if i & 1 == 0 { bx.min[0] } else { bx.max[0] },
                    if i & 2 == 0 { bx.min[1] } else { bx.max[1] },
                    if i & 4 == 0 { bx.min[2] } else { bx.max[2] },
                );
                let (r, c, z) = d.camera.project(&p).unwrap();
                assert!((0.0..=64.0).contains(&r) && (0.0..=64.0).contains(&c));
                assert!(z > d.camera.near && z < d.camera.far);
            }
        }
    }

    #[test]
    fn backgrounds_cover_all_three_policies() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws: Vec<_> = (0..60).map(|_| sample_background(&mut rng)).collect();
        assert!(draws.contains(&BackgroundPolicy::White));
        assert!(draws.contains(&BackgroundPolicy::Black));
        assert!(draws.contains(&BackgroundPolicy::gaussian()));
    }
}
