//! Small procedural rigs used by tests, examples and desk-scale experiments.

use super::RiggedBodyModel;
use crate::math::{Mat3, Vec3};

/// Capsule along +y, centered at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct CapsuleRigSpec {
    /// 1 (single root joint at the center) or 3 (chain along the axis).
    pub joints: usize,
    /// Half length of the axis segment.
    pub half_length: f64,
    pub radius: f64,
    pub cap_rings: usize,
    pub body_rings: usize,
    pub segments: usize,
}

impl Default for CapsuleRigSpec {
    fn default() -> Self {
        Self {
            joints: 3,
            half_length: 0.45,
            radius: 0.22,
            cap_rings: 6,
            body_rings: 12,
            segments: 24,
        }
    }
}

/// Triangulated capsule around the y axis with outward-facing triangles.
/// Returns vertices, faces and, per vertex, the closest axis point.
pub fn capsule_mesh(half_length: f64, radius: f64, cap_rings: usize, body_rings: usize, segments: usize) -> (Vec<Vec3>, Vec<[u32; 3]>, Vec<Vec3>) {
    let (l, r) = (half_length, radius);
    let quarter = std::f64::consts::FRAC_PI_2;
    let mut rings: Vec<(f64, f64)> = Vec::new();
    for i in 1..=cap_rings {
        let phi = -quarter + quarter * i as f64 / cap_rings as f64;
        rings.push((r * phi.cos(), -l + r * phi.sin()));
    }
    for i in 1..=body_rings {
        rings.push((r, -l + 2.0 * l * i as f64 / body_rings as f64));
    }
    for i in 1..cap_rings {
        let phi = quarter * i as f64 / cap_rings as f64;
        rings.push((r * phi.cos(), l + r * phi.sin()));
    }
    let mut vertices = vec![Vec3::new(0.0, -l - r, 0.0)];
    let mut axis = vec![Vec3::new(0.0, -l, 0.0)];
    for (rho, y) in &rings {
        for s in 0..segments {
            let theta = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(Vec3::new(rho * theta.cos(), *y, rho * theta.sin()));
            axis.push(Vec3::new(0.0, y.clamp(-l, l), 0.0));
        }
    }
    vertices.push(Vec3::new(0.0, l + r, 0.0));
    axis.push(Vec3::new(0.0, l, 0.0));
    let top = (vertices.len() - 1) as u32;
    let ring = |k: usize, s: usize| (1 + k * segments + s % segments) as u32;
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(0, s), ring(0, s + 1)]);
    }
    for k in 0..rings.len() - 1 {
        for s in 0..segments {
            let a = ring(k, s);
            faces.push([a, ring(k + 1, s + 1), ring(k, s + 1)]);
            faces.push([a, ring(k + 1, s), ring(k + 1, s + 1)]);
        }
    }
    let last = rings.len() - 1;
    for s in 0..segments {
        faces.push([top, ring(last, s + 1), ring(last, s)]);
    }
    (vertices, faces, axis)
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    let t = ((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Capsule rig with two shape directions: `beta_0` scales girth
/// (radial offset), `beta_1` scales height (axial offset).
pub fn capsule_rig(spec: &CapsuleRigSpec) -> RiggedBodyModel {
    assert!(spec.joints == 1 || spec.joints == 3, "capsule rigs have 1 or 3 joints");
    let (vertices, faces, axis) = capsule_mesh(spec.half_length, spec.radius, spec.cap_rings, spec.body_rings, spec.segments);
    let l = spec.half_length;
    let (joints, parents, names) = if spec.joints == 1 {
        (vec![Vec3::zeros()], vec![None], vec!["root".to_string()])
    } else {
        (
            vec![Vec3::new(0.0, -l, 0.0), Vec3::new(0.0, -l / 3.0, 0.0), Vec3::new(0.0, l / 3.0, 0.0)],
            vec![None, Some(0), Some(1)],
            vec!["root".to_string(), "middle".to_string(), "tip".to_string()],
        )
    };
    let nj = joints.len();
    let mut weights = Vec::with_capacity(vertices.len() * nj);
    let band = 0.15 * l;
    for v in &vertices {
        if nj == 1 {
            weights.push(1.0);
            continue;
        }
        let t1 = smoothstep(-l / 3.0 - band, -l / 3.0 + band, v.y);
        let t2 = smoothstep(l / 3.0 - band, l / 3.0 + band, v.y);
        weights.extend_from_slice(&[1.0 - t1, t1 - t2, t2]);
    }
    let mut shape_dirs = Vec::with_capacity(vertices.len() * 6);
    for (v, a) in vertices.iter().zip(&axis) {
        let radial = v - a;
        shape_dirs.extend_from_slice(&[radial.x, 0.0, 0.0, v.y, radial.z, 0.0]);
    }
    RiggedBodyModel {
        template_vertices: vertices,
        faces,
        joint_names: names,
        parents,
        joints,
        skinning_weights: weights,
        shape_dirs,
        num_betas: 2,
        canonical_pose: vec![Vec3::zeros(); nj],
    }
}

struct Part {
    a: Vec3,
    b: Vec3,
    radius: f64,
    /// (joint, joint) blended along the part from `a` to `b`, or one joint.
    joints: (usize, usize),
}

/// A seven-joint humanoid (pelvis, spine, head, two shoulders, two hips) in
/// a T-pose built from capsule limbs, about 1.7 units tall.
pub fn humanoid_rig() -> RiggedBodyModel {
    let joints = vec![
        Vec3::new(0.0, -0.05, 0.0),
        Vec3::new(0.0, 0.25, 0.0),
        Vec3::new(0.0, 0.55, 0.0),
        Vec3::new(0.17, 0.45, 0.0),
        Vec3::new(-0.17, 0.45, 0.0),
        Vec3::new(0.1, -0.12, 0.0),
        Vec3::new(-0.1, -0.12, 0.0),
    ];
    let parents = vec![None, Some(0), Some(1), Some(1), Some(1), Some(0), Some(0)];
    let names = ["pelvis", "spine", "head", "left_shoulder", "right_shoulder", "left_hip", "right_hip"];
    let parts = [
        Part { a: Vec3::new(0.0, -0.05, 0.0), b: Vec3::new(0.0, 0.42, 0.0), radius: 0.16, joints: (0, 1) },
        Part { a: Vec3::new(0.0, 0.64, 0.0), b: Vec3::new(0.0, 0.72, 0.0), radius: 0.11, joints: (2, 2) },
        Part { a: Vec3::new(0.2, 0.45, 0.0), b: Vec3::new(0.62, 0.45, 0.0), radius: 0.055, joints: (3, 3) },
        Part { a: Vec3::new(-0.2, 0.45, 0.0), b: Vec3::new(-0.62, 0.45, 0.0), radius: 0.055, joints: (4, 4) },
        Part { a: Vec3::new(0.1, -0.15, 0.0), b: Vec3::new(0.1, -0.78, 0.0), radius: 0.07, joints: (5, 5) },
        Part { a: Vec3::new(-0.1, -0.15, 0.0), b: Vec3::new(-0.1, -0.78, 0.0), radius: 0.07, joints: (6, 6) },
    ];
    let nj = joints.len();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut weights = Vec::new();
    let mut shape_dirs = Vec::new();
    for part in &parts {
        let half = 0.5 * (part.b - part.a).norm();
        let (local, local_faces, local_axis) = capsule_mesh(half, part.radius, 4, 8, 16);
        let dir = (part.b - part.a) / (2.0 * half);
        let rot = rotation_from_y(&dir);
        let mid = 0.5 * (part.a + part.b);
        let base = vertices.len() as u32;
        for (p, ax) in local.iter().zip(&local_axis) {
            let world = mid + rot * p;
            let axis_pt = mid + rot * ax;
            vertices.push(world);
            let mut row = vec![0.0; nj];
            let t = ((axis_pt - part.a).dot(&dir) / (2.0 * half)).clamp(0.0, 1.0);
            let s = smoothstep(0.35, 0.65, t);
            row[part.joints.0] += 1.0 - s;
            row[part.joints.1] += s;
            weights.extend(row);
            let radial = world - axis_pt;
            let y = world.y;
            shape_dirs.extend_from_slice(&[radial.x, 0.0, radial.y, y, radial.z, 0.0]);
        }
        faces.extend(local_faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    RiggedBodyModel {
        template_vertices: vertices,
        faces,
        joint_names: names.iter().map(|s| s.to_string()).collect(),
        parents,
        joints,
        skinning_weights: weights,
        shape_dirs,
        num_betas: 2,
        canonical_pose: vec![Vec3::zeros(); nj],
    }
}

/// Rotation taking +y onto the unit vector `d`.
fn rotation_from_y(d: &Vec3) -> Mat3 {
    let y = Vec3::new(0.0, 1.0, 0.0);
    let axis = y.cross(d);
    let s = axis.norm();
    let c = y.dot(d);
    if s < 1e-12 {
        return if c > 0.0 { Mat3::identity() } else { Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)) };
    }
    crate::math::rodrigues(&(axis / s * s.atan2(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_volume(v: &[Vec3], f: &[[u32; 3]]) -> f64 {
        f.iter()
            .map(|t| v[t[0] as usize].dot(&v[t[1] as usize].cross(&v[t[2] as usize])) / 6.0)
            .sum()
    }

    #[test]
    fn capsule_mesh_is_closed_and_outward() {
        let (v, f, _) = capsule_mesh(0.5, 0.25, 8, 16, 48);
        let exact = std::f64::consts::PI * 0.25f64.powi(2) * (1.0 + 4.0 / 3.0 * 0.25);
        let vol = signed_volume(&v, &f);
        assert!(vol > 0.0 && (vol - exact).abs() / exact < 0.02, "{vol} vs {exact}");
        // every edge is shared by exactly two faces
        let mut edges = std::collections::HashMap::new();
        for t in &f {
            for k in 0..3 {
                let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
        assert!(edges.values().all(|c| *c == 2));
    }

    #[test]
    fn girth_direction_scales_radius() {
        let rig = capsule_rig(&CapsuleRigSpec { joints: 1, ..CapsuleRigSpec::default() });
        let (shaped, _) = rig.shape_blend(&[0.5, 0.0]).unwrap();
        let max_r = shaped.iter().map(|p| (p.x * p.x + p.z * p.z).sqrt()).fold(0.0, f64::max);
        assert!((max_r - 1.5 * 0.22).abs() < 1e-9);
    }

    #[test]
    fn humanoid_parts_are_oriented_outward() {
        let rig = humanoid_rig();
        assert!(signed_volume(&rig.template_vertices, &rig.faces) > 0.0);
        assert!((rig.height() - 1.7).abs() < 0.1);
    }
}
