//! Parametric skinned body: shape blend shapes, linear blend skinning and
//! the per-vertex transforms that carry the canonical template to any
//! target configuration.

mod rig_file;
pub mod synthetic;

pub use rig_file::{load_pose_sequence, save_pose_sequence, PoseFrame, RIG_FORMAT_VERSION, RIG_KIND};

use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape_mismatch, Error, Result};
use crate::math::{affine, rodrigues, transform_point, translation, Aabb, Mat3, Mat4, Vec3};

/// Minimum determinant accepted for a blended skinning transform.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RiggedBodyModel {
    pub template_vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub joint_names: Vec<String>,
    /// Parent of each joint; `None` for the root.
    pub parents: Vec<Option<usize>>,
    /// Rest positions of the joints in the canonical frame.
    pub joints: Vec<Vec3>,
    /// `N x J`, row-major.
    pub skinning_weights: Vec<f64>,
    /// `N x 3 x K`, row-major.
    pub shape_dirs: Vec<f64>,
    pub num_betas: usize,
    /// Axis-angle per joint of the pose the template is modelled in.
    pub canonical_pose: Vec<Vec3>,
}

/// Target pose and shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyConfiguration {
    /// Axis-angle rotation per joint.
    pub pose: Vec<[f64; 3]>,
    /// Root translation, applied after skinning.
    #[serde(default)]
    pub translation: [f64; 3],
    pub betas: Vec<f64>,
}

impl BodyConfiguration {
    pub fn validate(&self, model: &RiggedBodyModel) -> Result<()> {
        if self.pose.len() != model.num_joints() {
            return Err(precondition(format!(
                "pose has {} joints, model has {}",
                self.pose.len(),
                model.num_joints()
            )));
        }
        if self.betas.len() != model.num_betas {
            return Err(precondition(format!(
                "shape vector has length {}, model expects {}",
                self.betas.len(),
                model.num_betas
            )));
        }
        let finite = self.pose.iter().flatten().chain(&self.translation).chain(&self.betas).all(|v| v.is_finite());
        if !finite {
            return Err(precondition("body configuration contains non-finite values"));
        }
        Ok(())
    }
}

/// Triangle mesh in some configuration; shares `faces` with the template.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl BodyMesh {
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }
}

/// Per-vertex transforms `T = T^theta T^beta` with cached inverses.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexTransformSet {
    pub transforms: Vec<Mat4>,
    pub inverses: Vec<Mat4>,
    /// Translation-only shape part, one offset per vertex.
    pub shape_offsets: Vec<Vec3>,
    /// Skinning part including the root translation.
    pub pose: Vec<Mat4>,
}

impl VertexTransformSet {
    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }

    pub fn apply(&self, vertex: usize, p: &Vec3) -> Vec3 {
        transform_point(&self.transforms[vertex], p)
    }

    pub fn apply_inverse(&self, vertex: usize, p: &Vec3) -> Vec3 {
        transform_point(&self.inverses[vertex], p)
    }

    pub fn is_identity(&self) -> bool {
        self.transforms.iter().all(|t| *t == Mat4::identity())
    }
}

/// Inverse of an affine transform, or `None` when its linear block is
/// singular below the degeneracy threshold.
pub fn affine_inverse(m: &Mat4) -> std::result::Result<Mat4, f64> {
    if *m == Mat4::identity() {
        return Ok(Mat4::identity());
    }
    let linear: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
    let det = linear.determinant();
    if !(det.abs() >= DEGENERACY_THRESHOLD) {
        return Err(det);
    }
    let inv = linear.try_inverse().ok_or(det)?;
    let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
    Ok(affine(&inv, &(-(inv * t))))
}

/// Inverse of a rigid transform (orthonormal linear block).
fn rigid_inverse(m: &Mat4) -> Mat4 {
    let r: Mat3 = m.fixed_view::<3, 3>(0, 0).transpose();
    let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
    affine(&r, &(-(r * t)))
}

impl RiggedBodyModel {
    pub fn num_vertices(&self) -> usize {
        self.template_vertices.len()
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn weight(&self, vertex: usize, joint: usize) -> f64 {
        self.skinning_weights[vertex * self.num_joints() + joint]
    }

    pub fn canonical_configuration(&self) -> BodyConfiguration {
        BodyConfiguration {
            pose: self.canonical_pose.iter().map(|v| [v.x, v.y, v.z]).collect(),
            translation: [0.0; 3],
            betas: vec![0.0; self.num_betas],
        }
    }

    pub fn template_mesh(&self) -> BodyMesh {
        BodyMesh {
            vertices: self.template_vertices.clone(),
            faces: self.faces.clone(),
        }
    }

    /// Height of the canonical template along y.
    pub fn height(&self) -> f64 {
        let b = Aabb::from_points(&self.template_vertices);
        b.max[1] - b.min[1]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, j) = (self.num_vertices(), self.num_joints());
        if n == 0 || j == 0 {
            return Err(precondition("rig needs at least one vertex and one joint"));
        }
        if self.parents.len() != j || self.joint_names.len() != j || self.canonical_pose.len() != j {
            return Err(shape_mismatch(format!("{j} joint entries"), "inconsistent joint tables"));
        }
        if self.skinning_weights.len() != n * j {
            return Err(shape_mismatch(n * j, self.skinning_weights.len()));
        }
        if self.shape_dirs.len() != n * 3 * self.num_betas {
            return Err(shape_mismatch(n * 3 * self.num_betas, self.shape_dirs.len()));
        }
        for v in 0..n {
            let row = &self.skinning_weights[v * j..(v + 1) * j];
            if row.iter().any(|w| !(*w >= 0.0)) {
                return Err(precondition(format!("vertex {v} has a negative skinning weight")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(precondition(format!("skinning weights of vertex {v} sum to {s}")));
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|i| *i as usize >= n) {
                return Err(precondition(format!("face {fi} references a vertex out of range")));
            }
        }
        self.check_tree()
    }

    fn check_tree(&self) -> Result<()> {
        let roots = self.parents.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return Err(precondition(format!("joint hierarchy must have one root, found {roots}")));
        }
        for start in 0..self.num_joints() {
            let mut cur = start;
            for _ in 0..=self.num_joints() {
                match self.parents[cur] {
                    None => break,
                    Some(p) if p >= self.num_joints() => {
                        return Err(precondition(format!("joint {cur} has parent {p} out of range")))
                    }
                    Some(p) => cur = p,
                }
            }
            if self.parents[cur].is_some() {
                return Err(precondition(format!("joint {start} is on a cycle")));
            }
        }
        Ok(())
    }

    /// Joints ordered so every parent precedes its children.
    fn topological_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.num_joints());
        let mut placed = vec![false; self.num_joints()];
        while order.len() < self.num_joints() {
            for j in 0..self.num_joints() {
                if !placed[j] && self.parents[j].map_or(true, |p| placed[p]) {
                    placed[j] = true;
                    order.push(j);
                }
            }
        }
        order
    }

    /// Shaped vertices `V_0 + sum_k beta_k S_k` and the per-vertex offsets.
    pub fn shape_blend(&self, betas: &[f64]) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
        if betas.len() != self.num_betas {
            return Err(precondition(format!(
                "shape vector has length {}, model expects {}",
                betas.len(),
                self.num_betas
            )));
        }
        let k = self.num_betas;
        let offsets: Vec<Vec3> = (0..self.num_vertices())
            .map(|v| {
                let mut d = Vec3::zeros();
                for axis in 0..3 {
                    let base = (v * 3 + axis) * k;
                    d[axis] = betas.iter().zip(&self.shape_dirs[base..base + k]).map(|(b, s)| b * s).sum();
                }
                d
            })
            .collect();
        let shaped = self.template_vertices.iter().zip(&offsets).map(|(v, d)| v + d).collect();
        Ok((shaped, offsets))
    }

    /// Global joint transforms mapping rest-frame points to posed ones for
    /// a given pose (each rotation is about the joint's rest position).
    pub fn joint_transforms(&self, pose: &[Vec3]) -> Vec<Mat4> {
        let mut global = vec![Mat4::identity(); self.num_joints()];
        for j in self.topological_order() {
            let r = rodrigues(&pose[j]);
            let local = affine(&r, &(self.joints[j] - r * self.joints[j]));
            global[j] = match self.parents[j] {
                Some(p) => global[p] * local,
                None => local,
            };
        }
        global
    }

    /// Per-joint transforms relative to the canonical pose:
    /// `G_j(theta) G_j(theta_0)^-1`.
    pub fn relative_joint_transforms(&self, pose: &[Vec3]) -> Vec<Mat4> {
        if pose == self.canonical_pose.as_slice() {
            return vec![Mat4::identity(); self.num_joints()];
        }
        let posed = self.joint_transforms(pose);
        let rest = self.joint_transforms(&self.canonical_pose);
        posed.iter().zip(&rest).map(|(g, g0)| g * rigid_inverse(g0)).collect()
    }

    /// Skinning-weighted blend of joint transforms for one vertex.
    ///
    /// The blend is expressed as an offset from the dominant joint's
    /// transform so that equal joint transforms blend to exactly that
    /// transform regardless of rounding in the weights.
    fn blend(&self, vertex: usize, joint_tf: &[Mat4]) -> Mat4 {
        let j = self.num_joints();
        let row = &self.skinning_weights[vertex * j..(vertex + 1) * j];
        let anchor = (0..j).max_by(|a, b| row[*a].total_cmp(&row[*b]).then(b.cmp(a))).unwrap();
        let mut m = joint_tf[anchor];
        for (k, w) in row.iter().enumerate() {
            if k != anchor && *w != 0.0 {
                m += (joint_tf[k] - joint_tf[anchor]) * *w;
            }
        }
        m
    }

    /// Linear blend skinning of already shaped vertices.
    pub fn lbs(&self, pose: &[[f64; 3]], shaped: &[Vec3]) -> Result<(Vec<Vec3>, Vec<Mat4>)> {
        if pose.len() != self.num_joints() {
            return Err(precondition(format!("pose has {} joints, model has {}", pose.len(), self.num_joints())));
        }
        if shaped.len() != self.num_vertices() {
            return Err(shape_mismatch(self.num_vertices(), shaped.len()));
        }
        if pose.iter().flatten().any(|v| v.is_nan()) {
            return Err(precondition("pose contains NaN"));
        }
        let pose: Vec<Vec3> = pose.iter().map(|p| Vec3::from(*p)).collect();
        let rel = self.relative_joint_transforms(&pose);
        let tfs: Vec<Mat4> = (0..self.num_vertices()).map(|v| self.blend(v, &rel)).collect();
        let posed = shaped.iter().zip(&tfs).map(|(p, t)| transform_point(t, p)).collect();
        Ok((posed, tfs))
    }

    /// Transforms carrying every template vertex to its position under
    /// `target`, with inverses.
    pub fn vertex_transforms(&self, target: &BodyConfiguration) -> Result<VertexTransformSet> {
        target.validate(self)?;
        let (shaped, offsets) = self.shape_blend(&target.betas)?;
        let (_, skin) = self.lbs(&target.pose, &shaped)?;
        let root = Vec3::from(target.translation);
        let root_tf = if root == Vec3::zeros() { None } else { Some(translation(&root)) };
        let mut transforms = Vec::with_capacity(self.num_vertices());
        let mut inverses = Vec::with_capacity(self.num_vertices());
        let mut pose = Vec::with_capacity(self.num_vertices());
        for (v, (s, d)) in skin.iter().zip(&offsets).enumerate() {
            let det = s.fixed_view::<3, 3>(0, 0).determinant();
            if !(det >= DEGENERACY_THRESHOLD) {
                return Err(Error::Degenerate { vertex: v, det });
            }
            let p = match &root_tf {
                Some(r) => r * s,
                None => *s,
            };
            let t = if *d == Vec3::zeros() { p } else { p * translation(d) };
            let inv = affine_inverse(&t).map_err(|det| Error::Degenerate { vertex: v, det })?;
            transforms.push(t);
            inverses.push(inv);
            pose.push(p);
        }
        Ok(VertexTransformSet {
            transforms,
            inverses,
            shape_offsets: offsets,
            pose,
        })
    }

    /// Mesh of the model under `target`.
    pub fn posed_mesh(&self, target: &BodyConfiguration) -> Result<BodyMesh> {
        let set = self.vertex_transforms(target)?;
        Ok(self.mesh_from_transforms(&set))
    }

    pub fn mesh_from_transforms(&self, set: &VertexTransformSet) -> BodyMesh {
        BodyMesh {
            vertices: self.template_vertices.iter().enumerate().map(|(v, p)| set.apply(v, p)).collect(),
            faces: self.faces.clone(),
        }
    }
}
