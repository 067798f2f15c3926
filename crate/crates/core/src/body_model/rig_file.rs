//! Rig files and pose sequences.
//!
//! A rig is a container of kind `"rig"`. Its JSON `meta` holds
//! `{num_vertices, num_joints, num_betas, joint_names, parents, faces}`
//! (`parents[j] = -1` marks the root). Float blocks:
//!
//! | block               | shape       |
//! |---------------------|-------------|
//! | `template_vertices` | `N x 3`     |
//! | `shape_dirs`        | `N x 3 x K` |
//! | `skinning_weights`  | `N x J`     |
//! | `joints`            | `J x 3`     |
//! | `canonical_pose`    | `J x 3` (optional, zero if absent) |
//! | `pose_correctives`  | reserved, ignored when present |
//!
//! A pose sequence is a JSON array of
//! `{"frame_index", "theta": [[x, y, z]; J], "translation": [x, y, z], "beta": [..K]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BodyConfiguration, RiggedBodyModel};
use crate::container::{Block, Container};
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const RIG_KIND: &str = "rig";
pub const RIG_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RigMeta {
    num_vertices: usize,
    num_joints: usize,
    num_betas: usize,
    joint_names: Vec<String>,
    parents: Vec<i64>,
    faces: Vec<[u32; 3]>,
}

fn flatten(v: &[Vec3]) -> Vec<f32> {
    v.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect()
}

fn unflatten(data: &[f32]) -> Vec<Vec3> {
    data.chunks_exact(3).map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect()
}

impl RiggedBodyModel {
    pub fn to_container(&self) -> Container {
        let meta = RigMeta {
            num_vertices: self.num_vertices(),
            num_joints: self.num_joints(),
            num_betas: self.num_betas,
            joint_names: self.joint_names.clone(),
            parents: self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            faces: self.faces.clone(),
        };
        let (n, j, k) = (self.num_vertices(), self.num_joints(), self.num_betas);
        let mut c = Container::new(RIG_KIND, RIG_FORMAT_VERSION, serde_json::to_value(meta).expect("rig meta serializes"));
        c.push(Block::new("template_vertices", vec![n, 3], flatten(&self.template_vertices)));
        c.push(Block::new("shape_dirs", vec![n, 3, k], self.shape_dirs.iter().map(|v| *v as f32).collect()));
        c.push(Block::new("skinning_weights", vec![n, j], self.skinning_weights.iter().map(|v| *v as f32).collect()));
        c.push(Block::new("joints", vec![j, 3], flatten(&self.joints)));
        c.push(Block::new("canonical_pose", vec![j, 3], flatten(&self.canonical_pose)));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != RIG_KIND {
            return Err(Error::Format(format!("expected `{RIG_KIND}`, found `{}`", c.kind)));
        }
        if c.format_version != RIG_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported rig version {}", c.format_version)));
        }
        let meta: RigMeta = serde_json::from_value(c.meta.clone())?;
        let (n, j, k) = (meta.num_vertices, meta.num_joints, meta.num_betas);
        let get = |name: &str, len: usize| -> Result<&[f32]> {
            let b = c.block(name)?;
            if b.data.len() != len {
                return Err(Error::Format(format!("block `{name}` has {} values, expected {len}", b.data.len())));
            }
            Ok(&b.data)
        };
        let template_vertices = unflatten(get("template_vertices", n * 3)?);
        let shape_dirs = get("shape_dirs", n * 3 * k)?.iter().map(|v| *v as f64).collect();
        // renormalize rows so quantized weights still sum to one
        let mut skinning_weights: Vec<f64> = get("skinning_weights", n * j)?.iter().map(|v| *v as f64).collect();
        for row in skinning_weights.chunks_mut(j) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|w| *w /= s);
            }
        }
        let joints = unflatten(get("joints", j * 3)?);
        let canonical_pose = match c.block("canonical_pose") {
            Ok(_) => unflatten(get("canonical_pose", j * 3)?),
            Err(_) => vec![Vec3::zeros(); j],
        };
        let parents = meta
            .parents
            .iter()
            .map(|p| if *p < 0 { None } else { Some(*p as usize) })
            .collect();
        let model = RiggedBodyModel {
            template_vertices,
            faces: meta.faces,
            joint_names: meta.joint_names,
            parents,
            joints,
            skinning_weights,
            shape_dirs,
            num_betas: k,
            canonical_pose,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

/// One entry of a pose-sequence file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub frame_index: usize,
    pub theta: Vec<[f64; 3]>,
    #[serde(default)]
    pub translation: [f64; 3],
    pub beta: Vec<f64>,
}

impl PoseFrame {
    pub fn configuration(&self) -> BodyConfiguration {
        BodyConfiguration {
            pose: self.theta.clone(),
            translation: self.translation,
            betas: self.beta.clone(),
        }
    }
}

pub fn load_pose_sequence(path: impl AsRef<Path>) -> Result<Vec<PoseFrame>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn save_pose_sequence(path: impl AsRef<Path>, frames: &[PoseFrame]) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(frames)?)?;
    Ok(())
}
