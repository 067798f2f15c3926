//! Multiresolution hash-grid positional encoding.
//!
//! Level `l` has `N_l = floor(base * scale^l)` cells per axis, i.e. `N_l + 1`
//! vertices. A level whose vertex count fits into the table is stored densely;
//! finer levels hash vertex coordinates into `table_size` slots with a
//! per-axis prime multiply XOR-folded.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

const PRIMES: [u64; 3] = [73_856_093, 19_349_663, 83_492_791];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub num_levels: usize,
    pub base_resolution: u32,
    pub per_level_scale: f64,
    pub log2_table_size: u32,
    pub feature_dim: usize,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            num_levels: 16,
            base_resolution: 16,
            per_level_scale: 1.381,
            log2_table_size: 19,
            feature_dim: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub resolution: u32,
    /// First entry of this level inside the flat table.
    pub offset: usize,
    /// Number of entries (each `feature_dim` wide).
    pub size: usize,
    pub dense: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HashGridEncoding {
    config: HashGridConfig,
    domain: Aabb,
    levels: Vec<Level>,
    /// `sum(level.size) * feature_dim` learnable values.
    pub table: Vec<f32>,
}

/// Corner indices and weights recorded during a forward pass.
#[derive(Clone, Debug, Default)]
pub struct EncodeTape {
    /// Absolute entry index per (level, corner).
    pub(crate) entries: Vec<u32>,
    pub(crate) weights: Vec<f64>,
    /// Fractional position inside the cell per level.
    pub(crate) frac: Vec<[f64; 3]>,
}

impl HashGridEncoding {
    pub fn new(config: HashGridConfig, domain: Aabb) -> Self {
        let table_size = 1usize << config.log2_table_size;
        let mut levels = Vec::with_capacity(config.num_levels);
        let mut offset = 0;
        for l in 0..config.num_levels {
            let resolution =
                (config.base_resolution as f64 * config.per_level_scale.powi(l as i32)).floor().max(1.0) as u32;
            let verts = (resolution as usize + 1).pow(3);
            let dense = verts <= table_size;
            let size = if dense { verts } else { table_size };
            levels.push(Level {
                resolution,
                offset,
                size,
                dense,
            });
            offset += size;
        }
        Self {
            table: vec![0.0; offset * config.feature_dim],
            config,
            domain,
            levels,
        }
    }

    pub fn init_uniform(&mut self, rng: &mut impl Rng, scale: f32) {
        for v in &mut self.table {
            *v = rng.gen_range(-scale..scale);
        }
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.config
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn output_dim(&self) -> usize {
        self.config.num_levels * self.config.feature_dim
    }

    /// Edge length of a finest-level cell along the shortest domain axis.
    pub fn finest_cell_size(&self) -> f64 {
        let e = self.domain.extent();
        e.min() / self.levels.last().map(|l| l.resolution as f64).unwrap_or(1.0)
    }

    pub fn new_tape(&self) -> EncodeTape {
        let n = self.config.num_levels;
        EncodeTape {
            entries: vec![0; n * 8],
            weights: vec![0.0; n * 8],
            frac: vec![[0.0; 3]; n],
        }
    }

    /// Entry index (within the level) of integer vertex `(x, y, z)`.
    #[inline]
    pub fn vertex_entry(&self, level: usize, v: [u32; 3]) -> usize {
        let lv = &self.levels[level];
        if lv.dense {
            let stride = lv.resolution as usize + 1;
            v[0] as usize + stride * (v[1] as usize + stride * v[2] as usize)
        } else {
            let h = (v[0] as u64).wrapping_mul(PRIMES[0])
                ^ (v[1] as u64).wrapping_mul(PRIMES[1])
                ^ (v[2] as u64).wrapping_mul(PRIMES[2]);
            (h % lv.size as u64) as usize
        }
    }

    /// Checked encoding of a point in canonical coordinates.
    pub fn encode(&self, x: &Vec3) -> Result<Vec<f64>> {
        if !self.domain.contains(x) {
            return Err(Error::Domain([x.x, x.y, x.z]));
        }
        let mut out = vec![0.0; self.output_dim()];
        let mut tape = self.new_tape();
        self.encode_normalized(self.domain.normalize(x), &mut out, &mut tape);
        Ok(out)
    }

    /// Encode box coordinates `u` in [0,1]^3 (clamped) into `out`.
    pub fn encode_normalized(&self, u: [f64; 3], out: &mut [f64], tape: &mut EncodeTape) {
        let fdim = self.config.feature_dim;
        let u = [u[0].clamp(0.0, 1.0), u[1].clamp(0.0, 1.0), u[2].clamp(0.0, 1.0)];
        for (l, lv) in self.levels.iter().enumerate() {
            let res = lv.resolution as f64;
            let mut cell = [0u32; 3];
            let mut frac = [0.0; 3];
            for k in 0..3 {
                let pos = u[k] * res;
                let c = (pos.floor() as i64).clamp(0, lv.resolution as i64 - 1);
                cell[k] = c as u32;
                frac[k] = pos - c as f64;
            }
            tape.frac[l] = frac;
            let out_l = &mut out[l * fdim..(l + 1) * fdim];
            out_l.fill(0.0);
            for corner in 0..8 {
                let bit = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                let mut w = 1.0;
                let mut v = [0u32; 3];
                for k in 0..3 {
                    if bit[k] == 1 {
                        w *= frac[k];
                        v[k] = cell[k] + 1;
                    } else {
                        w *= 1.0 - frac[k];
                        v[k] = cell[k];
                    }
                }
                let entry = lv.offset + self.vertex_entry(l, v);
                tape.entries[l * 8 + corner] = entry as u32;
                tape.weights[l * 8 + corner] = w;
                let feat = &self.table[entry * fdim..(entry + 1) * fdim];
                for (o, f) in out_l.iter_mut().zip(feat) {
                    *o += w * *f as f64;
                }
            }
        }
    }

    /// Reverse pass: scatter `d_out` into table gradients and optionally
    /// return the gradient with respect to the canonical-space input.
    pub fn backward(&self, tape: &EncodeTape, d_out: &[f64], table_grads: Option<&mut [f64]>, d_x: Option<&mut [f64; 3]>) {
        let fdim = self.config.feature_dim;
        if let Some(g) = table_grads {
            for l in 0..self.levels.len() {
                let d = &d_out[l * fdim..(l + 1) * fdim];
                if d.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for corner in 0..8 {
                    let e = tape.entries[l * 8 + corner] as usize;
                    let w = tape.weights[l * 8 + corner];
                    for (gi, di) in g[e * fdim..(e + 1) * fdim].iter_mut().zip(d) {
                        *gi += w * di;
                    }
                }
            }
        }
        if let Some(dx) = d_x {
            let extent = self.domain.extent();
            let mut acc = [0.0; 3];
            for (l, lv) in self.levels.iter().enumerate() {
                let d = &d_out[l * fdim..(l + 1) * fdim];
                let frac = tape.frac[l];
                let res = lv.resolution as f64;
                for corner in 0..8 {
                    let bit = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                    let e = tape.entries[l * 8 + corner] as usize;
                    let feat = &self.table[e * fdim..(e + 1) * fdim];
                    let proj: f64 = feat.iter().zip(d).map(|(f, di)| *f as f64 * di).sum();
                    if proj == 0.0 {
                        continue;
                    }
                    for k in 0..3 {
                        // d(weight)/d(frac_k)
                        let mut dw = if bit[k] == 1 { 1.0 } else { -1.0 };
                        for j in 0..3 {
                            if j != k {
                                dw *= if bit[j] == 1 { frac[j] } else { 1.0 - frac[j] };
                            }
                        }
                        acc[k] += proj * dw * res / extent[k];
                    }
                }
            }
            *dx = acc;
        }
    }
}
