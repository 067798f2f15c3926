use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::hash_grid::{EncodeTape, HashGridConfig, HashGridEncoding};
use super::mlp::{Activation, LayerSpec, Mlp, MlpTape};
use super::SdfField;
use crate::error::{precondition, Error, Result};
use crate::math::{Aabb, Rgb, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub domain: Aabb,
    pub grid: HashGridConfig,
    pub sdf_hidden: usize,
    /// Geometry feature width handed from the SDF network to the color network.
    pub geo_feat_dim: usize,
    pub color_hidden: usize,
    /// Frequency bands of the view-direction embedding.
    pub dir_bands: usize,
    /// Zero the direction input so color depends on position only.
    pub direction_independent: bool,
    /// Radius of the sphere approximated by the initial zero level set.
    pub init_radius: f64,
    pub init_sharpness: f64,
    pub softplus_beta: f64,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            domain: Aabb::cube([0.0; 3], 1.0),
            grid: HashGridConfig::default(),
            sdf_hidden: 64,
            geo_feat_dim: 15,
            color_hidden: 64,
            dir_bands: 4,
            direction_independent: false,
            init_radius: 0.5,
            init_sharpness: 20.0,
            softplus_beta: 100.0,
            seed: 0,
        }
    }
}

impl FieldConfig {
    /// Reduced grid and widths sized for single-machine CPU training.
    pub fn desk() -> Self {
        Self {
            grid: HashGridConfig {
                num_levels: 8,
                base_resolution: 16,
                per_level_scale: 1.5,
                log2_table_size: 15,
                feature_dim: 2,
            },
            sdf_hidden: 32,
            color_hidden: 32,
            ..Self::default()
        }
    }

    /// Two-level grid with a 16-entry table, for gradient checks.
    pub fn tiny() -> Self {
        Self {
            grid: HashGridConfig {
                num_levels: 2,
                base_resolution: 2,
                per_level_scale: 2.0,
                log2_table_size: 4,
                feature_dim: 2,
            },
            sdf_hidden: 8,
            geo_feat_dim: 4,
            color_hidden: 8,
            dir_bands: 1,
            ..Self::default()
        }
    }

    pub fn dir_embedding_dim(&self) -> usize {
        3 + 6 * self.dir_bands
    }
}

/// Learnable parameter groups. Geometry is `{HashTable, SdfNet, Sharpness}`,
/// appearance is `{ColorNet}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    HashTable,
    SdfNet,
    Sharpness,
    ColorNet,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [ParamGroup::HashTable, ParamGroup::SdfNet, ParamGroup::Sharpness, ParamGroup::ColorNet];

    pub fn is_geometry(self) -> bool {
        !matches!(self, ParamGroup::ColorNet)
    }
}

/// Hash-grid encoding feeding a depth-2 SDF network and a depth-3 color
/// network, plus the learnable log-sharpness of the logistic density.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitAvatarField {
    config: FieldConfig,
    pub encoding: HashGridEncoding,
    pub sdf_net: Mlp,
    pub color_net: Mlp,
    pub log_sharpness: f32,
}

/// Gradient accumulators, one per parameter group, in 64-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrads {
    pub table: Vec<f64>,
    pub sdf_net: Vec<f64>,
    pub color_net: Vec<f64>,
    pub log_sharpness: f64,
}

impl FieldGrads {
    pub fn zero(&mut self) {
        self.table.fill(0.0);
        self.sdf_net.fill(0.0);
        self.color_net.fill(0.0);
        self.log_sharpness = 0.0;
    }

    pub fn add(&mut self, other: &FieldGrads) {
        for (a, b) in self.table.iter_mut().zip(&other.table) {
            *a += b;
        }
        for (a, b) in self.sdf_net.iter_mut().zip(&other.sdf_net) {
            *a += b;
        }
        for (a, b) in self.color_net.iter_mut().zip(&other.color_net) {
            *a += b;
        }
        self.log_sharpness += other.log_sharpness;
    }

    pub fn scale(&mut self, k: f64) {
        self.table.iter_mut().for_each(|v| *v *= k);
        self.sdf_net.iter_mut().for_each(|v| *v *= k);
        self.color_net.iter_mut().for_each(|v| *v *= k);
        self.log_sharpness *= k;
    }

    pub fn group(&self, g: ParamGroup) -> &[f64] {
        match g {
            ParamGroup::HashTable => &self.table,
            ParamGroup::SdfNet => &self.sdf_net,
            ParamGroup::ColorNet => &self.color_net,
            ParamGroup::Sharpness => std::slice::from_ref(&self.log_sharpness),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.log_sharpness.is_finite()
            && self.table.iter().all(|v| v.is_finite())
            && self.sdf_net.iter().all(|v| v.is_finite())
            && self.color_net.iter().all(|v| v.is_finite())
    }
}

/// Forward record of one point evaluation, consumed by the reverse pass.
#[derive(Clone, Debug)]
pub struct PointTape {
    enc: EncodeTape,
    sdf_input: Vec<f64>,
    sdf: MlpTape,
    color_input: Vec<f64>,
    color: MlpTape,
    colored: bool,
    scratch: Vec<f64>,
}

type TapeKey = (usize, usize, usize, usize);

thread_local! {
    static TAPES: RefCell<Vec<(TapeKey, PointTape)>> = const { RefCell::new(Vec::new()) };
}

impl ImplicitAvatarField {
    pub fn new(config: FieldConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut encoding = HashGridEncoding::new(config.grid.clone(), config.domain);
        encoding.init_uniform(&mut rng, 1e-4);

        let sdf_in = 3 + encoding.output_dim();
        let mut sdf_net = Mlp::new(vec![
            LayerSpec {
                inputs: sdf_in,
                outputs: config.sdf_hidden,
                activation: Activation::Softplus { beta: config.softplus_beta },
            },
            LayerSpec {
                inputs: config.sdf_hidden,
                outputs: 1 + config.geo_feat_dim,
                activation: Activation::Identity,
            },
        ]);
        geometric_init(&mut sdf_net, config.init_radius, &mut rng);

        let color_in = config.geo_feat_dim + config.dir_embedding_dim();
        let mut color_net = Mlp::new(vec![
            LayerSpec {
                inputs: color_in,
                outputs: config.color_hidden,
                activation: Activation::Relu,
            },
            LayerSpec {
                inputs: config.color_hidden,
                outputs: config.color_hidden,
                activation: Activation::Relu,
            },
            LayerSpec {
                inputs: config.color_hidden,
                outputs: 3,
                activation: Activation::Sigmoid,
            },
        ]);
        color_net.init_default(&mut rng);

        Self {
            log_sharpness: config.init_sharpness.ln() as f32,
            config,
            encoding,
            sdf_net,
            color_net,
        }
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn domain(&self) -> &Aabb {
        &self.config.domain
    }

    pub fn set_direction_independent(&mut self, flag: bool) {
        self.config.direction_independent = flag;
    }

    pub fn sharpness_value(&self) -> f64 {
        (self.log_sharpness as f64).exp()
    }

    pub fn num_params(&self) -> usize {
        self.encoding.table.len() + self.sdf_net.num_params() + self.color_net.num_params() + 1
    }

    pub fn zero_grads(&self) -> FieldGrads {
        FieldGrads {
            table: vec![0.0; self.encoding.table.len()],
            sdf_net: vec![0.0; self.sdf_net.num_params()],
            color_net: vec![0.0; self.color_net.num_params()],
            log_sharpness: 0.0,
        }
    }

    pub fn new_tape(&self) -> PointTape {
        PointTape {
            enc: self.encoding.new_tape(),
            sdf_input: vec![0.0; self.sdf_net.input_dim()],
            sdf: self.sdf_net.new_tape(),
            color_input: vec![0.0; self.color_net.input_dim()],
            color: self.color_net.new_tape(),
            colored: false,
            scratch: vec![0.0; self.sdf_net.input_dim().max(self.color_net.input_dim())],
        }
    }

    fn tape_key(&self) -> TapeKey {
        (
            self.encoding.output_dim(),
            self.sdf_net.num_params(),
            self.color_net.num_params(),
            self.config.grid.num_levels,
        )
    }

    fn with_tape<R>(&self, f: impl FnOnce(&mut PointTape) -> R) -> R {
        let key = self.tape_key();
        TAPES.with(|cell| {
            let mut tapes = cell.borrow_mut();
            let idx = match tapes.iter().position(|(k, _)| *k == key) {
                Some(i) => i,
                None => {
                    tapes.push((key, self.new_tape()));
                    tapes.len() - 1
                }
            };
            f(&mut tapes[idx].1)
        })
    }

    /// Signed distance at `x`, recording the evaluation in `tape`. Points
    /// outside the domain are evaluated at the nearest domain point and
    /// offset by their distance to the domain.
    pub fn forward_sdf(&self, x: &Vec3, tape: &mut PointTape) -> f64 {
        let domain = &self.config.domain;
        let inside = domain.clamp(x);
        let outside = (x - inside).norm();
        let center = domain.center();
        let local = inside - center;
        let enc_dim = self.encoding.output_dim();
        tape.sdf_input[0] = local.x;
        tape.sdf_input[1] = local.y;
        tape.sdf_input[2] = local.z;
        self.encoding
            .encode_normalized(domain.normalize(&inside), &mut tape.sdf_input[3..3 + enc_dim], &mut tape.enc);
        tape.colored = false;
        let out = self.sdf_net.forward(&tape.sdf_input, &mut tape.sdf);
        out[0] + outside
    }

    /// Radiance for the point last passed to `forward_sdf` on this tape.
    pub fn forward_color(&self, d: &Vec3, tape: &mut PointTape) -> Rgb {
        let geo = self.config.geo_feat_dim;
        let feats = self.sdf_net.output(&tape.sdf);
        tape.color_input[..geo].copy_from_slice(&feats[1..1 + geo]);
        embed_direction(
            d,
            self.config.dir_bands,
            self.config.direction_independent,
            &mut tape.color_input[geo..],
        );
        let rgb = self.color_net.forward(&tape.color_input, &mut tape.color);
        tape.colored = true;
        [rgb[0], rgb[1], rgb[2]]
    }

    /// Reverse pass for one point.
    ///
    /// `d_rgb` is only honored when the tape holds a color evaluation.
    /// Parameter gradients go to `grads` (geometry groups only when
    /// `train_geometry`), and the spatial gradient of the SDF path to `d_x`.
    pub fn backward(
        &self,
        tape: &mut PointTape,
        d_sdf: f64,
        d_rgb: Option<&[f64; 3]>,
        mut grads: Option<&mut FieldGrads>,
        train_geometry: bool,
        d_x: Option<&mut Vec3>,
    ) {
        let geo = self.config.geo_feat_dim;
        let mut d_sdf_out = [0.0f64; 64];
        let d_sdf_out = &mut d_sdf_out[..1 + geo];
        d_sdf_out[0] = d_sdf;
        let need_geometry = train_geometry || d_x.is_some();
        if let (Some(d_rgb), true) = (d_rgb, tape.colored) {
            let d_in = &mut tape.scratch[..self.color_net.input_dim()];
            self.color_net.backward(
                &tape.color,
                d_rgb,
                grads.as_deref_mut().map(|g| g.color_net.as_mut_slice()),
                if need_geometry { Some(d_in) } else { None },
            );
            if need_geometry {
                for k in 0..geo {
                    d_sdf_out[1 + k] += tape.scratch[k];
                }
            }
        }
        if !need_geometry || d_sdf_out.iter().all(|v| *v == 0.0) {
            if let Some(dx) = d_x {
                *dx = Vec3::zeros();
            }
            return;
        }
        let n_in = self.sdf_net.input_dim();
        let d_in = &mut tape.scratch[..n_in];
        let net_grads = if train_geometry {
            grads.as_deref_mut().map(|g| g.sdf_net.as_mut_slice())
        } else {
            None
        };
        self.sdf_net.backward(&tape.sdf, d_sdf_out, net_grads, Some(d_in));
        let table_grads = if train_geometry {
            grads.map(|g| g.table.as_mut_slice())
        } else {
            None
        };
        let mut enc_dx = [0.0; 3];
        let want_dx = d_x.is_some();
        self.encoding.backward(
            &tape.enc,
            &tape.scratch[3..n_in],
            table_grads,
            if want_dx { Some(&mut enc_dx) } else { None },
        );
        if let Some(dx) = d_x {
            *dx = Vec3::new(
                tape.scratch[0] + enc_dx[0],
                tape.scratch[1] + enc_dx[1],
                tape.scratch[2] + enc_dx[2],
            );
        }
    }

    /// Checked encoding of a canonical point.
    pub fn encode(&self, x: &Vec3) -> Result<Vec<f64>> {
        self.encoding.encode(x)
    }

    /// Signed distance and its spatial gradient by reverse-mode
    /// differentiation.
    pub fn sdf(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        if !self.config.domain.contains(x) {
            return Err(Error::Domain([x.x, x.y, x.z]));
        }
        self.with_tape(|tape| {
            let f = self.forward_sdf(x, tape);
            let mut g = Vec3::zeros();
            self.backward(tape, 1.0, None, None, false, Some(&mut g));
            if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
                return Err(Error::Numeric(format!("sdf evaluation at ({}, {}, {})", x.x, x.y, x.z)));
            }
            Ok((f, g))
        })
    }

    /// Radiance at `x` seen along unit direction `d`.
    pub fn color(&self, x: &Vec3, d: &Vec3) -> Result<Rgb> {
        if (d.norm() - 1.0).abs() > 1e-6 {
            return Err(precondition(format!("view direction must be unit length, |d| = {}", d.norm())));
        }
        if !self.config.domain.contains(x) {
            return Err(Error::Domain([x.x, x.y, x.z]));
        }
        let rgb = self.with_tape(|tape| {
            self.forward_sdf(x, tape);
            self.forward_color(d, tape)
        });
        if !rgb.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("color evaluation at ({}, {}, {})", x.x, x.y, x.z)));
        }
        Ok(rgb)
    }

    /// Mutable flat view of a parameter group.
    pub fn params_mut(&mut self, g: ParamGroup) -> &mut [f32] {
        match g {
            ParamGroup::HashTable => &mut self.encoding.table,
            ParamGroup::SdfNet => &mut self.sdf_net.params,
            ParamGroup::ColorNet => &mut self.color_net.params,
            ParamGroup::Sharpness => std::slice::from_mut(&mut self.log_sharpness),
        }
    }

    pub fn params(&self, g: ParamGroup) -> &[f32] {
        match g {
            ParamGroup::HashTable => &self.encoding.table,
            ParamGroup::SdfNet => &self.sdf_net.params,
            ParamGroup::ColorNet => &self.color_net.params,
            ParamGroup::Sharpness => std::slice::from_ref(&self.log_sharpness),
        }
    }
}

impl SdfField for ImplicitAvatarField {
    fn distance(&self, x: &Vec3) -> f64 {
        self.with_tape(|tape| self.forward_sdf(x, tape))
    }

    fn radiance(&self, x: &Vec3, d: &Vec3) -> Rgb {
        self.with_tape(|tape| {
            self.forward_sdf(x, tape);
            self.forward_color(d, tape)
        })
    }

    fn sharpness(&self) -> f64 {
        self.sharpness_value()
    }

    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        self.with_tape(|tape| {
            self.forward_sdf(x, tape);
            let mut g = Vec3::zeros();
            self.backward(tape, 1.0, None, None, false, Some(&mut g));
            g
        })
    }

    fn bounds(&self) -> Option<Aabb> {
        Some(self.config.domain)
    }
}

/// Sphere-approximating initialization: the first layer sees the raw
/// position with random weights (encoding weights start at zero) and the
/// distance output averages the hidden units so that `f(x) ~ |x| - radius`.
fn geometric_init(net: &mut Mlp, radius: f64, rng: &mut ChaCha8Rng) {
    let hidden = net.layers()[0].outputs;
    let inputs = net.layers()[0].inputs;
    let outputs = net.layers()[1].outputs;
    let first = Normal::new(0.0, (2.0f64).sqrt() / (hidden as f64).sqrt()).unwrap();
    {
        let w = net.weight_mut(0);
        for o in 0..hidden {
            for i in 0..inputs {
                w[o * inputs + i] = if i < 3 { first.sample(rng) as f32 } else { 0.0 };
            }
        }
    }
    net.bias_mut(0).fill(0.0);
    let mean = std::f64::consts::PI.sqrt() / (hidden as f64).sqrt();
    let dist_row = Normal::new(mean, 1e-4).unwrap();
    let feat = Normal::new(0.0, (2.0 / (hidden + outputs) as f64).sqrt()).unwrap();
    {
        let w = net.weight_mut(1);
        for o in 0..outputs {
            for i in 0..hidden {
                w[o * hidden + i] = if o == 0 { dist_row.sample(rng) } else { feat.sample(rng) } as f32;
            }
        }
    }
    let b = net.bias_mut(1);
    b.fill(0.0);
    b[0] = -radius as f32;
}

/// `[d, sin(2^k pi d), cos(2^k pi d)]` for k < bands, or zeros.
pub(crate) fn embed_direction(d: &Vec3, bands: usize, zeroed: bool, out: &mut [f64]) {
    if zeroed {
        out.fill(0.0);
        return;
    }
    out[0] = d.x;
    out[1] = d.y;
    out[2] = d.z;
    let mut i = 3;
    for k in 0..bands {
        let freq = (1u64 << k) as f64 * std::f64::consts::PI;
        for c in 0..3 {
            out[i] = (freq * d[c]).sin();
            out[i + 1] = (freq * d[c]).cos();
            i += 2;
        }
    }
}
