//! Fully connected stacks with an explicit forward tape and reverse pass.
//!
//! Parameters are stored as one flat `f32` buffer (per layer: row-major weight
//! matrix `[outputs x inputs]` followed by the bias); all arithmetic runs in
//! `f64`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Softplus { beta: f64 },
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Softplus { beta } => {
                let z = beta * x;
                if z > 30.0 {
                    x
                } else {
                    z.exp().ln_1p() / beta
                }
            }
            Activation::Sigmoid => crate::math::sigmoid(x),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => crate::math::sigmoid(beta * x),
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerSpec>,
    /// Start of each layer's weight block in `params`.
    offsets: Vec<usize>,
    /// Start of each layer's input inside the activation tape.
    act_offsets: Vec<usize>,
    pre_offsets: Vec<usize>,
    pub params: Vec<f32>,
}

/// Per-evaluation activations kept for the reverse pass.
#[derive(Clone, Debug, Default)]
pub struct MlpTape {
    acts: Vec<f64>,
    pre: Vec<f64>,
}

impl Mlp {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        assert!(!layers.is_empty());
        for w in layers.windows(2) {
            assert_eq!(w[0].outputs, w[1].inputs, "layer widths must chain");
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut act_offsets = Vec::with_capacity(layers.len() + 1);
        let mut pre_offsets = Vec::with_capacity(layers.len());
        let (mut p, mut a, mut q) = (0, 0, 0);
        for l in &layers {
            offsets.push(p);
            act_offsets.push(a);
            pre_offsets.push(q);
            p += l.inputs * l.outputs + l.outputs;
            a += l.inputs;
            q += l.outputs;
        }
        act_offsets.push(a);
        Self {
            layers,
            offsets,
            act_offsets,
            pre_offsets,
            params: vec![0.0; p],
        }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn new_tape(&self) -> MlpTape {
        let last = self.layers.last().unwrap();
        MlpTape {
            acts: vec![0.0; self.act_offsets[self.layers.len()] + last.outputs],
            pre: vec![0.0; self.pre_offsets[self.layers.len() - 1] + last.outputs],
        }
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut [f32] {
        let l = &self.layers[layer];
        let o = self.offsets[layer];
        &mut self.params[o..o + l.inputs * l.outputs]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f32] {
        let l = &self.layers[layer];
        let o = self.offsets[layer] + l.inputs * l.outputs;
        &mut self.params[o..o + l.outputs]
    }

    /// Xavier-style normal initialization of every layer, zero biases.
    pub fn init_default(&mut self, rng: &mut impl Rng) {
        for i in 0..self.layers.len() {
            let l = self.layers[i].clone();
            let std = (2.0 / (l.inputs + l.outputs) as f64).sqrt();
            let normal = Normal::new(0.0, std).unwrap();
            for w in self.weight_mut(i) {
                *w = normal.sample(rng) as f32;
            }
            self.bias_mut(i).fill(0.0);
        }
    }

    /// Run the network; the returned slice lives inside the tape.
    pub fn forward<'t>(&self, input: &[f64], tape: &'t mut MlpTape) -> &'t [f64] {
        debug_assert_eq!(input.len(), self.input_dim());
        tape.acts[..input.len()].copy_from_slice(input);
        for (i, l) in self.layers.iter().enumerate() {
            let w_off = self.offsets[i];
            let weights = &self.params[w_off..w_off + l.inputs * l.outputs];
            let bias = &self.params[w_off + l.inputs * l.outputs..w_off + l.inputs * l.outputs + l.outputs];
            let a_in = self.act_offsets[i];
            let a_out = self.act_offsets[i + 1];
            let p_off = self.pre_offsets[i];
            let (head, tail) = tape.acts.split_at_mut(a_out);
            let x = &head[a_in..a_out];
            for o in 0..l.outputs {
                let row = &weights[o * l.inputs..(o + 1) * l.inputs];
                let mut acc = bias[o] as f64;
                for (w, xi) in row.iter().zip(x) {
                    acc += *w as f64 * xi;
                }
                tape.pre[p_off + o] = acc;
                tail[o] = l.activation.apply(acc);
            }
        }
        let out = self.act_offsets[self.layers.len()];
        &tape.acts[out..out + self.output_dim()]
    }

    pub fn output<'t>(&self, tape: &'t MlpTape) -> &'t [f64] {
        let out = self.act_offsets[self.layers.len()];
        &tape.acts[out..out + self.output_dim()]
    }

    /// Reverse pass. Accumulates parameter gradients into `grads` (same
    /// layout as `params`) when given, and writes the input gradient into
    /// `d_input` when given.
    pub fn backward(
        &self,
        tape: &MlpTape,
        d_output: &[f64],
        mut grads: Option<&mut [f64]>,
        d_input: Option<&mut [f64]>,
    ) {
        let n = self.layers.len();
        let mut delta: Vec<f64> = Vec::with_capacity(self.output_dim());
        {
            let l = &self.layers[n - 1];
            let p_off = self.pre_offsets[n - 1];
            let a_out = self.act_offsets[n];
            for o in 0..l.outputs {
                let d = l.activation.derivative(tape.pre[p_off + o], tape.acts[a_out + o]);
                delta.push(d_output[o] * d);
            }
        }
        let mut d_in_buf: Vec<f64> = Vec::new();
        for i in (0..n).rev() {
            let l = &self.layers[i];
            let w_off = self.offsets[i];
            let weights = &self.params[w_off..w_off + l.inputs * l.outputs];
            let x = &tape.acts[self.act_offsets[i]..self.act_offsets[i + 1]];
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g[w_off..w_off + l.inputs * l.outputs + l.outputs];
                let (gw, gb) = gw.split_at_mut(l.inputs * l.outputs);
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if i == 0 && d_input.is_none() {
                break;
            }
            d_in_buf.clear();
            d_in_buf.resize(l.inputs, 0.0);
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &weights[o * l.inputs..(o + 1) * l.inputs];
                for (acc, w) in d_in_buf.iter_mut().zip(row) {
                    *acc += d * *w as f64;
                }
            }
            if i == 0 {
                break;
            }
            let prev = &self.layers[i - 1];
            let p_off = self.pre_offsets[i - 1];
            let a_off = self.act_offsets[i];
            delta.clear();
            for k in 0..prev.outputs {
                let d = prev.activation.derivative(tape.pre[p_off + k], tape.acts[a_off + k]);
                delta.push(d_in_buf[k] * d);
            }
        }
        if let Some(d_input) = d_input {
            d_input.copy_from_slice(&d_in_buf);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Mlp {
        let mut m = Mlp::new(vec![
            LayerSpec { inputs: 3, outputs: 5, activation: Activation::Softplus { beta: 10.0 } },
            LayerSpec { inputs: 5, outputs: 4, activation: Activation::Relu },
            LayerSpec { inputs: 4, outputs: 2, activation: Activation::Sigmoid },
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        m.init_default(&mut rng);
        for b in m.params.iter_mut() {
            *b += 0.05;
        }
        m
    }

    fn loss(m: &Mlp, x: &[f64]) -> f64 {
        let mut t = m.new_tape();
        let y = m.forward(x, &mut t);
        0.7 * y[0] - 1.3 * y[1] * y[1]
    }

    #[test]
    fn reverse_pass_matches_finite_differences() {
        let m = tiny();
        let x = [0.3, -0.2, 0.8];
        let mut t = m.new_tape();
        let y = m.forward(&x, &mut t).to_vec();
        let d_out = [0.7, -2.6 * y[1]];
        let mut grads = vec![0.0; m.num_params()];
        let mut d_in = [0.0; 3];
        m.backward(&t, &d_out, Some(&mut grads), Some(&mut d_in));

        let h = 1e-3f32;
        for p in 0..m.num_params() {
            let mut plus = m.clone();
            plus.params[p] += h;
            let mut minus = m.clone();
            minus.params[p] -= h;
            let step = (plus.params[p] as f64) - (minus.params[p] as f64);
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / step;
            assert!((fd - grads[p]).abs() < 1e-4 + 1e-2 * fd.abs(), "param {p}: fd {fd} vs {}", grads[p]);
        }
        for k in 0..3 {
            let mut xp = x;
            xp[k] += 1e-5;
            let mut xm = x;
            xm[k] -= 1e-5;
            let fd = (loss(&m, &xp) - loss(&m, &xm)) / 2e-5;
            assert!((fd - d_in[k]).abs() < 1e-6, "input {k}: fd {fd} vs {}", d_in[k]);
        }
    }

    #[test]
    fn sigmoid_output_is_bounded() {
        let m = tiny();
        let mut t = m.new_tape();
        for x in [[100.0, -100.0, 3.0], [-50.0, 20.0, 0.0]] {
            for y in m.forward(&x, &mut t) {
                assert!((0.0..=1.0).contains(y));
            }
        }
    }
}
