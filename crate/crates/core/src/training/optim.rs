use crate::error::{Error, Result};
use crate::field::{FieldGrads, ImplicitAvatarField, ParamGroup};

/// Adam over the field's parameter groups with first/second moments kept
/// in 64-bit.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Drop the moment estimates and the bias-correction counter.
    pub fn reset(&mut self) {
        self.step = 0;
        self.m.clear();
        self.v.clear();
    }

    /// Apply one update to the groups in `groups`; others are untouched.
    pub fn step(&mut self, field: &mut ImplicitAvatarField, grads: &FieldGrads, groups: &[ParamGroup]) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        if self.m.is_empty() {
            for g in ParamGroup::ALL {
                let n = field.params(g).len();
                self.m.push(vec![0.0; n]);
                self.v.push(vec![0.0; n]);
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = self.lr / bc1;
        for (gi, g) in ParamGroup::ALL.into_iter().enumerate() {
            if !groups.contains(&g) {
                continue;
            }
            let grad = grads.group(g);
            let params = field.params_mut(g);
            let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
            for i in 0..params.len() {
                let gr = grad[i];
                // untouched hash entries keep their moments frozen
                if gr == 0.0 && g == ParamGroup::HashTable {
                    continue;
                }
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gr;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gr * gr;
                let update = step_size * m[i] / ((v[i] / bc2).sqrt() + self.eps);
                params[i] = (params[i] as f64 - update) as f32;
            }
        }
        Ok(())
    }
}

/// Groups a step touches: everything, or appearance only.
pub fn trainable_groups(train_geometry: bool) -> Vec<ParamGroup> {
    ParamGroup::ALL.into_iter().filter(|g| train_geometry || !g.is_geometry()).collect()
}
