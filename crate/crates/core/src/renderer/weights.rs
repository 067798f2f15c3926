//! Discrete volume-rendering weights from SDF samples.
//!
//! For consecutive samples `f_i`, `f_{i+1}` along a ray with logistic CDF
//! `Phi_s(f) = sigmoid(s f)`:
//!
//! ```text
//! alpha_i = max((Phi_s(f_i) - Phi_s(f_{i+1})) / Phi_s(f_i), 0)
//! w_i     = alpha_i * prod_{j<i} (1 - alpha_j)
//! ```
//!
//! The last sample has no successor and gets `alpha = 0`.

use crate::error::{precondition, Result};
use crate::math::log_sigmoid;

/// `alpha` for one interval, with the ratio `Phi(b)/Phi(a)` taken in log
/// space so saturated sigmoids stay finite.
#[inline]
pub fn interval_alpha(f_i: f64, f_next: f64, sharpness: f64) -> f64 {
    let ratio = (log_sigmoid(sharpness * f_next) - log_sigmoid(sharpness * f_i)).exp();
    (1.0 - ratio).max(0.0)
}

/// Per-sample opacities for a ray; `alphas.len() == sdf.len()`.
pub fn alphas_from_sdf(sdf: &[f64], sharpness: f64, out: &mut Vec<f64>) {
    out.clear();
    for w in sdf.windows(2) {
        out.push(interval_alpha(w[0], w[1], sharpness));
    }
    if !sdf.is_empty() {
        out.push(0.0);
    }
}

/// Front-to-back compositing weights `w_i = alpha_i T_i`.
pub fn composite_alphas(alphas: &[f64], weights: &mut Vec<f64>) {
    weights.clear();
    let mut transmittance = 1.0;
    for a in alphas {
        weights.push(a * transmittance);
        transmittance *= 1.0 - a;
    }
}

/// Compositing weights for SDF samples along one ray.
pub fn neus_weights(sdf_values: &[f64], sharpness: f64) -> Result<Vec<f64>> {
    if sdf_values.len() < 2 {
        return Err(precondition("need at least two SDF samples along the ray"));
    }
    if !(sharpness > 0.0) {
        return Err(precondition(format!("sharpness must be positive, got {sharpness}")));
    }
    let mut alphas = Vec::with_capacity(sdf_values.len());
    alphas_from_sdf(sdf_values, sharpness, &mut alphas);
    let mut w = Vec::with_capacity(sdf_values.len());
    composite_alphas(&alphas, &mut w);
    Ok(w)
}
