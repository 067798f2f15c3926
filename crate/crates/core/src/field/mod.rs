//! Implicit avatar fields: the neural hash-grid SDF and analytic stand-ins.

pub mod analytic;
pub mod checkpoint;
pub mod hash_grid;
pub mod mlp;
mod neural;

pub use analytic::{CapsuleSdf, EmptyField, ScaledSdf, SphereSdf};
pub use hash_grid::{HashGridConfig, HashGridEncoding};
pub use mlp::{Activation, LayerSpec, Mlp, MlpTape};
pub use neural::{FieldConfig, FieldGrads, ImplicitAvatarField, ParamGroup, PointTape};

use crate::math::{Aabb, Rgb, Vec3};

/// Read-only view of a signed distance field with radiance, as consumed by
/// the renderers. Negative inside, positive outside.
///
/// `distance` must be defined everywhere (fields with a bounded domain extend
/// themselves outside it).
pub trait SdfField: Sync {
    fn distance(&self, x: &Vec3) -> f64;

    fn radiance(&self, x: &Vec3, d: &Vec3) -> Rgb;

    /// Sharpness `s` of the logistic density used to turn distances into
    /// compositing weights.
    fn sharpness(&self) -> f64;

    /// Spatial gradient of the distance; central differences by default.
    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        let h = 1e-5;
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            g[k] = (self.distance(&(x + e)) - self.distance(&(x - e))) / (2.0 * h);
        }
        g
    }

    /// Region where the field carries content, if bounded.
    fn bounds(&self) -> Option<Aabb> {
        None
    }
}

impl<T: SdfField + ?Sized> SdfField for &T {
    fn distance(&self, x: &Vec3) -> f64 {
        (**self).distance(x)
    }
    fn radiance(&self, x: &Vec3, d: &Vec3) -> Rgb {
        (**self).radiance(x, d)
    }
    fn sharpness(&self) -> f64 {
        (**self).sharpness()
    }
    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        (**self).distance_gradient(x)
    }
    fn bounds(&self) -> Option<Aabb> {
        (**self).bounds()
    }
}
