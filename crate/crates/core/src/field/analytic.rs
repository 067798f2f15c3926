//! Closed-form fields used as oracles and test subjects.

use crate::field::SdfField;
use crate::math::{Aabb, Rgb, Vec3};

#[derive(Clone, Debug)]
pub struct SphereSdf {
    pub center: Vec3,
    pub radius: f64,
    pub color: Rgb,
    pub sharpness: f64,
}

impl SphereSdf {
    pub fn new(center: Vec3, radius: f64, color: Rgb, sharpness: f64) -> Self {
        Self {
            center,
            radius,
            color,
            sharpness,
        }
    }

    pub fn unit(sharpness: f64) -> Self {
        Self::new(Vec3::zeros(), 1.0, [1.0, 0.0, 0.0], sharpness)
    }

    /// First intersection parameter of the ray with the sphere surface.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let oc = origin - self.center;
        let b = oc.dot(dir);
        let c = oc.norm_squared() - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b - disc.sqrt();
        (t >= 0.0).then_some(t)
    }
}

impl SdfField for SphereSdf {
    fn distance(&self, x: &Vec3) -> f64 {
        (x - self.center).norm() - self.radius
    }

    fn radiance(&self, _x: &Vec3, _d: &Vec3) -> Rgb {
        self.color
    }

    fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        let v = x - self.center;
        let n = v.norm();
        if n == 0.0 {
            Vec3::zeros()
        } else {
            v / n
        }
    }

    fn bounds(&self) -> Option<Aabb> {
        let c = self.center;
        Some(Aabb::cube([c.x, c.y, c.z], self.radius))
    }
}

/// Segment `a..b` swept by a ball of `radius`.
#[derive(Clone, Debug)]
pub struct CapsuleSdf {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
    pub color: Rgb,
    pub sharpness: f64,
}

impl CapsuleSdf {
    pub fn new(a: Vec3, b: Vec3, radius: f64, color: Rgb, sharpness: f64) -> Self {
        Self {
            a,
            b,
            radius,
            color,
            sharpness,
        }
    }

    fn closest_on_axis(&self, x: &Vec3) -> Vec3 {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        let t = if len2 == 0.0 {
            0.0
        } else {
            ((x - self.a).dot(&ab) / len2).clamp(0.0, 1.0)
        };
        self.a + ab * t
    }
}

impl SdfField for CapsuleSdf {
    fn distance(&self, x: &Vec3) -> f64 {
        (x - self.closest_on_axis(x)).norm() - self.radius
    }

    fn radiance(&self, _x: &Vec3, _d: &Vec3) -> Rgb {
        self.color
    }

    fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        let v = x - self.closest_on_axis(x);
        let n = v.norm();
        if n == 0.0 {
            Vec3::zeros()
        } else {
            v / n
        }
    }

    fn bounds(&self) -> Option<Aabb> {
        let mut b = Aabb::from_points([&self.a, &self.b]);
        b = b.expanded(self.radius);
        Some(b)
    }
}

/// Another field with its distance multiplied by a constant.
#[derive(Clone, Debug)]
pub struct ScaledSdf<F> {
    pub inner: F,
    pub scale: f64,
}

impl<F: SdfField> SdfField for ScaledSdf<F> {
    fn distance(&self, x: &Vec3) -> f64 {
        self.scale * self.inner.distance(x)
    }

    fn radiance(&self, x: &Vec3, d: &Vec3) -> Rgb {
        self.inner.radiance(x, d)
    }

    fn sharpness(&self) -> f64 {
        self.inner.sharpness()
    }

    fn distance_gradient(&self, x: &Vec3) -> Vec3 {
        self.inner.distance_gradient(x) * self.scale
    }
}

/// `f = +1` everywhere: nothing to hit.
#[derive(Clone, Debug)]
pub struct EmptyField {
    pub sharpness: f64,
}

impl Default for EmptyField {
    fn default() -> Self {
        Self { sharpness: 64.0 }
    }
}

impl SdfField for EmptyField {
    fn distance(&self, _x: &Vec3) -> f64 {
        1.0
    }

    fn radiance(&self, _x: &Vec3, _d: &Vec3) -> Rgb {
        [0.0; 3]
    }

    fn sharpness(&self) -> f64 {
        self.sharpness
    }

    fn distance_gradient(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
}
