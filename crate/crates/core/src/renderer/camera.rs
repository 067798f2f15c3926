use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::math::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Pinhole camera; camera axes follow the x-right, y-down, z-forward
/// convention and `rotation`/`translation` map world to camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub rotation: Mat3,
    pub translation: Vec3,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, rotation: Mat3, translation: Vec3, near: f64, far: f64) -> Result<Self> {
        if intrinsics.width == 0 || intrinsics.height == 0 {
            return Err(precondition("image dimensions must be at least 1"));
        }
        if !(near < far) || near < 0.0 {
            return Err(precondition(format!("need 0 <= near < far, got near {near}, far {far}")));
        }
        let rtr = rotation.transpose() * rotation;
        if (rtr - Mat3::identity()).abs().max() > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(precondition("camera rotation must be orthonormal with determinant 1"));
        }
        if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
            return Err(precondition("focal lengths must be positive"));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
            near,
            far,
        })
    }

    /// Camera at `eye` looking at `target` with vertical field of view
    /// `fov_y` (radians) and a centered principal point.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fov_y: f64,
        width: usize,
        height: usize,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| precondition("eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| precondition("up vector is parallel to the viewing direction"))?;
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let fy = 0.5 * height as f64 / (0.5 * fov_y).tan();
        let intrinsics = Intrinsics {
            fx: fy,
            fy,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        };
        Self::new(intrinsics, rotation, translation, near, far)
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn position(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::new(0.0, 0.0, 1.0)
    }

    /// Unit world-space direction through image coordinates `(v, u)`
    /// (row, column, continuous; pixel centers sit at `.5`).
    pub fn direction_at(&self, v: f64, u: f64) -> Vec3 {
        let k = &self.intrinsics;
        let cam = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        (self.rotation.transpose() * cam).normalize()
    }

    /// Project a world point to continuous `(row, col, depth)`.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let c = self.rotation * p + self.translation;
        if c.z <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fy * c.y / c.z + k.cy, k.fx * c.x / c.z + k.cx, c.z))
    }

    /// Dimensions of the ray grid at a given stride.
    pub fn strided_dims(&self, stride: usize) -> (usize, usize) {
        (self.height().div_ceil(stride), self.width().div_ceil(stride))
    }

    /// Full-resolution pixel represented by strided grid cell `(r, c)`.
    pub fn strided_pixel(&self, stride: usize, r: usize, c: usize) -> (usize, usize) {
        let o = (stride - 1) / 2;
        ((r * stride + o).min(self.height() - 1), (c * stride + o).min(self.width() - 1))
    }

    /// A copy at a different resolution with the same field of view.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width() as f64;
        let sy = height as f64 / self.height() as f64;
        let k = Intrinsics {
            fx: self.intrinsics.fx * sx,
            fy: self.intrinsics.fy * sy,
            cx: self.intrinsics.cx * sx,
            cy: self.intrinsics.cy * sy,
            width,
            height,
        };
        Self::new(k, self.rotation, self.translation, self.near, self.far)
    }
}

/// Ray with ascending sample parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t: Vec<f64>,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t: Vec<f64>) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-6 {
            return Err(precondition("ray direction must be unit length"));
        }
        if t.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(precondition("ray sample parameters must be strictly increasing"));
        }
        Ok(Self { origin, direction, t })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.t.iter().map(|t| self.at(*t))
    }
}

/// Stratified samples in `[near, far]`: stratum midpoints, or uniform
/// positions inside each stratum when `jitter` is given.
pub fn stratified_samples(near: f64, far: f64, n: usize, jitter: Option<&mut dyn rand::RngCore>) -> Vec<f64> {
    let step = (far - near) / n as f64;
    match jitter {
        None => (0..n).map(|i| near + (i as f64 + 0.5) * step).collect(),
        Some(rng) => (0..n)
            .map(|i| {
                // keep strictly inside the stratum so parameters stay increasing
                let u: f64 = rng.gen_range(0.0..1.0);
                near + (i as f64 + u.max(1e-9)) * step
            })
            .collect(),
    }
}

/// Ray through strided grid cell `pixel = (row, col)` with `n` samples.
pub fn sample_ray(
    camera: &Camera,
    pixel: (usize, usize),
    n: usize,
    stride: usize,
    jitter: Option<&mut dyn rand::RngCore>,
) -> Result<Ray> {
    if n < 2 {
        return Err(precondition(format!("need at least 2 samples per ray, got {n}")));
    }
    if stride == 0 {
        return Err(precondition("stride must be positive"));
    }
    let (rows, cols) = camera.strided_dims(stride);
    if pixel.0 >= rows || pixel.1 >= cols {
        return Err(precondition(format!(
            "pixel {:?} outside the {rows}x{cols} grid at stride {stride}",
            pixel
        )));
    }
    let (r, c) = camera.strided_pixel(stride, pixel.0, pixel.1);
    let direction = camera.direction_at(r as f64 + 0.5, c as f64 + 0.5);
    let t = stratified_samples(camera.near, camera.far, n, jitter);
    Ray::new(camera.position(), direction, t)
}
