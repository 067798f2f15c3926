//! Image-space guidance: a pluggable oracle maps a rendered image to a
//! per-pixel gradient. [`MockOracle`] is an analytic stand-in with a known
//! loss; [`RemoteOracle`] talks to the score-distillation service.

mod prompt;
pub mod protocol;
mod remote;

pub use prompt::{augment_prompt, view_for_azimuth, BodyPart, ViewTag};
pub use remote::RemoteOracle;

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::renderer::{Camera, RgbImage};

/// Largest diffusion timestep accepted in `t_range`.
pub const MAX_TIMESTEP: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceContext {
    /// Full, view-augmented prompt.
    pub prompt: String,
    pub view: ViewTag,
    pub part: BodyPart,
    pub guidance_scale: f64,
    pub t_range: [f64; 2],
    pub seed: u64,
    /// Timestep weighting mode, passed through to the service.
    pub weighting: String,
}

impl GuidanceContext {
    /// Context for a base prompt seen from azimuth `phi`, with the default
    /// scale of 100 and timesteps in [20, 980].
    pub fn new(base_prompt: &str, part: BodyPart, phi: f64) -> Self {
        Self {
            prompt: augment_prompt(base_prompt, part, phi),
            view: view_for_azimuth(phi),
            part,
            guidance_scale: 100.0,
            t_range: [20.0, 980.0],
            seed: 0,
            weighting: "constant".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.guidance_scale > 0.0) {
            return Err(precondition(format!("guidance scale must be positive, got {}", self.guidance_scale)));
        }
        let [lo, hi] = self.t_range;
        if !(0.0 < lo && lo <= hi && hi <= MAX_TIMESTEP) {
            return Err(precondition(format!("timestep range [{lo}, {hi}] outside (0, {MAX_TIMESTEP}]")));
        }
        Ok(())
    }
}

/// Per-pixel gradient of the guidance loss with respect to the submitted
/// image (`height x width x 3`, row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceGradient {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub timestep: Option<f64>,
    pub weight: Option<f64>,
}

impl GuidanceGradient {
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_rgb(&self) -> Vec<[f64; 3]> {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Camera and background of the image handed to an oracle. Only analytic
/// oracles look at it.
pub struct ViewInfo<'a> {
    pub camera: &'a Camera,
    /// Background behind the submitted image, at its resolution.
    pub background: &'a RgbImage,
}

pub trait GuidanceOracle: Send {
    fn name(&self) -> &str;

    /// Square resolution images should be upsampled to before submission.
    fn input_size(&self) -> Option<usize>;

    fn gradient(&mut self, image: &RgbImage, ctx: &GuidanceContext, view: &ViewInfo<'_>) -> Result<GuidanceGradient>;

    /// Scalar loss behind the most recent gradient, when the oracle has one.
    fn last_loss(&self) -> Option<f64> {
        None
    }
}

/// `lambda (rendered - target)`, the gradient of
/// `lambda / 2 * ||rendered - target||^2`.
pub fn mock_gradient(rendered: &RgbImage, target: &RgbImage, lambda: f64) -> Result<GuidanceGradient> {
    rendered.same_shape(target)?;
    let data = rendered
        .pixels
        .iter()
        .zip(&target.pixels)
        .flat_map(|(r, t)| [lambda * (r[0] - t[0]), lambda * (r[1] - t[1]), lambda * (r[2] - t[2])])
        .collect();
    Ok(GuidanceGradient {
        width: rendered.width,
        height: rendered.height,
        data,
        timestep: None,
        weight: Some(1.0),
    })
}

/// The scalar loss whose gradient [`mock_gradient`] returns.
pub fn mock_loss(rendered: &RgbImage, target: &RgbImage, lambda: f64) -> Result<f64> {
    rendered.same_shape(target)?;
    let sq: f64 = rendered
        .pixels
        .iter()
        .zip(&target.pixels)
        .map(|(r, t)| (0..3).map(|k| (r[k] - t[k]).powi(2)).sum::<f64>())
        .sum();
    Ok(0.5 * lambda * sq)
}

/// Produces the image a mock oracle pulls renders toward.
pub trait TargetSource: Send + Sync {
    fn target(&self, view: &ViewInfo<'_>) -> Result<RgbImage>;
}

impl<F> TargetSource for F
where
    F: Fn(&ViewInfo<'_>) -> Result<RgbImage> + Send + Sync,
{
    fn target(&self, view: &ViewInfo<'_>) -> Result<RgbImage> {
        self(view)
    }
}

pub struct MockOracle {
    pub source: Box<dyn TargetSource>,
    pub lambda: f64,
    pub input_size: Option<usize>,
    /// Loss of the most recent call.
    pub last_loss: f64,
}

impl MockOracle {
    pub fn new(source: impl TargetSource + 'static, lambda: f64) -> Self {
        Self {
            source: Box::new(source),
            lambda,
            input_size: None,
            last_loss: 0.0,
        }
    }

    pub fn with_input_size(mut self, size: usize) -> Self {
        self.input_size = Some(size);
        self
    }
}

impl GuidanceOracle for MockOracle {
    fn name(&self) -> &str {
        "mock"
    }

    fn input_size(&self) -> Option<usize> {
        self.input_size
    }

    fn gradient(&mut self, image: &RgbImage, _ctx: &GuidanceContext, view: &ViewInfo<'_>) -> Result<GuidanceGradient> {
        let target = self.source.target(view)?;
        self.last_loss = mock_loss(image, &target, self.lambda)?;
        mock_gradient(image, &target, self.lambda)
    }

    fn last_loss(&self) -> Option<f64> {
        Some(self.last_loss)
    }
}
