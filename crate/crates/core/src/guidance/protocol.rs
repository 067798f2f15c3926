//! Wire format of the score-distillation service, version 1.
//!
//! Requests and responses share one framing:
//!
//! ```text
//! u32 LE   header length N
//! N bytes  UTF-8 JSON header
//! rest     f32 LE payload, H x W x 3, row-major, channels last
//! ```
//!
//! Request header:
//! `{"v": 1, "height", "width", "channels": 3, "prompt", "guidance_scale",
//!   "t_range": [min, max], "seed", "weighting"}`; the payload is the image
//! in [0, 1].
//!
//! Response header:
//! `{"v": 1, "height", "width", "channels": 3, "diagnostics": {"timestep",
//!   "weight", "model_id", "latency_ms"}}`; the payload is the pixel-space
//! gradient.

use serde::{Deserialize, Serialize};

use super::{GuidanceContext, GuidanceGradient};
use crate::error::{Error, Result};
use crate::renderer::RgbImage;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestHeader {
    pub v: u32,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub prompt: String,
    pub guidance_scale: f64,
    pub t_range: [f64; 2],
    pub seed: u64,
    pub weighting: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseDiagnostics {
    #[serde(default)]
    pub timestep: Option<f64>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub latency_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseHeader {
    pub v: u32,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    #[serde(default)]
    pub diagnostics: ResponseDiagnostics,
}

fn frame<H: Serialize>(header: &H, payload: impl Iterator<Item = f32>) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("protocol headers serialize");
    let mut out = Vec::with_capacity(4 + json.len());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn unframe<H: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<(H, Vec<f32>)> {
    if bytes.len() < 4 {
        return Err(Error::Protocol("message shorter than its length prefix".into()));
    }
    let n = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if bytes.len() < 4 + n {
        return Err(Error::Protocol(format!("header length {n} exceeds message size {}", bytes.len())));
    }
    let header: H = serde_json::from_slice(&bytes[4..4 + n]).map_err(|e| Error::Protocol(format!("bad header: {e}")))?;
    let body = &bytes[4 + n..];
    if body.len() % 4 != 0 {
        return Err(Error::Protocol("payload is not a whole number of f32 values".into()));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((header, data))
}

fn check_dims(v: u32, channels: usize, height: usize, width: usize, len: usize) -> Result<()> {
    if v != PROTOCOL_VERSION {
        return Err(Error::Protocol(format!("unsupported protocol version {v}")));
    }
    if channels != 3 {
        return Err(Error::Protocol(format!("expected 3 channels, got {channels}")));
    }
    if len != height * width * 3 {
        return Err(Error::Protocol(format!("payload has {len} values, header implies {}", height * width * 3)));
    }
    Ok(())
}

pub fn encode_request(image: &RgbImage, ctx: &GuidanceContext) -> Vec<u8> {
    let header = RequestHeader {
        v: PROTOCOL_VERSION,
        height: image.height,
        width: image.width,
        channels: 3,
        prompt: ctx.prompt.clone(),
        guidance_scale: ctx.guidance_scale,
        t_range: ctx.t_range,
        seed: ctx.seed,
        weighting: ctx.weighting.clone(),
    };
    frame(&header, image.pixels.iter().flatten().map(|v| *v as f32))
}

pub fn decode_request(bytes: &[u8]) -> Result<(RequestHeader, RgbImage)> {
    let (h, data): (RequestHeader, Vec<f32>) = unframe(bytes)?;
    check_dims(h.v, h.channels, h.height, h.width, data.len())?;
    let pixels = data.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect();
    let image = RgbImage::from_pixels(h.width, h.height, pixels)?;
    Ok((h, image))
}

pub fn encode_response(gradient: &[f32], height: usize, width: usize, diagnostics: ResponseDiagnostics) -> Vec<u8> {
    let header = ResponseHeader {
        v: PROTOCOL_VERSION,
        height,
        width,
        channels: 3,
        diagnostics,
    };
    frame(&header, gradient.iter().copied())
}

/// Parse a response and check it against the submitted image size.
pub fn decode_response(bytes: &[u8], height: usize, width: usize) -> Result<GuidanceGradient> {
    let (h, data): (ResponseHeader, Vec<f32>) = unframe(bytes)?;
    check_dims(h.v, h.channels, h.height, h.width, data.len())?;
    if h.height != height || h.width != width {
        return Err(Error::Protocol(format!(
            "response is {}x{}, request was {height}x{width}",
            h.height, h.width
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Protocol("response gradient contains non-finite values".into()));
    }
    Ok(GuidanceGradient {
        width,
        height,
        data: data.iter().map(|v| *v as f64).collect(),
        timestep: h.diagnostics.timestep,
        weight: h.diagnostics.weight,
    })
}
