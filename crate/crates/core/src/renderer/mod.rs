//! Volume rendering of signed-distance fields.

pub mod camera;
pub mod composite;
pub mod image;
pub mod render;
pub mod weights;

pub use camera::{sample_ray, stratified_samples, Camera, Intrinsics, Ray};
pub use composite::{composite_render, CompositeOutput, DensityScene, ScenePrimitive, Winner};
pub use image::{load_float_map, save_float_map, upsample_bilinear, upsample_bilinear_at, upsample_bilinear_transpose, upsample_bilinear_transpose_at, FloatMapHeader, RgbImage};
pub use render::{
    mask_iou, render_image, render_image_with_background, render_opacity, render_pixel, BackgroundPolicy, PixelSample,
    RenderOutput, RenderSettings,
};
pub use weights::{alphas_from_sdf, composite_alphas, interval_alpha, neus_weights};
