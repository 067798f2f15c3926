//! Template reconstruction and guided generation.

mod config;
pub mod diff_render;
mod evaluate;
mod generate;
mod losses;
mod optim;
pub mod raster;
mod reconstruct;
mod sampling;

pub use diff_render::{backward_batch, forward_batch, PixelGrad, RayBatch};
pub use losses::{eikonal_loss, eikonal_loss_and_grad, eikonal_points, eikonal_step, silhouette_iou, silhouette_loss};
pub use optim::{trainable_groups, Adam};
pub use raster::{lambert_gray, rasterize, texture_color, MeshTargets, Raster};
pub use sampling::{sample_background, CameraDraw, CameraSampler, SceneBoxes};
pub use config::{GenerationConfig, LossWeights, OracleConfig, OracleKind, ReconstructConfig, Stage, StageSchedule, TrainingSchedule};
pub use reconstruct::{evaluate_views, reconstruct_template, reconstruct_template_with, reference_views, ReconstructReport, ReferenceView};
pub use generate::{mock_oracle, run_generation, CaptureCounts, GenerationObserver, GenerationReport, GenerationSession, StepDiagnostics};
pub use evaluate::{evaluation_cameras, silhouette_agreement, target_psnr};
