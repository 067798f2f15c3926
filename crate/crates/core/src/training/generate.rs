use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ImplicitAvatarField;
use crate::guidance::{BodyPart, GuidanceContext, GuidanceOracle, MockOracle, ViewInfo};
use crate::math::Vec3;
use crate::renderer::{sample_ray, upsample_bilinear_at, upsample_bilinear_transpose_at, BackgroundPolicy, RgbImage};
use crate::training::config::{GenerationConfig, Stage, StageSchedule};
use crate::training::diff_render::{backward_batch, forward_batch, PixelGrad, RayBatch};
use crate::training::losses::{eikonal_loss_and_grad, eikonal_points, eikonal_step, silhouette_loss};
use crate::training::optim::{trainable_groups, Adam};
use crate::training::{sample_background, CameraSampler, MeshTargets, SceneBoxes};

/// One line of the diagnostics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub stage: Stage,
    pub epoch: usize,
    pub part: BodyPart,
    pub prompt: String,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub background: BackgroundPolicy,
    pub guidance_loss: Option<f64>,
    pub silhouette: f64,
    pub eikonal: f64,
    /// Weighted sum, when the oracle reports a loss.
    pub total: Option<f64>,
    pub timestep: Option<f64>,
    /// Set when the step was skipped.
    pub skipped: Option<String>,
    pub millis: f64,
}

/// Hooks called during [`GenerationSession::run`]; returning `Break`
/// stops the run early.
pub trait GenerationObserver {
    fn on_step(&mut self, _diag: &StepDiagnostics, _field: &ImplicitAvatarField) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn on_stage_end(&mut self, _stage: Stage, _field: &ImplicitAvatarField) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl GenerationObserver for () {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptureCounts {
    pub body: usize,
    pub face: usize,
    pub skipped: usize,
}

#[derive(Debug)]
pub struct GenerationReport {
    pub field: ImplicitAvatarField,
    pub steps: usize,
    pub coarse: CaptureCounts,
    pub fine: CaptureCounts,
    pub checkpoints: Vec<PathBuf>,
    pub seconds: f64,
    /// True when an observer stopped the run.
    pub stopped: bool,
}

/// Mutable state of a generation run: the trained field, the frozen
/// template and the optimizer.
pub struct GenerationSession {
    pub field: ImplicitAvatarField,
    template: ImplicitAvatarField,
    pub config: GenerationConfig,
    pub boxes: SceneBoxes,
    surface: Vec<Vec3>,
    cameras: CameraSampler,
    adam: Adam,
    rng: ChaCha8Rng,
    step: usize,
    log: Option<BufWriter<File>>,
}

impl GenerationSession {
    /// Start from `template`; `surface` seeds near-surface Eikonal points
    /// and the scene boxes.
    pub fn new(template: ImplicitAvatarField, surface: &crate::body_model::BodyMesh, config: GenerationConfig) -> Result<Self> {
        config.validate()?;
        let boxes = SceneBoxes::for_mesh(surface)?;
        let mut cameras = config.cameras.clone();
        cameras.resolution = config.oracle.input_size;
        let mut adam = Adam::new(config.schedule.learning_rate);
        adam.beta1 = config.schedule.beta1;
        adam.beta2 = config.schedule.beta2;
        Ok(Self {
            field: template.clone(),
            template,
            boxes,
            surface: surface.vertices.clone(),
            cameras,
            adam,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            step: 0,
            log: None,
            config,
        })
    }

    /// Append one JSON line per step to `path`.
    pub fn log_to(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.log = Some(BufWriter::new(File::create(path)?));
        Ok(())
    }

    pub fn template(&self) -> &ImplicitAvatarField {
        &self.template
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Body/face capture order for one epoch, shuffled.
    fn epoch_plan(&mut self, stage: &StageSchedule) -> Vec<BodyPart> {
        let mut plan = vec![BodyPart::Body; stage.body_captures];
        plan.extend(std::iter::repeat(BodyPart::Face).take(stage.head_captures));
        plan.shuffle(&mut self.rng);
        plan
    }

    /// One optimization step on a camera drawn for `part`.
    pub fn step(&mut self, oracle: &mut dyn GuidanceOracle, stage: Stage, epoch: usize, part: BodyPart) -> Result<StepDiagnostics> {
        let started = Instant::now();
        let sched = self.config.schedule.stage(stage).clone();
        let step = self.step;
        self.step += 1;
        let draw = self.cameras.sample(&mut self.rng, &self.boxes, part)?;
        let size = draw.camera.width();
        let stride = size / sched.resolution;
        let (rows, cols) = draw.camera.strided_dims(stride);
        let policy = sample_background(&mut self.rng);
        let bgs = policy.realize(rows * cols, self.rng.gen());
        // a fresh sub-grid offset each step lets the strided silhouette term
        // see every full-resolution pixel over the course of a stage
        let offset = (self.rng.gen_range(0..stride), self.rng.gen_range(0..stride));
        let mut batch = RayBatch::default();
        for idx in 0..rows * cols {
            let jitter: Option<&mut dyn rand::RngCore> = if self.config.jitter { Some(&mut self.rng) } else { None };
            let pixel = ((idx / cols) * stride + offset.0, (idx % cols) * stride + offset.1);
            batch.push(sample_ray(&draw.camera, pixel, sched.samples, 1, jitter)?, bgs[idx]);
        }
        let cutoff = self.config.weight_cutoff;
        let template_opacity: Vec<f64> = forward_batch(&self.template, &batch, f64::INFINITY).iter().map(|p| p.opacity).collect();
        let current = forward_batch(&self.field, &batch, cutoff);
        let low = RgbImage::from_pixels(cols, rows, current.iter().map(|p| p.rgb).collect())?;
        let image = upsample_bilinear_at(&low, stride, offset, size, size);
        let background = upsample_bilinear_at(&RgbImage::from_pixels(cols, rows, bgs.clone())?, stride, offset, size, size);

        let mut ctx = GuidanceContext::new(&self.config.prompt, part, draw.azimuth);
        ctx.guidance_scale = self.config.oracle.guidance_scale;
        ctx.t_range = self.config.oracle.t_range;
        ctx.weighting = self.config.oracle.weighting.clone();
        ctx.seed = self.config.seed.wrapping_mul(1_000_003).wrapping_add(step as u64);
        let mut diag = StepDiagnostics {
            step,
            stage,
            epoch,
            part,
            prompt: ctx.prompt.clone(),
            azimuth: draw.azimuth,
            elevation: draw.elevation,
            distance: draw.distance,
            background: policy,
            guidance_loss: None,
            silhouette: 0.0,
            eikonal: 0.0,
            total: None,
            timestep: None,
            skipped: None,
            millis: 0.0,
        };
        let view = ViewInfo {
            camera: &draw.camera,
            background: &background,
        };
        let guidance = match oracle.gradient(&image, &ctx, &view) {
            Ok(g) => g,
            Err(e @ Error::Transport { .. }) => {
                diag.skipped = Some(e.to_string());
                diag.millis = started.elapsed().as_secs_f64() * 1e3;
                self.write_log(&diag)?;
                return Ok(diag);
            }
            Err(e) => return Err(e),
        };
        if guidance.width != size || guidance.height != size || !guidance.is_finite() {
            return Err(Error::Training {
                step,
                message: "guidance gradient has the wrong shape or non-finite values".into(),
            });
        }
        diag.guidance_loss = oracle.last_loss();
        diag.timestep = guidance.timestep;
        let d_rgb = upsample_bilinear_transpose_at(&guidance.as_rgb(), stride, offset, size, size, cols, rows);

        let opacity: Vec<f64> = current.iter().map(|p| p.opacity).collect();
        let (sil, d_sil) = silhouette_loss(&template_opacity, &opacity)?;
        let w = self.config.weights;
        let train_geometry = self.config.train_geometry;
        let (mut grads, _) = backward_batch(&self.field, &batch, cutoff, train_geometry, |i, _| PixelGrad {
            rgb: d_rgb[i],
            opacity: w.silhouette * d_sil[i],
        });
        let mut eik = 0.0;
        if train_geometry && w.eikonal > 0.0 && self.config.eikonal_points > 0 {
            let pts = eikonal_points(
                &mut self.rng,
                self.field.domain(),
                &self.surface,
                self.config.eikonal_points,
                0.02 * self.boxes.body.extent().y,
            );
            eik = eikonal_loss_and_grad(&self.field, &pts, eikonal_step(&self.field), w.eikonal, &mut grads);
        }
        diag.silhouette = sil;
        diag.eikonal = eik;
        diag.total = diag.guidance_loss.map(|g| g + w.silhouette * sil + w.eikonal * eik);
        let finite = diag.total.map_or(true, f64::is_finite) && sil.is_finite() && eik.is_finite();
        if !finite || !grads.is_finite() {
            return Err(Error::Training {
                step,
                message: "loss or gradient became non-finite".into(),
            });
        }
        self.adam
            .step(&mut self.field, &grads, &trainable_groups(train_geometry))
            .map_err(|e| Error::Training { step, message: e.to_string() })?;
        diag.millis = started.elapsed().as_secs_f64() * 1e3;
        self.write_log(&diag)?;
        Ok(diag)
    }

    fn write_log(&mut self, diag: &StepDiagnostics) -> Result<()> {
        if let Some(w) = self.log.as_mut() {
            serde_json::to_writer(&mut *w, diag)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    /// Coarse stage then fine stage, resetting the optimizer in between.
    /// Checkpoints go to `checkpoint_dir` as `coarse.ckpt` and `fine.ckpt`.
    pub fn run(
        mut self,
        oracle: &mut dyn GuidanceOracle,
        checkpoint_dir: Option<&Path>,
        observer: &mut dyn GenerationObserver,
    ) -> Result<GenerationReport> {
        let started = Instant::now();
        let mut counts = [CaptureCounts::default(), CaptureCounts::default()];
        let mut checkpoints = Vec::new();
        let mut stopped = false;
        'stages: for (si, stage) in [Stage::Coarse, Stage::Fine].into_iter().enumerate() {
            self.adam.reset();
            let sched = self.config.schedule.stage(stage).clone();
            for epoch in 0..sched.epochs {
                for part in self.epoch_plan(&sched) {
                    let diag = self.step(oracle, stage, epoch, part)?;
                    match part {
                        BodyPart::Body => counts[si].body += 1,
                        BodyPart::Face => counts[si].face += 1,
                    }
                    counts[si].skipped += diag.skipped.is_some() as usize;
                    if observer.on_step(&diag, &self.field).is_break() {
                        stopped = true;
                        break 'stages;
                    }
                }
            }
            if let Some(dir) = checkpoint_dir {
                let path = dir.join(format!("{stage}.ckpt"));
                self.field.save(&path)?;
                checkpoints.push(path);
            }
            if observer.on_stage_end(stage, &self.field).is_break() {
                stopped = true;
                break;
            }
        }
        let [coarse, fine] = counts;
        Ok(GenerationReport {
            steps: self.step,
            field: self.field,
            coarse,
            fine,
            checkpoints,
            seconds: started.elapsed().as_secs_f64(),
            stopped,
        })
    }
}

/// Mock oracle pulling renders toward `targets`, weighted by the
/// configured mock weight or one over the oracle pixel count.
pub fn mock_oracle(targets: MeshTargets, config: &GenerationConfig) -> MockOracle {
    let size = config.oracle.input_size;
    let lambda = config.weights.mock.unwrap_or(1.0 / (size * size) as f64);
    MockOracle::new(targets, lambda).with_input_size(size)
}

/// Run both stages from template `template` with diagnostics and
/// checkpoints written under `out_dir`.
pub fn run_generation(
    template: ImplicitAvatarField,
    surface: &crate::body_model::BodyMesh,
    oracle: &mut dyn GuidanceOracle,
    config: GenerationConfig,
    out_dir: Option<&Path>,
) -> Result<GenerationReport> {
    let mut session = GenerationSession::new(template, surface, config)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        session.log_to(dir.join("diagnostics.jsonl"))?;
    }
    session.run(oracle, out_dir, &mut ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::synthetic::{capsule_rig, CapsuleRigSpec};
    use crate::field::FieldConfig;
    use crate::training::TrainingSchedule;

    fn small_config() -> GenerationConfig {
        let mut cfg = GenerationConfig::desk();
        cfg.schedule = TrainingSchedule::desk();
        cfg.schedule.coarse.resolution = 8;
        cfg.schedule.fine.resolution = 16;
        cfg.schedule.coarse.samples = 16;
        cfg.schedule.fine.samples = 16;
        cfg.schedule.coarse.epochs = 1;
        cfg.schedule.fine.epochs = 1;
        cfg.schedule.coarse.body_captures = 2;
        cfg.schedule.coarse.head_captures = 1;
        cfg.schedule.fine.body_captures = 1;
        cfg.schedule.fine.head_captures = 0;
        cfg.oracle.input_size = 16;
        cfg.eikonal_points = 8;
        cfg
    }

    fn setup() -> (ImplicitAvatarField, crate::body_model::BodyMesh) {
        let mesh = capsule_rig(&CapsuleRigSpec::default()).template_mesh();
        (ImplicitAvatarField::new(FieldConfig::tiny()), mesh)
    }

    #[test]
    fn quotas_are_honored_and_logged() {
        let (field, mesh) = setup();
        let mut oracle = MockOracle::new(MeshTargets::new(mesh.clone()), 1.0 / 256.0);
        let dir = tempfile::tempdir().unwrap();
        let r = run_generation(field, &mesh, &mut oracle, small_config(), Some(dir.path())).unwrap();
        assert_eq!(r.coarse, CaptureCounts { body: 2, face: 1, skipped: 0 });
        assert_eq!(r.fine, CaptureCounts { body: 1, face: 0, skipped: 0 });
        let log = std::fs::read_to_string(dir.path().join("diagnostics.jsonl")).unwrap();
        let lines: Vec<StepDiagnostics> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|d| d.total.is_some()));
        assert!(lines.iter().filter(|d| d.stage == Stage::Fine).all(|d| d.part == BodyPart::Body));
        assert_eq!(r.checkpoints.len(), 2);
        assert_eq!(ImplicitAvatarField::load(&r.checkpoints[1]).unwrap(), r.field);
    }

    #[test]
    fn zero_epochs_leave_the_template_unchanged() {
        let (field, mesh) = setup();
        let mut cfg = small_config();
        cfg.schedule.coarse.epochs = 0;
        cfg.schedule.fine.epochs = 0;
        let mut oracle = MockOracle::new(MeshTargets::new(mesh.clone()), 1.0);
        let r = run_generation(field.clone(), &mesh, &mut oracle, cfg, None).unwrap();
        assert_eq!(r.field, field);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn runs_are_deterministic_given_the_seed() {
        let (field, mesh) = setup();
        let run = || {
            let mut oracle = MockOracle::new(MeshTargets::new(mesh.clone()), 1.0 / 256.0);
            run_generation(field.clone(), &mesh, &mut oracle, small_config(), None).unwrap().field
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frozen_geometry_only_changes_color() {
        let (field, mesh) = setup();
        let mut cfg = small_config();
        cfg.train_geometry = false;
        let mut oracle = MockOracle::new(MeshTargets::new(mesh.clone()), 1.0 / 256.0);
        let r = run_generation(field.clone(), &mesh, &mut oracle, cfg, None).unwrap();
        assert_eq!(r.field.encoding, field.encoding);
        assert_eq!(r.field.sdf_net, field.sdf_net);
        assert_eq!(r.field.log_sharpness, field.log_sharpness);
        assert_ne!(r.field.color_net, field.color_net);
    }
}
